"""Command-line interface.

Subcommands: gen-elements, gen-story, eval-cloze, metrics. Backend and
defaults come from a YAML config (--config or SCRATCHPLOT_CONFIG).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .config import PipelineConfig
from .errors import ScratchPlotError
from .metrics import metrics_report
from .pipeline import (
    ElementPool,
    POOLED_KINDS,
    PlanSampler,
    generate_bare_story,
    generate_element_pool,
    generate_story,
)
from .plan import PlotElementKind
from .ranking import cloze_evaluate, load_cloze_file

logger = logging.getLogger(__name__)

_KIND_CHOICES = {
    "location": [PlotElementKind.LOCATION],
    "cast": [PlotElementKind.CAST_MALE, PlotElementKind.CAST_FEMALE],
    "cast-male": [PlotElementKind.CAST_MALE],
    "cast-female": [PlotElementKind.CAST_FEMALE],
    "genre": [PlotElementKind.GENRE],
    "theme": [PlotElementKind.THEME],
    "all": list(POOLED_KINDS),
}


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Pipeline config file (or set SCRATCHPLOT_CONFIG).")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, verbose: bool):
    """Plan-first story generation with pluggable LM backends."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = PipelineConfig.load(config_path)


@main.command("gen-elements")
@click.option("--kind", required=True, type=click.Choice(sorted(_KIND_CHOICES)))
@click.option("--pool", "pool_path", required=True, type=click.Path(dir_okay=False))
@click.option("--num", type=int, default=None, help="Continuations per task description.")
@click.option("--min-len", type=int, default=None)
@click.option("--max-len", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.pass_obj
def gen_elements(config: PipelineConfig, kind: str, pool_path: str,
                 num: int | None, min_len: int | None, max_len: int | None, seed: int):
    """Generate plot elements offline and store them in the pool."""
    gateway = config.build_gateway()
    registry = config.build_registry()
    stopwords = config.build_stopwords()
    pool = ElementPool(pool_path)
    total = 0
    for element_kind in _KIND_CHOICES[kind]:
        params = config.params_for(
            element_kind, num=num, min_len=min_len, max_len=max_len
        )
        written = generate_element_pool(
            gateway, registry, element_kind, params, pool,
            seed=seed, stopwords=stopwords,
            debias_every_step=config.debias_every_step,
        )
        click.echo(f"{element_kind.value}: wrote {written} element(s)")
        total += written
    click.echo(f"total: {total} element(s) in {pool_path}")


@main.command("gen-story")
@click.option("--pool", "pool_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--bodies", type=int, default=None, help="Body candidates to sample.")
@click.option("--endings", type=int, default=None, help="Ending candidates per body.")
@click.option("--ranker", type=click.Choice(["ppl", "nsp", "random"]), default="ppl")
@click.option("--seed", type=int, default=0)
@click.option("--count", type=int, default=1, help="Stories to generate.")
@click.option("--include-candidates", is_flag=True, help="Keep every scored pair in the output.")
@click.option("--bare", is_flag=True,
              help="No content plan: sample from the bare instruction instead.")
@click.pass_obj
def gen_story(config: PipelineConfig, pool_path: str, out_path: str,
              bodies: int | None, endings: int | None, ranker: str, seed: int,
              count: int, include_candidates: bool, bare: bool):
    """Sample a content plan and generate a ranked story (JSON per line)."""
    import random as _random

    gateway = config.build_gateway()
    registry = config.build_registry()
    stopwords = config.build_stopwords()
    documents = []
    if bare:
        params = config.params_for(
            PlotElementKind.STORY_BODY, num=1, max_len=config.story_token_limit
        )
        for index in range(count):
            text = generate_bare_story(
                gateway, config.bare_story_prompt, params, seed=seed + index
            )
            documents.append({"body": text, "bare": True})
    else:
        pool = ElementPool(pool_path)
        sampler = PlanSampler(pool, _random.Random(seed))
        body_params = config.params_for(PlotElementKind.STORY_BODY, num=bodies)
        ending_params = config.params_for(PlotElementKind.STORY_ENDING, num=endings)
        for index in range(count):
            result = generate_story(
                gateway, registry, sampler.sample(), body_params, ending_params,
                ranker_method=ranker, seed=seed + 131 * index, stopwords=stopwords,
                token_limit=config.story_token_limit,
            )
            documents.append(result.to_dict(include_candidates=include_candidates))
    with open(out_path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
    click.echo(f"wrote {len(documents)} story document(s) to {out_path}")


@main.command("eval-cloze")
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--method", required=True, type=click.Choice(["ppl", "nsp"]))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Write per-item judgments as JSON lines.")
@click.pass_obj
def eval_cloze(config: PipelineConfig, data_path: str, method: str, out_path: str | None):
    """Two-choice story-ending accuracy on a Story Cloze style file."""
    gateway = config.build_gateway()
    items = load_cloze_file(data_path)
    result = cloze_evaluate(gateway, items, method)
    click.echo(
        f"accuracy: {result.accuracy:.4f} "
        f"({result.evaluated} evaluated, {result.skipped} skipped, method={method})"
    )
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            for judgment in result.judgments:
                fh.write(json.dumps(judgment.__dict__, ensure_ascii=False) + "\n")
        click.echo(f"judgments written to {out_path}")


@main.command("metrics")
@click.option("--stories", "stories_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "ns", default="1,2", show_default=True,
              help="Comma-separated n-gram sizes.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def metrics_command(stories_path: str, ns: str, out_path: str | None):
    """Diversity report over line-delimited story records."""
    texts = []
    with open(stories_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if "text" in record:
                texts.append(record["text"])
            else:
                texts.append(" ".join(filter(None, [record.get("body"), record.get("ending")])))
    sizes = [int(part) for part in ns.split(",") if part.strip()]
    report = metrics_report(texts, sizes)
    payload = json.dumps(report, indent=2)
    click.echo(payload)
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")


def run() -> None:
    try:
        main(standalone_mode=True)
    except ScratchPlotError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    run()

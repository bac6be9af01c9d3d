"""Pipeline orchestration: batched offline element generation into a
persistent pool, dependency-ordered plan sampling, and generate-and-rank
story assembly."""

from __future__ import annotations

import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .decoding import DebiasGroup, GenerationParams, StopRule, sample_continuation
from .errors import (
    CapabilityError,
    ConfigurationError,
    DependencyError,
    GenerationAborted,
    GenerationExhaustedError,
    SamplingError,
    TransportError,
)
from .gateway import LMGateway
from .plan import DEBIASED_KINDS, PARENT_KIND, ContentPlan, PlotElement, PlotElementKind
from .postprocess import PostprocessContext, RuleMatrix, apply_rules
from .ranking import EndingScore, conditional_ppl, rank_pairs
from .templates import TaskDescription, TemplateRegistry, plan_bindings, render

logger = logging.getLogger(__name__)

POOLED_KINDS = (
    PlotElementKind.LOCATION,
    PlotElementKind.CAST_MALE,
    PlotElementKind.CAST_FEMALE,
    PlotElementKind.GENRE,
    PlotElementKind.THEME,
)

# Overall cap on body + ending token count for a selected story.
STORY_TOKEN_LIMIT = 150

_TASK_SEED_STRIDE = 10_000
_ENDING_SEED_STRIDE = 1_000


class ElementPool:
    """Append-only line-delimited JSON store of plot elements.

    Appends flush immediately, so an interrupted batch keeps everything
    generated so far and a re-run simply adds to it. Elements deduplicate
    on (kind, text, parents) via their content-derived ids.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._elements: list[PlotElement] = []
        self._ids: set[str] = set()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._add(PlotElement.from_json(line))

    def _add(self, element: PlotElement) -> bool:
        if element.id in self._ids:
            return False
        self._elements.append(element)
        self._ids.add(element.id)
        return True

    def append(self, element: PlotElement) -> bool:
        """Persist a new element; returns False for duplicates."""
        if not self._add(element):
            return False
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(element.to_json() + "\n")
        return True

    def __len__(self) -> int:
        return len(self._elements)

    def elements(self, kind: PlotElementKind) -> list[PlotElement]:
        return [e for e in self._elements if e.kind is kind]

    def children(self, parent_id: str, kind: PlotElementKind) -> list[PlotElement]:
        return [e for e in self._elements if e.kind is kind and parent_id in e.parent_ids]


def _parent_binding(desc: TaskDescription, parent: PlotElement | None) -> dict[str, str]:
    if parent is None:
        return {}
    return {placeholder: parent.text for placeholder in desc.binds}


def generate_element_pool(
    gateway: LMGateway,
    registry: TemplateRegistry,
    kind: PlotElementKind,
    params: GenerationParams,
    pool: ElementPool,
    seed: int = 0,
    stopwords: frozenset[str] | None = None,
    rule_matrix: RuleMatrix | None = None,
    debias_every_step: bool = True,
) -> int:
    """Sample ``params.num`` continuations per task description (times
    each parent element, for dependent kinds), post-process, and persist
    the survivors. Returns the number of new elements written."""
    if kind not in POOLED_KINDS:
        raise ValueError(f"{kind.value} is generated per story, not pooled")
    parent_kind = PARENT_KIND.get(kind)
    parents: list[PlotElement | None]
    if parent_kind is None:
        parents = [None]
    else:
        parents = list(pool.elements(parent_kind))
        if not parents:
            raise DependencyError(
                f"generating {kind.value} needs {parent_kind.value} elements in the pool"
            )

    stats: Counter = Counter()
    written = 0
    task_index = 0
    try:
        for desc in registry.descriptions_for(kind):
            companions = registry.debias_companions(desc) if kind in DEBIASED_KINDS else []
            for parent in parents:
                prompt = render(desc, _parent_binding(desc, parent))
                debias = None
                if companions:
                    debias = DebiasGroup.from_prompts(
                        gateway,
                        desc,
                        prompt,
                        [(d, render(d, _parent_binding(d, parent))) for d in companions],
                    )
                ctx = PostprocessContext(
                    task_desc=prompt, x1=parent.text if parent else ""
                )
                for candidate_index in range(params.num):
                    stats["generated"] += 1
                    try:
                        text = sample_continuation(
                            gateway,
                            prompt,
                            params,
                            StopRule.CLOSE_QUOTE,
                            debias=debias,
                            seed=seed + _TASK_SEED_STRIDE * task_index + candidate_index,
                            debias_every_step=debias_every_step,
                        )
                    except GenerationAborted:
                        stats["aborted"] += 1
                        continue
                    outcome = apply_rules(kind, text, ctx, rule_matrix, stopwords)
                    if not outcome.kept:
                        rule = outcome.failed_rule.value if outcome.failed_rule else "empty"
                        stats[f"filtered:{rule}"] += 1
                        continue
                    element = PlotElement.create(
                        kind,
                        outcome.text,
                        parent_ids=(parent.id,) if parent else (),
                        task_description_id=desc.id,
                        model_id=gateway.roles.generation,
                    )
                    if pool.append(element):
                        written += 1
                    else:
                        stats["duplicates"] += 1
                task_index += 1
    except TransportError:
        logger.error(
            "backend failed mid-batch for %s; %d element(s) already persisted to %s",
            kind.value, written, pool.path,
        )
        raise
    logger.info("%s: wrote %d element(s); %s", kind.value, written, dict(stats))
    return written


@dataclass
class PlanSampler:
    """Uniform dependency-ordered plan sampling.

    Within one sampler's lifetime (one batch run), elements already used
    are avoided while unused ones remain, so a batch of plans spreads
    over the pool. Across runs, sampling is independent.
    """

    pool: ElementPool
    rng: random.Random
    _used: set[str] = field(default_factory=set)

    def _pick(self, kind: PlotElementKind, options: Sequence[PlotElement]) -> PlotElement:
        if not options:
            raise SamplingError(kind.value, f"no {kind.value} available to sample")
        fresh = [e for e in options if e.id not in self._used]
        choice = self.rng.choice(fresh if fresh else list(options))
        self._used.add(choice.id)
        return choice

    def sample(self) -> ContentPlan:
        location = self._pick(
            PlotElementKind.LOCATION, self.pool.elements(PlotElementKind.LOCATION)
        )
        cast_male = self._pick(
            PlotElementKind.CAST_MALE,
            self.pool.children(location.id, PlotElementKind.CAST_MALE),
        )
        cast_female = self._pick(
            PlotElementKind.CAST_FEMALE,
            self.pool.children(location.id, PlotElementKind.CAST_FEMALE),
        )
        genre = self._pick(PlotElementKind.GENRE, self.pool.elements(PlotElementKind.GENRE))
        theme = self._pick(
            PlotElementKind.THEME, self.pool.children(genre.id, PlotElementKind.THEME)
        )
        return ContentPlan(
            location=location,
            cast_male=cast_male,
            cast_female=cast_female,
            genre=genre,
            theme=theme,
        )


def sample_content_plan(pool: ElementPool, seed: int = 0) -> ContentPlan:
    """One uniform plan: location, cast among its children, genre, theme
    among its children — the dependency order of generation."""
    return PlanSampler(pool, random.Random(seed)).sample()


@dataclass(frozen=True)
class StoryCandidate:
    """A (body, ending) pair with token counts and scores."""

    body: str
    ending: str
    body_token_count: int
    ending_token_count: int
    scores: EndingScore

    def to_dict(self) -> dict:
        return {
            "body": self.body,
            "ending": self.ending,
            "body_tokens": self.body_token_count,
            "ending_tokens": self.ending_token_count,
            "scores": {"ppl": self.scores.ppl, "nsp": self.scores.nsp},
        }


@dataclass(frozen=True)
class StoryResult:
    plan: ContentPlan
    selected: StoryCandidate
    candidates: tuple[StoryCandidate, ...]
    diagnostics: dict[str, int]

    def to_dict(self, include_candidates: bool = False) -> dict:
        doc = {
            "plan": self.plan.to_dict(),
            "body": self.selected.body,
            "ending": self.selected.ending,
            "scores": self.selected.to_dict()["scores"],
            "diagnostics": dict(self.diagnostics),
        }
        if include_candidates:
            doc["all_candidates"] = [c.to_dict() for c in self.candidates]
        return doc


def _x1_text(desc: TaskDescription, bindings: dict[str, str]) -> str:
    """The substituted placeholder text, excluded from prompt-overlap."""
    return " ".join(bindings[p] for p in sorted(desc.placeholders) if p in bindings)


def _score_candidate(
    gateway: LMGateway, body: str, ending: str, method: str
) -> EndingScore:
    ppl = nsp = None
    try:
        ppl = conditional_ppl(gateway, body, ending)
    except (CapabilityError, ConfigurationError):
        if method == "ppl":
            raise
    try:
        nsp = gateway.nsp_probability(body, ending)
    except (CapabilityError, ConfigurationError):
        if method == "nsp":
            raise
    return EndingScore(ppl=ppl, nsp=nsp)


def generate_story(
    gateway: LMGateway,
    registry: TemplateRegistry,
    plan: ContentPlan,
    body_params: GenerationParams,
    ending_params: GenerationParams,
    ranker_method: str = "ppl",
    seed: int = 0,
    stopwords: frozenset[str] | None = None,
    rule_matrix: RuleMatrix | None = None,
    token_limit: int = STORY_TOKEN_LIMIT,
) -> StoryResult:
    """Generate body candidates, then ending candidates per surviving
    body; score all pairs and select the best under ``ranker_method``.

    Pairs whose combined token count exceeds ``token_limit`` are
    rejected so the selected story respects the overall cap.
    """
    plan.require_complete()
    stats: Counter = Counter()

    body_desc = registry.descriptions_for(PlotElementKind.STORY_BODY)[0]
    story_prompt = registry.fuse_plan(plan)
    body_ctx = PostprocessContext(
        task_desc=story_prompt,
        x1=_x1_text(body_desc, plan_bindings(body_desc, plan)),
        plan=plan,
    )
    bodies: list[str] = []
    for index in range(body_params.num):
        stats["bodies_generated"] += 1
        try:
            text = sample_continuation(
                gateway, story_prompt, body_params, StopRule.FIXED_LENGTH,
                seed=seed + index,
            )
        except GenerationAborted:
            stats["bodies_aborted"] += 1
            continue
        outcome = apply_rules(PlotElementKind.STORY_BODY, text, body_ctx,
                              rule_matrix, stopwords)
        if not outcome.kept:
            rule = outcome.failed_rule.value if outcome.failed_rule else "empty"
            stats[f"bodies_filtered:{rule}"] += 1
            continue
        if outcome.text not in bodies:
            bodies.append(outcome.text)
        else:
            stats["bodies_duplicate"] += 1
    if not bodies:
        raise GenerationExhaustedError("no story body survived filtering", dict(stats))

    ending_desc = registry.descriptions_for(PlotElementKind.STORY_ENDING)[0]
    scoring_model = gateway.roles.scoring
    candidates: list[StoryCandidate] = []
    for body_index, body in enumerate(bodies):
        ending_prompt = registry.ending_prompt(plan, body)
        ending_ctx = PostprocessContext(
            task_desc=ending_prompt,
            x1=_x1_text(ending_desc, plan_bindings(ending_desc, plan, body=body)),
            plan=plan,
        )
        body_tokens = len(gateway.tokenize(body, model=scoring_model))
        seen: set[str] = set()
        for index in range(ending_params.num):
            stats["endings_generated"] += 1
            try:
                text = sample_continuation(
                    gateway, ending_prompt, ending_params, StopRule.CLOSE_QUOTE,
                    seed=seed + _ENDING_SEED_STRIDE * (body_index + 1) + index,
                )
            except GenerationAborted:
                stats["endings_aborted"] += 1
                continue
            outcome = apply_rules(PlotElementKind.STORY_ENDING, text, ending_ctx,
                                  rule_matrix, stopwords)
            if not outcome.kept:
                rule = outcome.failed_rule.value if outcome.failed_rule else "empty"
                stats[f"endings_filtered:{rule}"] += 1
                continue
            if outcome.text in seen:
                stats["endings_duplicate"] += 1
                continue
            seen.add(outcome.text)
            ending_tokens = len(gateway.tokenize(" " + outcome.text, model=scoring_model))
            if body_tokens + ending_tokens > token_limit:
                stats["pairs_over_token_limit"] += 1
                continue
            candidates.append(
                StoryCandidate(
                    body=body,
                    ending=outcome.text,
                    body_token_count=body_tokens,
                    ending_token_count=ending_tokens,
                    scores=_score_candidate(gateway, body, outcome.text, ranker_method),
                )
            )
    if not candidates:
        raise GenerationExhaustedError("no (body, ending) pair survived", dict(stats))

    ranked = rank_pairs(candidates, ranker_method, seed=seed)
    return StoryResult(
        plan=plan,
        selected=ranked[0],
        candidates=tuple(candidates),
        diagnostics=dict(stats),
    )


def generate_bare_story(
    gateway: LMGateway,
    prompt: str,
    params: GenerationParams,
    seed: int = 0,
) -> str:
    """A story from a bare instruction with no content plan (the
    comparison baseline): fixed-length sampling, sentence-truncated."""
    return sample_continuation(gateway, prompt, params, StopRule.FIXED_LENGTH, seed=seed)

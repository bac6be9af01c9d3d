"""Scoring and ranking of (story body, ending) pairs, and the two-choice
story-ending evaluation harness."""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .errors import ScratchPlotError, WindowExceededError
from .gateway import LMGateway

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndingScore:
    """Conditional perplexity (lower better) and NSP probability (higher
    better). A score a backend cannot produce stays None."""

    ppl: float | None = None
    nsp: float | None = None

    def __post_init__(self):
        if self.ppl is not None and self.ppl <= 0.0:
            raise ValueError(f"ppl must be positive, got {self.ppl}")
        if self.nsp is not None and not (0.0 <= self.nsp <= 1.0):
            raise ValueError(f"nsp must be in [0, 1], got {self.nsp}")


def _ppl_from_logprobs(logprobs: Sequence[float]) -> float:
    """Geometric-mean inverse probability of the scored tokens.

    Computed as prod(1/p_i)^(1/E), which reproduces hand-derived values
    bitwise on exact-probability fixtures; falls back to the equivalent
    exp(-mean log p) when the product leaves double range.
    """
    count = len(logprobs)
    mean_lp = math.fsum(logprobs) / count
    if math.isinf(mean_lp):
        return math.inf
    try:
        inverse_product = 1.0
        for lp in logprobs:
            inverse_product *= 1.0 / math.exp(lp)
        if math.isfinite(inverse_product) and inverse_product > 0.0:
            return inverse_product ** (1.0 / count)
    except OverflowError:
        pass
    return math.exp(-mean_lp)


def conditional_ppl(gateway: LMGateway, body: str, ending: str) -> float:
    """Perplexity of the ending tokens conditioned on the body.

    Body tokens condition the score but are never scored themselves. A
    single space joins body and ending in the scored sequence. When the
    pair overflows the scoring window, the body is truncated from the
    left (the ending stays intact) and the event is logged.
    """
    model = gateway.roles.scoring
    ending_tokens = gateway.tokenize(" " + ending, model=model)
    if not ending_tokens:
        raise ValueError("ending must tokenize to at least one token")
    body_tokens = gateway.tokenize(body, model=model)
    try:
        scored = gateway.score_continuation(body_tokens, ending_tokens, model=model)
    except WindowExceededError as exc:
        keep = exc.window - len(ending_tokens)
        if keep < 1:
            raise
        logger.warning(
            "scoring window of %d exceeded; body truncated from %d to %d tokens",
            exc.window, len(body_tokens), keep,
        )
        scored = gateway.score_continuation(body_tokens[-keep:], ending_tokens, model=model)
    return _ppl_from_logprobs(scored.logprobs)


def rank_pairs(pairs: list, method: str, seed: int = 0) -> list:
    """Order candidates best-first: ascending ppl, descending nsp, or a
    seeded shuffle. Ties keep insertion order (stable sort)."""
    if not pairs:
        raise ValueError("nothing to rank")
    if method == "ppl":
        return sorted(pairs, key=lambda c: _require(c.scores.ppl, "ppl"))
    if method == "nsp":
        return sorted(pairs, key=lambda c: -_require(c.scores.nsp, "nsp"))
    if method == "random":
        shuffled = list(pairs)
        random.Random(seed).shuffle(shuffled)
        return shuffled
    raise ValueError(f"unknown ranking method {method!r}")


def _require(value: float | None, name: str) -> float:
    if value is None:
        raise ValueError(f"candidate is missing its {name} score")
    return value


@dataclass(frozen=True)
class ClozeItem:
    """A four-sentence context with two candidate endings."""

    context: str
    ending_a: str
    ending_b: str
    label: str  # "a" | "b"
    item_id: str = ""

    def __post_init__(self):
        if self.label not in ("a", "b"):
            raise ValueError(f"label must be 'a' or 'b', got {self.label!r}")
        if not (self.context and self.ending_a and self.ending_b):
            raise ValueError("context and both endings must be non-empty")


@dataclass(frozen=True)
class ClozeJudgment:
    item_id: str
    score_a: float
    score_b: float
    predicted: str
    correct: bool


@dataclass(frozen=True)
class ClozeResult:
    accuracy: float
    judgments: tuple[ClozeJudgment, ...]
    skipped: int

    @property
    def evaluated(self) -> int:
        return len(self.judgments)


def cloze_evaluate(
    gateway: LMGateway, items: Sequence[ClozeItem], method: str
) -> ClozeResult:
    """Accuracy of picking the right ending by conditional perplexity
    (lower wins) or NSP probability (higher wins). Ties resolve to the
    first ending. Items whose scoring fails are skipped and counted."""
    if not items:
        raise ValueError("no items to evaluate")
    if method == "ppl":
        score: Callable[[ClozeItem, str], float] = (
            lambda item, ending: conditional_ppl(gateway, item.context, ending)
        )
        better_b = lambda a, b: b < a  # noqa: E731
    elif method == "nsp":
        score = lambda item, ending: gateway.nsp_probability(item.context, ending)  # noqa: E731
        better_b = lambda a, b: b > a  # noqa: E731
    else:
        raise ValueError(f"unknown cloze method {method!r}")

    judgments: list[ClozeJudgment] = []
    skipped = 0
    for index, item in enumerate(items):
        item_id = item.item_id or str(index)
        try:
            score_a = score(item, item.ending_a)
            score_b = score(item, item.ending_b)
        except ScratchPlotError as exc:
            skipped += 1
            logger.warning("skipping item %s: %s", item_id, exc)
            continue
        predicted = "b" if better_b(score_a, score_b) else "a"
        judgments.append(
            ClozeJudgment(item_id, score_a, score_b, predicted, predicted == item.label)
        )
    if not judgments:
        raise ScratchPlotError(f"all {skipped} items failed to score")
    accuracy = sum(j.correct for j in judgments) / len(judgments)
    return ClozeResult(accuracy, tuple(judgments), skipped)


# Column layout of the public Story Cloze release.
_CLOZE_COLUMNS = {
    "context": ["InputSentence1", "InputSentence2", "InputSentence3", "InputSentence4"],
    "ending_a": "RandomFifthSentenceQuiz1",
    "ending_b": "RandomFifthSentenceQuiz2",
    "label": "AnswerRightEnding",
    "item_id": "InputStoryid",
}


def load_cloze_file(path: str | Path) -> list[ClozeItem]:
    """Load a delimited Story Cloze file (comma or tab separated, public
    release column names). Context sentences join with single spaces."""
    with open(path, encoding="utf-8", newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        delimiter = "\t" if "\t" in sample.splitlines()[0] else ","
        reader = csv.DictReader(fh, delimiter=delimiter)
        items = []
        for row in reader:
            try:
                context = " ".join(row[c].strip() for c in _CLOZE_COLUMNS["context"])
                items.append(
                    ClozeItem(
                        context=context,
                        ending_a=row[_CLOZE_COLUMNS["ending_a"]].strip(),
                        ending_b=row[_CLOZE_COLUMNS["ending_b"]].strip(),
                        label="a" if row[_CLOZE_COLUMNS["label"]].strip() == "1" else "b",
                        item_id=row.get(_CLOZE_COLUMNS["item_id"], "").strip(),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise ValueError(f"{path}: row {reader.line_num} is malformed: {exc}")
    if not items:
        raise ValueError(f"{path}: no data rows found")
    return items

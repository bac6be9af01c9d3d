"""Cleaning and filtering of generated continuations.

Each element kind gets a fixed set of rules (the defaults mirror the
per-kind applicability matrix): strip trailing punctuation, drop
continuations that echo the prompt, drop first/second-person pronouns,
and require story bodies to mention enough plot elements.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
import re

from .errors import ConfigurationError
from .plan import ContentPlan, PlotElementKind
from .textutil import word_tokens


class Rule(Enum):
    STRIP_TRAILING_PUNCT = "strip_trailing_punct"
    FILTER_PROMPT_REPEAT = "filter_prompt_repeat"
    FILTER_PERSON_PRONOUNS = "filter_person_pronouns"
    FILTER_BY_PLOT_ELEMENTS = "filter_by_plot_elements"


RuleMatrix = dict[PlotElementKind, frozenset[Rule]]

_CLEAN = frozenset({Rule.STRIP_TRAILING_PUNCT, Rule.FILTER_PROMPT_REPEAT})
_PROSE = frozenset({Rule.FILTER_PROMPT_REPEAT, Rule.FILTER_PERSON_PRONOUNS})


def default_rule_matrix() -> RuleMatrix:
    return {
        PlotElementKind.LOCATION: _CLEAN,
        PlotElementKind.CAST_MALE: _CLEAN,
        PlotElementKind.CAST_FEMALE: _CLEAN,
        PlotElementKind.GENRE: _CLEAN,
        PlotElementKind.THEME: _PROSE,
        PlotElementKind.STORY_BODY: _PROSE | {Rule.FILTER_BY_PLOT_ELEMENTS},
        PlotElementKind.STORY_ENDING: _PROSE,
    }


FIRST_SECOND_PERSON_PRONOUNS = frozenset(
    "i me my mine myself we us our ours ourselves "
    "you your yours yourself yourselves".split()
)


@lru_cache(maxsize=None)
def _packaged_stopwords() -> frozenset[str]:
    text = resources.files("scratchplot.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stopword set; the packaged list unless an override file is given."""
    if path is None:
        return _packaged_stopwords()
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


def strip_trailing_punct(text: str) -> str:
    """Recursively drop trailing non-letter characters."""
    while text and not text[-1].isalpha():
        text = text[:-1]
    return text


def violates_prompt_repeat(
    candidate: str,
    task_desc: str,
    x1: str = "",
    stopwords: frozenset[str] | None = None,
) -> bool:
    """True when the candidate shares a content word with the prompt.

    Stop words and the words of the substituted placeholder text are not
    counted as prompt content.
    """
    stopwords = stopwords if stopwords is not None else _packaged_stopwords()
    prompt_words = set(word_tokens(task_desc)) - stopwords - set(word_tokens(x1))
    return bool(prompt_words & set(word_tokens(candidate)))


def violates_person_pronouns(text: str) -> bool:
    """True when any token is a first or second-person pronoun.

    Contractions split at the apostrophe, so "I'll" and "you're" count.
    """
    return any(w in FIRST_SECOND_PERSON_PRONOUNS for w in word_tokens(text))


def _mentions(needle: str, haystack: str) -> bool:
    return re.search(rf"\b{re.escape(needle)}\b", haystack, re.IGNORECASE) is not None


def violates_missing_plot_elements(body: str, plan: ContentPlan) -> bool:
    """True when the body mentions fewer than two of: the male first
    name, the female first name, the location (full phrase, on word
    boundaries)."""
    plan.require_complete()
    probes = [plan.cast_male.first_name, plan.cast_female.first_name, plan.location.text]
    hits = sum(1 for probe in probes if probe and _mentions(probe, body))
    return hits < 2


@dataclass(frozen=True)
class PostprocessContext:
    """Inputs the filters need: the rendered prompt, the substituted
    placeholder text, and (for bodies) the content plan."""

    task_desc: str = ""
    x1: str = ""
    plan: ContentPlan | None = None


@dataclass(frozen=True)
class PostprocessOutcome:
    text: str | None
    failed_rule: Rule | None = None

    @property
    def kept(self) -> bool:
        return self.text is not None


def apply_rules(
    kind: PlotElementKind,
    text: str,
    ctx: PostprocessContext,
    matrix: RuleMatrix | None = None,
    stopwords: frozenset[str] | None = None,
) -> PostprocessOutcome:
    """Run the kind's rules in order strip -> prompt-repeat -> pronouns ->
    plot-elements; reports which filter fired, if any."""
    rules = (matrix or default_rule_matrix())[kind]
    text = text.strip()
    if Rule.STRIP_TRAILING_PUNCT in rules:
        stripped = strip_trailing_punct(text)
        if not stripped:
            # an all-punctuation element is unusable
            return PostprocessOutcome(None, Rule.STRIP_TRAILING_PUNCT)
        text = stripped
    if not text:
        return PostprocessOutcome(None)
    if Rule.FILTER_PROMPT_REPEAT in rules:
        if not ctx.task_desc:
            raise ConfigurationError(
                f"prompt-repeat filter for {kind.value} needs ctx.task_desc"
            )
        if violates_prompt_repeat(text, ctx.task_desc, ctx.x1, stopwords):
            return PostprocessOutcome(None, Rule.FILTER_PROMPT_REPEAT)
    if Rule.FILTER_PERSON_PRONOUNS in rules and violates_person_pronouns(text):
        return PostprocessOutcome(None, Rule.FILTER_PERSON_PRONOUNS)
    if Rule.FILTER_BY_PLOT_ELEMENTS in rules:
        if ctx.plan is None:
            raise ConfigurationError(
                f"plot-element filter for {kind.value} needs ctx.plan"
            )
        if violates_missing_plot_elements(text, ctx.plan):
            return PostprocessOutcome(None, Rule.FILTER_BY_PLOT_ELEMENTS)
    return PostprocessOutcome(text)


def postprocess(
    kind: PlotElementKind,
    text: str,
    ctx: PostprocessContext,
    matrix: RuleMatrix | None = None,
    stopwords: frozenset[str] | None = None,
) -> str | None:
    """Cleaned text, or None if any filter fires."""
    return apply_rules(kind, text, ctx, matrix, stopwords).text

"""Uniform interface to language-model capabilities.

A :class:`LMGateway` wraps a backend (scripted or HTTP) and exposes
next-token distributions, continuation scoring, NSP probability and
tokenization. Model ids are assigned per role: generation, scoring
(perplexity) and NSP, because the three jobs may be served by different
checkpoints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .errors import CapabilityError, WindowExceededError

logger = logging.getLogger(__name__)

_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TokenDistribution:
    """Next-token probability map.

    ``complete`` distributions sum to 1 (within 1e-6); ``partial`` ones
    (candidate-restricted or top-N truncated queries) may sum to less.
    """

    entries: dict[str, float]
    complete: bool = True

    def __post_init__(self):
        total = math.fsum(self.entries.values())
        for token, prob in self.entries.items():
            if prob < 0.0:
                raise ValueError(f"negative probability {prob} for token {token!r}")
        if self.complete and abs(total - 1.0) > _SUM_TOLERANCE:
            raise ValueError(f"complete distribution sums to {total}, expected 1")
        if not self.complete and total > 1.0 + _SUM_TOLERANCE:
            raise ValueError(f"partial distribution sums to {total} > 1")

    def __getitem__(self, token: str) -> float:
        return self.entries[token]

    def get(self, token: str, default: float = 0.0) -> float:
        return self.entries.get(token, default)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def renormalized(self) -> "TokenDistribution":
        """Scale entries to sum to 1 and mark the result complete."""
        total = math.fsum(self.entries.values())
        if total <= 0.0:
            raise ValueError("cannot renormalize a zero-mass distribution")
        return TokenDistribution(
            {t: p / total for t, p in self.entries.items()}, complete=True
        )


@dataclass(frozen=True)
class ScoredContinuation:
    """Per-token natural-log probabilities of a continuation."""

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("tokens and logprobs must have equal length")
        for lp in self.logprobs:
            if lp > 0.0:
                raise ValueError(f"log-probability {lp} > 0")


class LMBackend(Protocol):
    """What a backend must provide. All calls are stateless and pure with
    respect to the backend's configuration."""

    def next_token_distribution(
        self,
        model: str,
        context: Sequence[str],
        candidates: set[str] | None = None,
        top_n: int | None = None,
    ) -> TokenDistribution: ...

    def score_continuation(
        self, model: str, prefix: Sequence[str], continuation: Sequence[str]
    ) -> ScoredContinuation: ...

    def nsp_probability(self, model: str, first: str, second: str) -> float: ...

    def tokenize(self, model: str, text: str) -> list[str]: ...

    def detokenize(self, model: str, tokens: Sequence[str]) -> str: ...


@dataclass(frozen=True)
class ModelRoles:
    """Model ids used for each job."""

    generation: str = "gpt2-xl"
    scoring: str = "gpt2"
    nsp: str = "bert-base-uncased"


@dataclass
class LMGateway:
    """Thin, stateless facade over a backend.

    Safe to share across concurrent callers: no state is mutated between
    calls, and the scripted backend is read-only after construction.
    """

    backend: LMBackend
    roles: ModelRoles = field(default_factory=ModelRoles)

    def next_token_distribution(
        self,
        context: Sequence[str],
        candidates: set[str] | None = None,
        top_n: int | None = None,
        model: str | None = None,
    ) -> TokenDistribution:
        if not context:
            raise ValueError("context must be non-empty")
        return self.backend.next_token_distribution(
            model or self.roles.generation, context, candidates=candidates, top_n=top_n
        )

    def score_continuation(
        self,
        prefix: Sequence[str],
        continuation: Sequence[str],
        model: str | None = None,
    ) -> ScoredContinuation:
        if not continuation:
            raise ValueError("continuation must be non-empty")
        return self.backend.score_continuation(
            model or self.roles.scoring, prefix, continuation
        )

    def nsp_probability(self, first: str, second: str, model: str | None = None) -> float:
        """NSP probability of ``second`` following ``first``.

        When the pair exceeds the encoder window, ``first`` is truncated
        from its left edge until the pair fits; the ending stays intact.
        """
        if not first or not second:
            raise ValueError("both texts must be non-empty")
        model = model or self.roles.nsp
        try:
            return self.backend.nsp_probability(model, first, second)
        except WindowExceededError as exc:
            first_tokens = self.backend.tokenize(model, first)
            second_len = len(self.backend.tokenize(model, second))
            keep = exc.window - second_len
            if keep < 1:
                raise CapabilityError(
                    f"second text alone exceeds the {exc.window}-token NSP window"
                ) from exc
            truncated = self.backend.detokenize(model, first_tokens[-keep:])
            logger.warning(
                "NSP pair exceeded window of %d; truncated first text from %d to %d tokens",
                exc.window, len(first_tokens), keep,
            )
            return self.backend.nsp_probability(model, truncated, second)

    def tokenize(self, text: str, model: str | None = None) -> list[str]:
        return self.backend.tokenize(model or self.roles.generation, text)

    def detokenize(self, tokens: Sequence[str], model: str | None = None) -> str:
        return self.backend.detokenize(model or self.roles.generation, tokens)

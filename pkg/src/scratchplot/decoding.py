"""Token-by-token sampling with top-k truncation, repeat-n-gram blocking,
contrastive (self-debiased) scoring across sibling task descriptions, and
the two stop rules (closing quote / fixed length + sentence truncation).
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import GenerationAborted
from .gateway import LMGateway, TokenDistribution
from .templates import TaskDescription

logger = logging.getLogger(__name__)

# Characters that close the quote a prompt opened.
CLOSE_QUOTE_CHARS = ('"', "”")

_SENTENCE_END_RE = re.compile(r"[.!?][\"”]?")

# Candidate pool size per description when debiasing: the union of each
# description's top-N tokens is re-queried for exact probabilities.
DEBIAS_POOL_TOP_N = 50


@dataclass(frozen=True)
class GenerationParams:
    """Sampling hyperparameters for one element kind."""

    num: int
    min_len: int
    max_len: int
    top_k: int = 30
    block_ngram: int = 3  # 0 disables blocking

    def __post_init__(self):
        if self.num < 1:
            raise ValueError("num must be >= 1")
        if not (1 <= self.min_len <= self.max_len):
            raise ValueError("need 1 <= min_len <= max_len")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.block_ngram != 0 and self.block_ngram < 2:
            raise ValueError("block_ngram must be >= 2, or 0 to disable")


class StopRule(Enum):
    # Terminate at the first generated closing quotation mark (suppressed
    # until min_len tokens have been emitted).
    CLOSE_QUOTE = "close_quote"
    # Generate max_len tokens, then truncate to the last complete sentence.
    FIXED_LENGTH = "fixed_length"


def is_close_quote(token: str) -> bool:
    return any(ch in token for ch in CLOSE_QUOTE_CHARS)


@dataclass
class DebiasGroup:
    """Parallel contexts for one target description and its siblings.

    ``contexts`` holds one token sequence per description, target first;
    all of them grow by the same sampled token each step — only the
    conditioning differs.
    """

    target: TaskDescription
    others: list[TaskDescription]
    contexts: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.others:
            raise ValueError("a debias group needs at least two descriptions")
        if self.contexts and len(self.contexts) != 1 + len(self.others):
            raise ValueError("need one context per description (target first)")

    @classmethod
    def from_prompts(
        cls,
        gateway: LMGateway,
        target: TaskDescription,
        target_prompt: str,
        others: list[tuple[TaskDescription, str]],
    ) -> "DebiasGroup":
        contexts = [gateway.tokenize(target_prompt)]
        contexts += [gateway.tokenize(prompt) for _, prompt in others]
        return cls(target=target, others=[d for d, _ in others], contexts=contexts)


def apply_top_k(dist: TokenDistribution, k: int) -> TokenDistribution:
    """Keep the k most probable tokens and renormalize.

    Boundary ties break lexicographically by token string so results are
    platform-independent.
    """
    if not dist.entries:
        raise ValueError("cannot take top-k of an empty distribution")
    if not dist.complete:
        raise ValueError("top-k expects a complete distribution")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= len(dist.entries):
        return dist
    kept = sorted(dist.entries.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return TokenDistribution(dict(kept), complete=False).renormalized()


def repeated_ngram_bans(context: Sequence[str], tokens: Sequence[str], n: int) -> set[str]:
    """Tokens among ``tokens`` that would complete an n-gram already in context."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if len(context) < n - 1:
        return set()
    seen = {tuple(context[i : i + n]) for i in range(len(context) - n + 1)}
    tail = tuple(context[len(context) - (n - 1):])
    return {t for t in tokens if tail + (t,) in seen}


def block_repeat_ngrams(
    context: Sequence[str], dist: TokenDistribution, n: int
) -> TokenDistribution:
    """Zero out tokens that would repeat an n-gram of the context.

    If every token with mass would be banned, the distribution is
    returned unchanged (liveness over strictness, logged for audit).
    """
    banned = repeated_ngram_bans(context, list(dist.entries), n)
    if not banned:
        return dist
    remaining = {t: p for t, p in dist.entries.items() if t not in banned}
    if sum(remaining.values()) <= 0.0:
        logger.warning(
            "n-gram blocking would remove all probability mass; keeping the "
            "unblocked distribution (context length %d)", len(context),
        )
        return dist
    return TokenDistribution(remaining, complete=False).renormalized()


def self_debias_step(
    group: DebiasGroup,
    candidates: Sequence[str],
    probs: Sequence[TokenDistribution],
) -> dict[str, float]:
    """Contrastive score per candidate: the probability under the target
    description minus the maximum probability under any sibling."""
    if len(probs) != 1 + len(group.others):
        raise ValueError("need one distribution per description (target first)")
    deltas: dict[str, float] = {}
    for token in candidates:
        for i, dist in enumerate(probs):
            if token not in dist.entries:
                raise ValueError(
                    f"candidate {token!r} missing from description {i}'s distribution"
                )
        target_p = probs[0][token]
        deltas[token] = target_p - max(dist[token] for dist in probs[1:])
    return deltas


def truncate_to_last_sentence(text: str) -> str:
    """Cut after the last sentence-final mark (., ! or ?, optionally
    followed by a closing quote). Unterminated text is returned as-is."""
    last = None
    for match in _SENTENCE_END_RE.finditer(text):
        last = match
    if last is None:
        logger.warning("no complete sentence found; returning text unchanged")
        return text
    return text[: last.end()]


def _sample_token(rng: random.Random, weights: dict[str, float]) -> str:
    # Fixed lexicographic order keeps the RNG stream platform-stable.
    items = sorted(weights.items())
    tokens = [t for t, _ in items]
    return rng.choices(tokens, weights=[w for _, w in items], k=1)[0]


def _top_k_by_score(scores: dict[str, float], k: int) -> dict[str, float]:
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return dict(ordered[:k])


def _raw_step_weights(
    gateway: LMGateway, context: Sequence[str], params: GenerationParams
) -> dict[str, float]:
    dist = gateway.next_token_distribution(context)
    if not dist.complete:
        dist = dist.renormalized()
    return dict(apply_top_k(dist, params.top_k).entries)


def _debias_step_weights(
    gateway: LMGateway,
    contexts: list[list[str]],
    group: DebiasGroup,
    params: GenerationParams,
    pool_top_n: int,
) -> dict[str, float] | None:
    """Eq.-style contrastive weights, or None when every score is <= 0
    (callers then fall back to plain target-context sampling)."""
    supports: set[str] = set()
    for ctx in contexts:
        supports.update(gateway.next_token_distribution(ctx, top_n=pool_top_n).entries)
    candidates = sorted(supports)
    probs = [
        gateway.next_token_distribution(ctx, candidates=set(candidates))
        for ctx in contexts
    ]
    deltas = self_debias_step(group, candidates, probs)
    kept = _top_k_by_score(deltas, params.top_k)
    weights = {t: d for t, d in kept.items() if d > 0.0}
    return weights or None


def sample_continuation(
    gateway: LMGateway,
    prompt: str,
    params: GenerationParams,
    stop: StopRule,
    debias: DebiasGroup | None = None,
    seed: int = 0,
    debias_every_step: bool = True,
    pool_top_n: int = DEBIAS_POOL_TOP_N,
) -> str:
    """Sample one continuation of ``prompt``.

    Per step: fetch distribution(s); contrastive scoring when a debias
    group is given; top-k; n-gram blocking; stop-token suppression below
    min_len; sample. Deterministic for a fixed seed and backend.

    Raises :class:`GenerationAborted` when filtering leaves no valid
    token — callers sampling many candidates drop this one.
    """
    prompt_tokens = gateway.tokenize(prompt)
    if not prompt_tokens:
        raise ValueError("prompt must render to a non-empty token sequence")
    rng = random.Random(seed)
    generated: list[str] = []
    contexts = [list(prompt_tokens)]
    if debias is not None:
        contexts = [list(ctx) for ctx in debias.contexts]

    while len(generated) < params.max_len:
        weights: dict[str, float] | None = None
        if debias is not None and (debias_every_step or not generated):
            weights = _debias_step_weights(gateway, contexts, debias, params, pool_top_n)
        if weights is None:
            weights = _raw_step_weights(gateway, contexts[0], params)

        if params.block_ngram:
            banned = repeated_ngram_bans(generated, list(weights), params.block_ngram)
            unbanned = {t: w for t, w in weights.items() if t not in banned}
            if banned and sum(unbanned.values()) > 0.0:
                weights = unbanned
            elif banned:
                logger.warning("all candidates banned by n-gram blocking; keeping them")

        if stop is StopRule.CLOSE_QUOTE and len(generated) < params.min_len:
            weights = {t: w for t, w in weights.items() if not is_close_quote(t)}

        weights = {t: w for t, w in weights.items() if w > 0.0}
        if not weights:
            raise GenerationAborted(
                f"no valid token at step {len(generated)} after filtering"
            )

        token = _sample_token(rng, weights)
        if stop is StopRule.CLOSE_QUOTE and is_close_quote(token):
            break
        generated.append(token)
        for ctx in contexts:
            ctx.append(token)

    text = gateway.detokenize(generated)
    if stop is StopRule.FIXED_LENGTH:
        text = truncate_to_last_sentence(text)
    return text

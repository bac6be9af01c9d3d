"""Diversity and repetition metrics: per-story distinct-n and corpus
self-BLEU (each story scored against all others as references)."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from .textutil import word_tokens

Tokens = Sequence[str]


def ngrams(tokens: Tokens, n: int) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(story: Tokens, n: int) -> float:
    """Unique n-grams over total n-grams within one story."""
    grams = ngrams(story, n)
    if not grams:
        raise ValueError(f"story of {len(story)} tokens has no {n}-grams")
    return len(set(grams)) / len(grams)


def corpus_distinct_n(stories: Sequence[Tokens], n: int) -> tuple[float, int]:
    """Mean distinct-n over stories long enough to have n-grams; returns
    (mean, number of stories excluded)."""
    values = [distinct_n(s, n) for s in stories if len(s) >= n]
    skipped = len(stories) - len(values)
    if not values:
        raise ValueError(f"no story has {n}-grams")
    return math.fsum(values) / len(values), skipped


def bleu(
    hypothesis: Tokens,
    references: Sequence[Tokens],
    max_n: int,
    smooth: bool = False,
) -> float:
    """BLEU with uniform weights up to max_n and the standard brevity
    penalty. Unsmoothed by default: any zero n-gram overlap gives 0.
    Optional add-one smoothing on the precision fractions."""
    if not references:
        raise ValueError("need at least one reference")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not hypothesis:
        return 0.0

    log_precisions = []
    for n in range(1, max_n + 1):
        hyp_counts = Counter(ngrams(hypothesis, n))
        total = sum(hyp_counts.values())
        max_ref_counts: Counter = Counter()
        for ref in references:
            for gram, count in Counter(ngrams(ref, n)).items():
                if count > max_ref_counts[gram]:
                    max_ref_counts[gram] = count
        clipped = sum(min(c, max_ref_counts[g]) for g, c in hyp_counts.items())
        if smooth:
            precision = (clipped + 1) / (total + 1)
        elif total == 0 or clipped == 0:
            return 0.0
        else:
            precision = clipped / total
        log_precisions.append(math.log(precision))

    geo_mean = math.exp(math.fsum(log_precisions) / max_n)
    hyp_len = len(hypothesis)
    # closest reference length; ties resolve to the shorter reference
    ref_len = min((len(r) for r in references), key=lambda r: (abs(r - hyp_len), r))
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * geo_mean


def self_bleu(corpus: Sequence[Tokens], max_n: int, smooth: bool = False) -> float:
    """Mean BLEU of each story against all the others. Lower means the
    corpus is more diverse."""
    if len(corpus) < 2:
        raise ValueError("self-BLEU needs at least two stories")
    for story in corpus:
        if not story:
            raise ValueError("every story must be non-empty")
    scores = [
        bleu(story, [r for j, r in enumerate(corpus) if j != i], max_n, smooth)
        for i, story in enumerate(corpus)
    ]
    return math.fsum(scores) / len(scores)


def tokenize_corpus(texts: Sequence[str]) -> list[list[str]]:
    return [word_tokens(t) for t in texts]


def metrics_report(texts: Sequence[str], ns: Sequence[int]) -> dict:
    """The CLI report: self-BLEU and mean distinct-n per requested n.

    ``skipped`` sums, over the requested n values, the stories too short
    for that n (such stories are excluded from that distinct-n mean).
    """
    corpus = tokenize_corpus(texts)
    report: dict = {"self_bleu": {}, "distinct": {}, "skipped": 0}
    for n in ns:
        report["self_bleu"][n] = self_bleu(corpus, n)
        mean, skipped = corpus_distinct_n(corpus, n)
        report["distinct"][n] = mean
        report["skipped"] += skipped
    return report

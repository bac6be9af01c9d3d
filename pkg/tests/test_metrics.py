from __future__ import annotations

import math
import random

import pytest

from scratchplot.metrics import (
    bleu,
    corpus_distinct_n,
    distinct_n,
    metrics_report,
    ngrams,
    self_bleu,
)


def bf_distinct(tokens, n):
    """Brute-force oracle: enumerate every n-gram position."""
    grams = []
    for i in range(len(tokens)):
        if i + n <= len(tokens):
            grams.append(tuple(tokens[i + k] for k in range(n)))
    unique = []
    for g in grams:
        if g not in unique:
            unique.append(g)
    return len(unique) / len(grams)


def bf_bleu(hyp, refs, max_n):
    """Brute-force BLEU oracle: positional counting, no Counter reuse."""
    if not hyp:
        return 0.0
    precisions = []
    for n in range(1, max_n + 1):
        hyp_grams = [tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1)]
        if not hyp_grams:
            return 0.0
        clipped = 0
        for gram in set(hyp_grams):
            hyp_count = sum(1 for g in hyp_grams if g == gram)
            best_ref = 0
            for ref in refs:
                ref_grams = [tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)]
                best_ref = max(best_ref, sum(1 for g in ref_grams if g == gram))
            clipped += min(hyp_count, best_ref)
        if clipped == 0:
            return 0.0
        precisions.append(clipped / len(hyp_grams))
    geo = math.exp(sum(math.log(p) for p in precisions) / max_n)
    closest = None
    for ref in refs:
        if closest is None:
            closest = len(ref)
        else:
            current = (abs(len(ref) - len(hyp)), len(ref))
            if current < (abs(closest - len(hyp)), closest):
                closest = len(ref)
    bp = 1.0 if len(hyp) > closest else math.exp(1.0 - closest / len(hyp))
    return bp * geo


def bf_self_bleu(corpus, max_n):
    scores = [
        bf_bleu(story, corpus[:i] + corpus[i + 1 :], max_n)
        for i, story in enumerate(corpus)
    ]
    return sum(scores) / len(scores)


class TestDistinctN:
    def test_repeated_unigram(self):
        assert distinct_n(["the", "cat", "the", "dog"], 1) == 0.75

    def test_all_distinct_is_one(self):
        assert distinct_n(["a", "b", "c"], 1) == 1.0
        assert distinct_n(["a", "b", "c"], 2) == 1.0

    def test_repeated_bigrams(self):
        assert distinct_n(["a", "a", "a"], 2) == 0.5

    def test_too_short_story_rejected(self):
        with pytest.raises(ValueError):
            distinct_n(["a"], 2)

    def test_in_unit_interval_and_one_iff_unique(self):
        rng = random.Random(3)
        for _ in range(50):
            story = [rng.choice("abcd") for _ in range(rng.randint(2, 12))]
            for n in (1, 2):
                value = distinct_n(story, n)
                assert 0.0 < value <= 1.0
                grams = ngrams(story, n)
                assert (value == 1.0) == (len(set(grams)) == len(grams))

    def test_matches_brute_force(self):
        rng = random.Random(9)
        for _ in range(40):
            story = [rng.choice("abcde") for _ in range(rng.randint(3, 15))]
            for n in (1, 2, 3):
                assert abs(distinct_n(story, n) - bf_distinct(story, n)) < 1e-9

    def test_corpus_mean_and_skips(self):
        stories = [["a", "b", "c"], ["x"], ["a", "a", "a"]]
        mean, skipped = corpus_distinct_n(stories, 2)
        assert skipped == 1
        assert mean == pytest.approx((1.0 + 0.5) / 2)


class TestBleu:
    def test_identical_is_one(self):
        story = ["the", "cat", "sat"]
        for n in (1, 2, 3):
            assert bleu(story, [story], n) == pytest.approx(1.0)

    def test_disjoint_is_zero(self):
        assert bleu(["a", "b"], [["x", "y"]], 1) == 0.0

    def test_smoothing_avoids_zero(self):
        assert bleu(["a", "b"], [["x", "y"]], 1, smooth=True) > 0.0

    def test_brevity_penalty(self):
        # hypothesis shorter than its reference is penalized
        short = bleu(["the", "cat"], [["the", "cat", "sat", "down"]], 1)
        assert short == pytest.approx(math.exp(1 - 4 / 2) * 1.0)

    def test_matches_brute_force_on_random_corpora(self):
        rng = random.Random(21)
        for _ in range(30):
            hyp = [rng.choice("abcd") for _ in range(rng.randint(2, 10))]
            refs = [
                [rng.choice("abcd") for _ in range(rng.randint(2, 10))]
                for _ in range(rng.randint(1, 3))
            ]
            for n in (1, 2):
                assert abs(bleu(hyp, refs, n) - bf_bleu(hyp, refs, n)) < 1e-9


class TestSelfBleu:
    def test_two_identical_stories(self):
        story = ["the", "cat", "sat"]
        for n in (1, 2):
            assert self_bleu([story, list(story)], n) == pytest.approx(1.0)

    def test_disjoint_vocabularies_are_zero_at_unigram(self):
        assert self_bleu([["a", "b"], ["x", "y"]], 1) == 0.0

    def test_frozen_mini_corpus(self):
        corpus = [["the", "cat", "sat"], ["the", "cat", "ran"]]
        assert abs(self_bleu(corpus, 1) - 2.0 / 3.0) < 1e-9
        assert abs(self_bleu(corpus, 2) - math.sqrt(1.0 / 3.0)) < 1e-9

    def test_single_story_rejected(self):
        with pytest.raises(ValueError):
            self_bleu([["a"]], 1)

    def test_permutation_invariant(self):
        rng = random.Random(2)
        corpus = [
            [rng.choice("abcdef") for _ in range(rng.randint(3, 9))] for _ in range(6)
        ]
        baseline = self_bleu(corpus, 2)
        for _ in range(20):
            shuffled = list(corpus)
            rng.shuffle(shuffled)
            assert self_bleu(shuffled, 2) == baseline

    def test_duplicating_corpus_never_decreases(self):
        rng = random.Random(7)
        for _ in range(10):
            corpus = [
                [rng.choice("abcd") for _ in range(rng.randint(2, 8))]
                for _ in range(rng.randint(2, 5))
            ]
            doubled = corpus + [list(s) for s in corpus]
            assert self_bleu(doubled, 2) >= self_bleu(corpus, 2) - 1e-12

    def test_matches_brute_force(self):
        rng = random.Random(13)
        for _ in range(10):
            corpus = [
                [rng.choice("abcde") for _ in range(rng.randint(2, 9))]
                for _ in range(rng.randint(2, 5))
            ]
            for n in (1, 2):
                assert abs(self_bleu(corpus, n) - bf_self_bleu(corpus, n)) < 1e-9


class TestReport:
    def test_report_shape(self):
        texts = ["The cat sat down.", "A dog ran far away.", "Bright birds sing."]
        report = metrics_report(texts, [1, 2])
        assert set(report) == {"self_bleu", "distinct", "skipped"}
        assert set(report["self_bleu"]) == {1, 2}
        assert set(report["distinct"]) == {1, 2}
        assert report["skipped"] == 0

    def test_short_stories_counted_as_skipped(self):
        report = metrics_report(["one", "two words here", "and four more words"], [2])
        assert report["skipped"] == 1

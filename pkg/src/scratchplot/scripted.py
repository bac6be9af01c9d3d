"""Deterministic scripted backend used for tests and offline runs.

A scripted model is a table of next-token rules plus a fallback
distribution and an optional NSP table. File schema (JSON)::

    {
      "models": {
        "story-model": {
          "window": 1024,                      // optional context window
          "default": {"the": 0.5, "a": 0.5},   // fallback distribution
          "rules": [
            {"context": ["The"], "next": {"cat": 0.7, "dog": 0.3}}
          ],
          "nsp": {                             // optional NSP capability
            "default": 0.5,
            "pairs": [["first text", "second text", 0.9]]
          }
        }
      }
    }

Rule lookup uses the longest rule context that is a suffix of the query
context; unmatched queries fall back to ``default``. The model id "*"
serves any id not listed explicitly. Tokenization is whitespace-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import CapabilityError, ConfigurationError, WindowExceededError
from .gateway import ScoredContinuation, TokenDistribution


@dataclass(frozen=True)
class ScriptedModel:
    """One scripted model: next-token rules, fallback, optional NSP table."""

    rules: dict[tuple[str, ...], dict[str, float]]
    default: dict[str, float] = field(default_factory=dict)
    nsp_pairs: dict[tuple[str, str], float] | None = None
    nsp_default: float | None = None
    window: int | None = None

    def __post_init__(self):
        for key, probs in self.rules.items():
            TokenDistribution(dict(probs), complete=True)  # validates each rule
        if self.default:
            TokenDistribution(dict(self.default), complete=True)

    def lookup(self, context: Sequence[str]) -> dict[str, float]:
        """Longest-suffix rule match; falls back to the default table."""
        best: dict[str, float] | None = None
        best_len = -1
        ctx = tuple(context)
        for key, probs in self.rules.items():
            if len(key) > best_len and len(key) <= len(ctx) and ctx[len(ctx) - len(key):] == key:
                best, best_len = probs, len(key)
        if best is not None:
            return best
        if not self.default:
            raise ConfigurationError(
                f"no rule matches context ending in {list(ctx[-3:])!r} and no default is set"
            )
        return self.default


class ScriptedBackend:
    """Pure, thread-safe backend over a set of :class:`ScriptedModel`."""

    def __init__(self, models: dict[str, ScriptedModel]):
        if not models:
            raise ConfigurationError("scripted backend needs at least one model")
        self._models = dict(models)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScriptedBackend":
        models_raw = raw.get("models")
        if not isinstance(models_raw, dict):
            raise ConfigurationError('scripted file must have a top-level "models" object')
        models: dict[str, ScriptedModel] = {}
        for model_id, spec in models_raw.items():
            rules: dict[tuple[str, ...], dict[str, float]] = {}
            for rule in spec.get("rules", []):
                key = tuple(rule["context"])
                if key in rules:
                    raise ConfigurationError(
                        f"duplicate rule context {list(key)!r} in model {model_id!r}"
                    )
                rules[key] = {str(t): float(p) for t, p in rule["next"].items()}
            nsp_pairs = None
            nsp_default = None
            if "nsp" in spec:
                nsp_pairs = {
                    (str(first), str(second)): float(prob)
                    for first, second, prob in spec["nsp"].get("pairs", [])
                }
                nsp_default = spec["nsp"].get("default")
                if nsp_default is not None:
                    nsp_default = float(nsp_default)
            models[model_id] = ScriptedModel(
                rules=rules,
                default={str(t): float(p) for t, p in spec.get("default", {}).items()},
                nsp_pairs=nsp_pairs,
                nsp_default=nsp_default,
                window=spec.get("window"),
            )
        return cls(models)

    def _model(self, model: str) -> ScriptedModel:
        found = self._models.get(model) or self._models.get("*")
        if found is None:
            raise ConfigurationError(f"unknown model id {model!r}")
        return found

    def next_token_distribution(
        self,
        model: str,
        context: Sequence[str],
        candidates: set[str] | None = None,
        top_n: int | None = None,
    ) -> TokenDistribution:
        table = self._model(model).lookup(context)
        if candidates is not None:
            return TokenDistribution(
                {t: table.get(t, 0.0) for t in candidates}, complete=False
            )
        if top_n is not None and top_n < len(table):
            ordered = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
            return TokenDistribution(dict(ordered), complete=False)
        return TokenDistribution(dict(table), complete=True)

    def score_continuation(
        self, model: str, prefix: Sequence[str], continuation: Sequence[str]
    ) -> ScoredContinuation:
        if not continuation:
            raise ValueError("continuation must be non-empty")
        scripted = self._model(model)
        if scripted.window is not None and len(prefix) + len(continuation) > scripted.window:
            raise WindowExceededError(scripted.window)
        context = list(prefix)
        logprobs: list[float] = []
        for token in continuation:
            prob = scripted.lookup(context).get(token, 0.0)
            logprobs.append(math.log(prob) if prob > 0.0 else -math.inf)
            context.append(token)
        return ScoredContinuation(tuple(continuation), tuple(logprobs))

    def nsp_probability(self, model: str, first: str, second: str) -> float:
        scripted = self._model(model)
        if scripted.nsp_pairs is None:
            raise CapabilityError(f"model {model!r} has no NSP table")
        if scripted.window is not None:
            total = len(self.tokenize(model, first)) + len(self.tokenize(model, second))
            if total > scripted.window:
                raise WindowExceededError(scripted.window)
        prob = scripted.nsp_pairs.get((first, second), scripted.nsp_default)
        if prob is None:
            raise ConfigurationError(
                f"NSP pair not in table and no default configured: {(first, second)!r}"
            )
        return prob

    def tokenize(self, model: str, text: str) -> list[str]:
        return text.split()

    def detokenize(self, model: str, tokens: Sequence[str]) -> str:
        return " ".join(tokens)

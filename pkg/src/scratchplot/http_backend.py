"""HTTP backend speaking the model-server wire protocol.

Endpoints (JSON over POST):

    /v1/next_token {model, context, candidates?, top_n?}
        -> {entries: [{token, prob}], complete}
    /v1/score      {model, prefix, continuation} -> {tokens, logprobs}
    /v1/nsp        {model, first, second}        -> {prob}
    /v1/tokenize   {model, text}                 -> {tokens}

Detokenization is not part of the wire protocol; the client first tries
the optional /v1/detokenize extension and otherwise reassembles text
from common token conventions (byte-level BPE markers, wordpiece "##",
plain whitespace). Error responses carry {"error": {"type", "message",
"window"?}}; 422 with a window maps to WindowExceededError.
"""

from __future__ import annotations

import logging
import os
import time
from typing import Sequence

import httpx

from .errors import (
    CapabilityError,
    ConfigurationError,
    TransportError,
    WindowExceededError,
)
from .gateway import ScoredContinuation, TokenDistribution

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = float(os.environ.get("SCRATCHPLOT_LM_TIMEOUT", "120"))

_BPE_SPACE = "Ġ"  # GPT-2 byte-level marker for a leading space
_BPE_NEWLINE = "Ċ"


def join_token_strings(tokens: Sequence[str]) -> str:
    """Best-effort client-side detokenization for ASCII text."""
    if any(_BPE_SPACE in t or _BPE_NEWLINE in t for t in tokens):
        return "".join(tokens).replace(_BPE_SPACE, " ").replace(_BPE_NEWLINE, "\n")
    if any(t.startswith("##") for t in tokens):
        out = ""
        for token in tokens:
            out += token[2:] if token.startswith("##") else (" " if out else "") + token
        return out
    return " ".join(tokens)


class HttpBackend:
    """Synchronous client for a remote model server.

    Transient transport failures retry with backoff; persistent failure
    raises :class:`TransportError` with the attempt count.
    """

    def __init__(
        self,
        base_url: str,
        client: httpx.Client | None = None,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)
        self._retries = retries
        self._backoff = backoff
        self._has_detokenize: bool | None = None

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = f"{self.base_url}{endpoint}"
        last_error: Exception | None = None
        for attempt in range(1, self._retries + 1):
            try:
                response = self._client.post(url, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                if attempt < self._retries:
                    time.sleep(self._backoff * attempt)
                continue
            if response.status_code >= 500:
                last_error = TransportError(
                    f"{url} returned {response.status_code}", attempts=attempt
                )
                if attempt < self._retries:
                    time.sleep(self._backoff * attempt)
                continue
            if response.status_code >= 400:
                raise self._map_error(url, response)
            return response.json()
        raise TransportError(
            f"{url} unreachable after {self._retries} attempts: {last_error}",
            attempts=self._retries,
        )

    @staticmethod
    def _map_error(url: str, response: httpx.Response) -> Exception:
        try:
            detail = response.json().get("error", {})
        except ValueError:
            detail = {}
        kind = detail.get("type", "")
        message = detail.get("message", response.text[:200])
        if response.status_code == 422 and "window" in detail:
            return WindowExceededError(int(detail["window"]), message)
        if kind == "unknown_model" or response.status_code == 404 and "model" in message:
            return ConfigurationError(f"{url}: {message}")
        if kind == "unsupported" or response.status_code == 501:
            return CapabilityError(f"{url}: {message}")
        return ConfigurationError(f"{url} returned {response.status_code}: {message}")

    def next_token_distribution(
        self,
        model: str,
        context: Sequence[str],
        candidates: set[str] | None = None,
        top_n: int | None = None,
    ) -> TokenDistribution:
        payload: dict = {"model": model, "context": self.detokenize(model, context)}
        if candidates is not None:
            payload["candidates"] = sorted(candidates)
        if top_n is not None:
            payload["top_n"] = top_n
        data = self._post("/v1/next_token", payload)
        entries = {e["token"]: float(e["prob"]) for e in data["entries"]}
        return TokenDistribution(entries, complete=bool(data["complete"]))

    def score_continuation(
        self, model: str, prefix: Sequence[str], continuation: Sequence[str]
    ) -> ScoredContinuation:
        data = self._post(
            "/v1/score",
            {
                "model": model,
                "prefix": self.detokenize(model, prefix),
                "continuation": self.detokenize(model, continuation),
            },
        )
        return ScoredContinuation(
            tuple(data["tokens"]), tuple(float(lp) for lp in data["logprobs"])
        )

    def nsp_probability(self, model: str, first: str, second: str) -> float:
        data = self._post("/v1/nsp", {"model": model, "first": first, "second": second})
        return float(data["prob"])

    def tokenize(self, model: str, text: str) -> list[str]:
        data = self._post("/v1/tokenize", {"model": model, "text": text})
        return list(data["tokens"])

    def detokenize(self, model: str, tokens: Sequence[str]) -> str:
        if not tokens:
            return ""
        if self._has_detokenize is not False:
            try:
                data = self._post(
                    "/v1/detokenize", {"model": model, "tokens": list(tokens)}
                )
                self._has_detokenize = True
                return data["text"]
            except (ConfigurationError, CapabilityError):
                if self._has_detokenize is None:
                    logger.info("server lacks /v1/detokenize; joining tokens client-side")
                self._has_detokenize = False
        return join_token_strings(tokens)

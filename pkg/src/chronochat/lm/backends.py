"""Next-token distribution oracles.

A backend owns a tokenizer and answers ``next_logprobs(prefix)`` with a
distribution over its vocabulary. Local backends (scripted mocks, the
n-gram model) are exact and deterministic; the remote backend proxies a
completion endpoint that returns top-k log-probabilities and is therefore
sparse.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


class BackendError(RuntimeError):
    pass


@dataclass
class TokenDistribution:
    """Log-probabilities over one decoding step's vocabulary."""

    logprobs: np.ndarray

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "TokenDistribution":
        with np.errstate(divide="ignore"):
            return cls(np.log(np.asarray(probs, dtype=np.float64)))

    def normalized(self) -> "TokenDistribution":
        return TokenDistribution(self.logprobs - logsumexp(self.logprobs))

    def probs(self) -> np.ndarray:
        return np.exp(self.normalized().logprobs)


def logsumexp(logv: np.ndarray) -> float:
    m = np.max(logv)
    if not np.isfinite(m):
        return float("-inf")
    return float(m + np.log(np.sum(np.exp(logv - m))))


class ScriptedBackend:
    """Exact scripted distributions keyed by the full token prefix."""

    context_budget = None
    sparse_top_k = False

    def __init__(self, tokenizer, table: dict, default: dict | None = None):
        """table maps tuple(prefix ids) -> {token id: prob}."""
        self.tokenizer = tokenizer
        self._table = {tuple(k): v for k, v in table.items()}
        self._default = default

    def next_logprobs(self, prefix) -> TokenDistribution:
        probs = self._table.get(tuple(prefix), self._default)
        if probs is None:
            raise BackendError(f"unscripted prefix of length {len(prefix)}")
        vec = np.zeros(self.tokenizer.vocab_size)
        for tok, p in probs.items():
            vec[tok] = p
        return TokenDistribution.from_probs(vec / vec.sum())


class EventSpaceBackend:
    """Weighted distribution over a finite set of per-entry encodings.

    Conditions only on the current partial entry (the tokens after the
    last completed sentinel), which keeps the event process enumerable:
    P(next entry) is the normalized weight table regardless of history.
    """

    context_budget = None
    sparse_top_k = False

    def __init__(self, tokenizer, weighted_entries: dict[str, float],
                 sentinel: str):
        self.tokenizer = tokenizer
        self.sentinel = sentinel
        self.entries = {}
        for text, w in weighted_entries.items():
            if not text.endswith(sentinel):
                raise ValueError(f"entry {text!r} lacks the sentinel")
            self.entries[tuple(tokenizer.tokenize(text))] = float(w)
        if not self.entries:
            raise ValueError("no entries")

    def _current_tail(self, prefix) -> tuple:
        text = ""
        boundary = 0
        for i, tok in enumerate(prefix):
            text += self.tokenizer.token_bytes(tok).decode("utf-8",
                                                           errors="ignore")
            if text.endswith(self.sentinel):
                boundary = i + 1
        return tuple(prefix[boundary:])

    def next_logprobs(self, prefix) -> TokenDistribution:
        tail = self._current_tail(prefix)
        vec = np.zeros(self.tokenizer.vocab_size)
        k = len(tail)
        for seq, w in self.entries.items():
            if len(seq) > k and seq[:k] == tail:
                vec[seq[k]] += w
        total = vec.sum()
        if total <= 0:
            raise BackendError(f"no scripted entry extends tail {tail}")
        return TokenDistribution.from_probs(vec / total)

    def entry_distribution(self) -> dict[str, float]:
        """Normalized entry weights (for enumeration oracles)."""
        total = sum(self.entries.values())
        return {self.tokenizer.detokenize(seq): w / total
                for seq, w in self.entries.items()}


@dataclass
class RemoteConfig:
    base_url: str
    path: str = "/v1/logprobs"
    top_k: int = 50
    timeout_s: float = 10.0


class RemoteBackend:
    """Client for a completion endpoint returning top-k log-probabilities.

    Request:  POST {base_url}{path} with {"prefix": str, "top_k": int}
    Response: {"tokens": [str, ...], "logprobs": [float, ...]}

    Returned tokens are matched to the local tokenizer by exact bytes;
    unmatched ones are dropped (counted in ``unmapped_tokens``). Masking
    over a sparse top-k can starve; the constrained sampler then falls
    back to uniform-over-legal and bumps its mask-starved counter.
    """

    context_budget = 16384
    sparse_top_k = True

    def __init__(self, tokenizer, config: RemoteConfig, session=None):
        import requests

        self.tokenizer = tokenizer
        self.config = config
        self._http = session or requests.Session()
        self._ids = {tokenizer.token_bytes(i): i
                     for i in range(tokenizer.vocab_size)}
        self.unmapped_tokens = 0

    def next_logprobs(self, prefix) -> TokenDistribution:
        import requests

        try:
            text = self.tokenizer.detokenize(prefix)
        except UnicodeDecodeError as exc:
            raise BackendError(f"prefix is not valid UTF-8: {exc}") from exc
        url = self.config.base_url.rstrip("/") + self.config.path
        try:
            resp = self._http.post(
                url, json={"prefix": text, "top_k": self.config.top_k},
                timeout=self.config.timeout_s)
            resp.raise_for_status()
            payload = resp.json()
            tokens = payload["tokens"]
            logprobs = payload["logprobs"]
        except (requests.RequestException, json.JSONDecodeError,
                KeyError, TypeError) as exc:
            raise BackendError(f"remote backend failure: {exc}") from exc
        if len(tokens) != len(logprobs):
            raise BackendError("malformed response: length mismatch")
        vec = np.full(self.tokenizer.vocab_size, -math.inf)
        for tok, lp in zip(tokens, logprobs):
            tid = self._ids.get(str(tok).encode("utf-8"))
            if tid is None:
                self.unmapped_tokens += 1
                continue
            vec[tid] = max(vec[tid], float(lp))
        if not np.isfinite(vec).any():
            raise BackendError("remote response mapped to no local tokens")
        return TokenDistribution(vec).normalized()


class TemperatureWrapper:
    """Logit temperature; 1.0 is the identity."""

    def __init__(self, backend, temperature: float):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.inner = backend
        self.temperature = temperature
        self.tokenizer = backend.tokenizer
        self.context_budget = backend.context_budget
        self.sparse_top_k = backend.sparse_top_k

    def next_logprobs(self, prefix) -> TokenDistribution:
        dist = self.inner.next_logprobs(prefix)
        return TokenDistribution(dist.logprobs / self.temperature).normalized()


class TopPWrapper:
    """Nucleus sampling: keep the smallest set of tokens covering mass p."""

    def __init__(self, backend, top_p: float):
        if not 0 < top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        self.inner = backend
        self.top_p = top_p
        self.tokenizer = backend.tokenizer
        self.context_budget = backend.context_budget
        self.sparse_top_k = backend.sparse_top_k

    def next_logprobs(self, prefix) -> TokenDistribution:
        dist = self.inner.next_logprobs(prefix).normalized()
        probs = np.exp(dist.logprobs)
        order = np.argsort(-probs, kind="stable")
        keep = np.cumsum(probs[order]) < self.top_p
        # always keep the most likely token; include the one crossing p
        keep = np.roll(keep, 1)
        keep[0] = True
        cut = np.full_like(probs, -math.inf)
        kept = order[keep]
        cut[kept] = dist.logprobs[kept]
        return TokenDistribution(cut).normalized()

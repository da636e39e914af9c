"""Backoff n-gram model over token ids.

Desk-scale stand-in for a finetuned language model: order k with add-alpha
smoothing at each order, backing off to the next shorter context whenever
the current one was never seen in training. Deterministic given the
corpus, and exactly enumerable, which the distributional tests rely on.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict

import numpy as np

from .backends import BackendError, TokenDistribution

_MAGIC = "chronochat-ngram"
_VERSION = 1


class NgramBackend:
    context_budget = None
    sparse_top_k = False

    def __init__(self, tokenizer, order: int, alpha: float,
                 counts: list[dict], totals: list[dict]):
        self.tokenizer = tokenizer
        self.order = order
        self.alpha = alpha
        self._counts = counts      # counts[j][ctx][token] = n
        self._totals = totals      # totals[j][ctx] = sum over tokens
        self._cache: dict = {}

    def next_logprobs(self, prefix) -> TokenDistribution:
        prefix = tuple(prefix)
        for j in range(self.order, -1, -1):
            ctx = prefix[len(prefix) - j:] if j else ()
            if len(ctx) != j:
                continue  # prefix shorter than this order
            total = self._totals[j].get(ctx, 0)
            if total == 0 and j > 0:
                continue  # unseen context: back off
            if total == 0 and self.alpha == 0:
                raise BackendError("order-0 model has no mass (empty corpus)")
            cached = self._cache.get((j, ctx))
            if cached is None:
                v = self.tokenizer.vocab_size
                vec = np.full(v, self.alpha, dtype=np.float64)
                for tok, n in self._counts[j].get(ctx, {}).items():
                    vec[tok] += n
                denom = total + self.alpha * v
                with np.errstate(divide="ignore"):
                    cached = TokenDistribution(np.log(vec) - math.log(denom))
                self._cache[(j, ctx)] = cached
            return cached
        raise BackendError("no usable context order")  # pragma: no cover

    # -- persistence ----------------------------------------------------

    def save(self, path: str) -> None:
        with open(path, "w", encoding="ascii") as fp:
            fp.write(f"{_MAGIC} v{_VERSION}\n")
            fp.write(f"order {self.order}\n")
            fp.write(f"alpha {self.alpha!r}\n")
            fp.write(f"vocab {self.tokenizer.vocab_size}\n")
            for j in range(self.order + 1):
                for ctx in sorted(self._counts[j]):
                    row = self._counts[j][ctx]
                    for tok in sorted(row):
                        ctx_txt = ",".join(map(str, ctx))
                        fp.write(f"{j}\t{ctx_txt}\t{tok}\t{row[tok]}\n")

    @classmethod
    def load(cls, path: str, tokenizer) -> "NgramBackend":
        with open(path, encoding="ascii") as fp:
            header = fp.readline().strip()
            if header != f"{_MAGIC} v{_VERSION}":
                raise ValueError(f"unrecognized model file header {header!r}")
            order = int(fp.readline().split()[1])
            alpha = float(fp.readline().split()[1])
            vocab = int(fp.readline().split()[1])
            if vocab != tokenizer.vocab_size:
                raise ValueError(
                    f"model expects vocab {vocab}, tokenizer has "
                    f"{tokenizer.vocab_size}")
            counts = [defaultdict(Counter) for _ in range(order + 1)]
            totals = [defaultdict(int) for _ in range(order + 1)]
            for line in fp:
                j_s, ctx_s, tok_s, n_s = line.rstrip("\n").split("\t")
                j, tok, n = int(j_s), int(tok_s), int(n_s)
                ctx = tuple(int(x) for x in ctx_s.split(",")) if ctx_s else ()
                counts[j][ctx][tok] += n
                totals[j][ctx] += n
        return cls(tokenizer, order, alpha,
                   [dict(c) for c in counts], [dict(t) for t in totals])


def train_ngram(corpus_text: str, tokenizer, order: int,
                alpha: float) -> NgramBackend:
    if order < 1:
        raise ValueError("order must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    tokens = tokenizer.tokenize(corpus_text)
    if not tokens:
        raise ValueError("empty corpus")
    counts = [defaultdict(Counter) for _ in range(order + 1)]
    totals = [defaultdict(int) for _ in range(order + 1)]
    for i, tok in enumerate(tokens):
        for j in range(min(order, i) + 1):
            ctx = tuple(tokens[i - j:i])
            counts[j][ctx][tok] += 1
            totals[j][ctx] += 1
    return NgramBackend(tokenizer, order, alpha,
                        [dict(c) for c in counts], [dict(t) for t in totals])

"""Performance and timing-fidelity statistics.

Control-token overhead, the real-time generation-bandwidth requirement
(tokens of each message over the time since the latest message outside
the reaction window), log-binned delay histograms with smoothed KL
divergence, and document-level NLL under the constrained generation
process.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from ..codec import GRANULARITY_US, encode_entries, initial_state
from ..lm.constrained import event_stepwise_probs
from ..timebase import US_PER_SECOND, truncate_us

DEFAULT_PERCENTILES = (50.0, 90.0, 99.0, 99.9)


@dataclass
class CorpusStats:
    """Per-message token accounting plus the rate/percentile view."""

    plaintext_tokens: list[int] = field(default_factory=list)
    formatted_tokens: list[int] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    mean_ratio: float | None = None
    median_ratio: float | None = None
    # required_rates part
    rates: list[float | None] = field(default_factory=list)
    included_rates: list[float] = field(default_factory=list)
    excluded: int = 0
    percentiles: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)   # (rate tok/s, fraction <= rate)

    def report(self) -> dict:
        out = {
            "messages": len(self.formatted_tokens),
            "plaintext_tokens_total": int(sum(self.plaintext_tokens)),
            "formatted_tokens_total": int(sum(self.formatted_tokens)),
        }
        if self.mean_ratio is not None:
            out["mean_overhead_ratio"] = self.mean_ratio
            out["median_overhead_ratio"] = self.median_ratio
        if self.percentiles:
            out["rate_percentiles_tok_per_s"] = dict(self.percentiles)
            out["rated_messages"] = len(self.included_rates)
            out["excluded_messages"] = self.excluded
            out["rate_curve"] = [[r, f] for r, f in self.curve]
        return out


def overhead_stats(events, tokenizer, fmt: str) -> CorpusStats:
    """Token cost of the control format versus raw message text."""
    if not events:
        raise ValueError("empty corpus")
    stats = CorpusStats()
    for entry_text, ev in zip(encode_entries(events, fmt), events):
        formatted = len(tokenizer.tokenize(entry_text))
        plain = len(tokenizer.tokenize(ev.text))
        stats.formatted_tokens.append(formatted)
        stats.plaintext_tokens.append(plain)
        if plain > 0:
            stats.ratios.append(formatted / plain)
    if stats.ratios:
        stats.mean_ratio = float(np.mean(stats.ratios))
        stats.median_ratio = float(np.median(stats.ratios))
    return stats


def nearest_rank_percentile(sorted_values, p: float) -> float:
    """Smallest value whose rank covers fraction p (nearest-rank method)."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("no values")
    idx = max(0, min(n - 1, math.ceil(p / 100.0 * n) - 1))
    return float(sorted_values[idx])


def required_rates(events, tokenizer, fmt: str,
                   t_react_us: int = 200_000,
                   percentiles=DEFAULT_PERCENTILES,
                   speaker: str | None = None) -> CorpusStats:
    """Tokens/second needed to have each message ready by its timestamp,
    measured from the latest message at or before t - t_react (any
    speaker). Messages with no qualifying predecessor are excluded."""
    times = [ev.time_us for ev in events]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("corpus times must be non-decreasing")
    stats = overhead_stats(events, tokenizer, fmt)
    for i, ev in enumerate(events):
        rate = None
        if speaker is None or ev.speaker == speaker:
            j = bisect_right(times, ev.time_us - t_react_us) - 1
            j = min(j, i - 1)
            if j >= 0:
                dt_s = (ev.time_us - times[j]) / US_PER_SECOND
                if dt_s > 0:
                    rate = stats.formatted_tokens[i] / dt_s
        stats.rates.append(rate)
        if rate is not None:
            stats.included_rates.append(rate)
        elif speaker is None or ev.speaker == speaker:
            stats.excluded += 1
    ranked = sorted(stats.included_rates)
    if ranked:
        for p in percentiles:
            stats.percentiles[f"p{p:g}"] = nearest_rank_percentile(ranked, p)
        n = len(ranked)
        stats.curve = [(r, (k + 1) / n) for k, r in enumerate(ranked)
                       if k + 1 == n or ranked[k + 1] != r]
    return stats


@dataclass
class DelayHistogram:
    edges_s: np.ndarray     # bins+1 geometric edges, seconds
    counts: np.ndarray

    @property
    def bins(self) -> int:
        return len(self.counts)


def inter_message_delays_s(events) -> list[float]:
    return [(b.time_us - a.time_us) / US_PER_SECOND
            for a, b in zip(events, events[1:])]


def delay_histogram(events, bins: int = 25,
                    edges_s: np.ndarray | None = None) -> DelayHistogram:
    """Log-binned successive-delay histogram. Edges span the smallest
    positive delay (clamped up to 100 us) through the largest; delays
    outside land in the edge bins."""
    delays = inter_message_delays_s(events)
    if edges_s is None:
        edges_s = delay_bin_edges(delays, bins)
    counts = np.zeros(len(edges_s) - 1, dtype=np.int64)
    for d in delays:
        k = int(np.searchsorted(edges_s, d, side="right")) - 1
        counts[min(max(k, 0), len(counts) - 1)] += 1
    return DelayHistogram(edges_s, counts)


def delay_bin_edges(delays_s, bins: int = 25) -> np.ndarray:
    positive = [d for d in delays_s if d > 0]
    if not positive:
        raise ValueError("all delays are zero; nothing to bin")
    lo = max(min(positive), 1e-4)
    hi = max(positive)
    if hi <= lo:
        hi = lo * 10
    return np.geomspace(lo, hi, bins + 1)


def shared_delay_histograms(events_a, events_b,
                            bins: int = 25) -> tuple[DelayHistogram,
                                                     DelayHistogram]:
    """Histograms over shared edges spanning both corpora (KL needs
    aligned bins)."""
    pooled = (inter_message_delays_s(events_a)
              + inter_message_delays_s(events_b))
    edges = delay_bin_edges(pooled, bins)
    return (delay_histogram(events_a, bins, edges),
            delay_histogram(events_b, bins, edges))


def kl_divergence(h1: DelayHistogram, h2: DelayHistogram) -> float:
    """KL(h1 || h2) in nats after add-one smoothing of both histograms."""
    if h1.bins != h2.bins or not np.allclose(h1.edges_s, h2.edges_s):
        raise ValueError("histograms must share bin edges")
    p = (h1.counts + 1.0) / (h1.counts.sum() + h1.bins)
    q = (h2.counts + 1.0) / (h2.counts.sum() + h2.bins)
    return float(np.sum(p * np.log(p / q)))


def document_nll(backend, events, fmt: str, *, lenient: bool = False,
                 step_cache=None) -> float:
    """Negative log likelihood of a whole encoded transcript under the
    constrained generation process (summed per document, tokenizer-
    comparable)."""
    if not events:
        raise ValueError("empty document")
    entries = encode_entries(events, fmt)
    prefix: list[int] = []
    prev_time = None
    nll = 0.0
    state = initial_state(fmt, lenient=lenient)
    for entry_text, ev in zip(entries, events):
        floor = prev_time if prev_time is not None else 0
        tokens = backend.tokenizer.tokenize(entry_text)
        probs = event_stepwise_probs(backend, prefix, state, tokens, floor,
                                     step_cache=step_cache)
        for p in probs:
            nll -= math.log(p) if p > 0 else float("-inf")
        prefix.extend(tokens)
        for ch in entry_text:
            state.step(ch)
        prev_time = truncate_us(ev.time_us, GRANULARITY_US[fmt])
    return nll

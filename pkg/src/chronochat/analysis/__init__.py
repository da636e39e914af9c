"""Performance-analysis toolchain."""

from .stats import (
    DEFAULT_PERCENTILES,
    CorpusStats,
    DelayHistogram,
    delay_bin_edges,
    delay_histogram,
    document_nll,
    inter_message_delays_s,
    kl_divergence,
    nearest_rank_percentile,
    overhead_stats,
    required_rates,
    shared_delay_histograms,
)
from .synthetic import SyntheticParams, generate_synthetic_corpus

__all__ = [
    "CorpusStats", "DEFAULT_PERCENTILES", "DelayHistogram",
    "SyntheticParams", "delay_bin_edges", "delay_histogram", "document_nll",
    "generate_synthetic_corpus", "inter_message_delays_s", "kl_divergence",
    "nearest_rank_percentile", "overhead_stats", "required_rates",
    "shared_delay_histograms",
]

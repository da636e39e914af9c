"""Language-model interface: tokenizers, distribution oracles, and
constrained event sampling/scoring."""

from .backends import (
    BackendError,
    EventSpaceBackend,
    RemoteBackend,
    RemoteConfig,
    ScriptedBackend,
    TemperatureWrapper,
    TokenDistribution,
    TopPWrapper,
    logsumexp,
)
from .constrained import (
    CandidateEvent,
    DistributionStarvedError,
    EventTooLongError,
    GenerationInterrupted,
    MaskViolation,
    SamplingError,
    TokenWalker,
    constrained_sample_event,
    event_stepwise_probs,
    masked_next_distribution,
)
from .history import TokenHistory
from .ngram import NgramBackend, train_ngram
from .tokenizers import (
    ByteTokenizer,
    VocabTokenizer,
    byte_tokenizer,
    load_vocab,
    make_tokenizer,
    optimized_tokenizer,
    save_vocab,
)

__all__ = [
    "BackendError", "ByteTokenizer", "CandidateEvent",
    "DistributionStarvedError", "EventSpaceBackend", "EventTooLongError",
    "GenerationInterrupted", "MaskViolation", "NgramBackend",
    "RemoteBackend", "RemoteConfig", "SamplingError", "ScriptedBackend",
    "TemperatureWrapper", "TokenDistribution", "TokenWalker", "TokenHistory",
    "TopPWrapper", "VocabTokenizer", "byte_tokenizer",
    "constrained_sample_event", "event_stepwise_probs", "load_vocab",
    "logsumexp", "make_tokenizer", "masked_next_distribution",
    "optimized_tokenizer", "save_vocab", "train_ngram",
]

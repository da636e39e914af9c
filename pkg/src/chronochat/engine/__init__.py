"""Real-time session engine: causal rejection sampling, speculation and
retconning over virtual or wall clocks."""

from .clock import (
    CloseInput,
    QueueInputSource,
    RetconInput,
    ScriptedInputSource,
    UserInput,
    VirtualClock,
    WallClock,
)
from .config import VIRTUAL, WALL, SessionConfig
from .retcon import WordUpdate, unstable_asr_feeder
from .session import (
    DISCARD,
    KEEP,
    MODEL,
    SPECULATION_ELIGIBLE,
    USER,
    CollectingSink,
    HistoryEntry,
    Metrics,
    OutputSink,
    SessionState,
    candidate_disposition,
    measure_t_latency,
    run_session,
)
from .speculation import (
    SavingsReport,
    SpeculationError,
    SpeculationOutcome,
    rerender_draft_tokens,
    speculation_savings,
    speculative_resample,
)
from .trace import Trace, event_digest

__all__ = [
    "CloseInput", "CollectingSink", "DISCARD", "HistoryEntry", "KEEP",
    "MODEL", "Metrics", "OutputSink", "QueueInputSource", "RetconInput",
    "SPECULATION_ELIGIBLE", "SavingsReport", "ScriptedInputSource",
    "SessionConfig", "SessionState", "SpeculationError",
    "SpeculationOutcome", "Trace", "USER", "UserInput", "VIRTUAL",
    "VirtualClock", "WALL", "WallClock", "WordUpdate",
    "candidate_disposition", "event_digest", "measure_t_latency",
    "rerender_draft_tokens", "run_session", "speculation_savings",
    "speculative_resample", "unstable_asr_feeder",
]

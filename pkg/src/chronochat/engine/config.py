"""Session configuration."""

from __future__ import annotations

from dataclasses import dataclass

from ..codec import FORMATS, MESSENGER
from ..codec import messenger as _messenger
from ..codec import spoken as _spoken
from ..timebase import US_PER_MS

VIRTUAL = "virtual"
WALL = "wall"


@dataclass
class SessionConfig:
    user_speaker: str = "A"
    fmt: str = MESSENGER
    t_react_us: int = 200 * US_PER_MS
    clock_mode: str = VIRTUAL
    backend_spec: str | None = None
    seed: int = 0
    speculation: bool = False
    max_event_tokens: int = 512
    start_time_us: int | None = None
    context_budget: int | None = None
    lenient: bool = False
    # virtual-mode modeled compute cost per generated token
    token_latency_us: int = 0

    def validate(self) -> "SessionConfig":
        if self.fmt not in FORMATS:
            raise ValueError(f"unknown format {self.fmt!r}")
        if self.t_react_us < 0:
            raise ValueError("t_react must be >= 0")
        speakers = (_messenger.SPEAKERS if self.fmt == MESSENGER
                    else _spoken.SPEAKERS)
        if self.user_speaker not in speakers:
            raise ValueError(
                f"user speaker {self.user_speaker!r} invalid for {self.fmt}")
        if self.clock_mode not in (VIRTUAL, WALL):
            raise ValueError(f"unknown clock mode {self.clock_mode!r}")
        return self

"""Event history as the model sees it: per-event token runs.

Events are encoded entry-by-entry (tokenization never spans entries), so
whole events can be dropped or replaced and the survivors re-encoded.
When the context budget trims the oldest events, the first survivor is
re-rendered with a full timestamp.
"""

from __future__ import annotations

from ..codec import Encoder, GRANULARITY_US, MESSENGER, initial_state
from ..codec.events import Event
from ..timebase import truncate_us


class TokenHistory:
    def __init__(self, tokenizer, fmt: str, *, lenient: bool = False,
                 budget: int | None = None):
        self.tokenizer = tokenizer
        self.fmt = fmt
        self.lenient = lenient
        self.budget = budget
        self.events: list[Event] = []
        self.entry_texts: list[str] = []
        self.entry_tokens: list[list[int]] = []
        self.dropped_events = 0
        self._tokens: list[int] = []
        self._enc = Encoder(fmt, alias_gap=True)

    @property
    def tokens(self) -> list[int]:
        return self._tokens

    def total_tokens(self) -> int:
        return len(self._tokens)

    def codec_state(self):
        """Decoder state a sampler should continue from."""
        return initial_state(self.fmt, self._enc.prev_time_us, self.lenient)

    def last_time_us(self) -> int | None:
        return self._enc.prev_time_us

    def _encodable(self, event: Event) -> Event:
        """Clamp regressions so revised histories still encode; the spoken
        encoder aliases long gaps on its own."""
        prev = self._enc.prev_time_us
        t = truncate_us(event.time_us, GRANULARITY_US[self.fmt])
        if prev is not None and t < prev:
            return Event(prev, event.speaker, event.text)
        return event

    def append(self, event: Event) -> list[int]:
        text = self._enc.encode_event(self._encodable(event))
        toks = self.tokenizer.tokenize(text)
        self.events.append(event)
        self.entry_texts.append(text)
        self.entry_tokens.append(toks)
        self._tokens.extend(toks)
        if self.budget is not None:
            self.enforce_budget()
        return toks

    def replace(self, index: int, event: Event) -> None:
        """In-place revision: entries from `index` on are re-encoded (their
        renderings may change through prefix omission)."""
        if not 0 <= index < len(self.events):
            raise IndexError(index)
        self.events[index] = event
        self._rebuild()

    def enforce_budget(self) -> int:
        """Drop whole oldest events until within the token budget."""
        if self.budget is None:
            return 0
        dropped = 0
        while len(self.events) > 1 and self.total_tokens() > self.budget:
            self.events.pop(0)
            dropped += 1
            self._rebuild()
        self.dropped_events += dropped
        return dropped

    def _rebuild(self) -> None:
        self._enc = Encoder(self.fmt, alias_gap=True)
        self.entry_texts = []
        self.entry_tokens = []
        self._tokens = []
        for ev in self.events:
            text = self._enc.encode_event(self._encodable(ev))
            toks = self.tokenizer.tokenize(text)
            self.entry_texts.append(text)
            self.entry_tokens.append(toks)
            self._tokens.extend(toks)

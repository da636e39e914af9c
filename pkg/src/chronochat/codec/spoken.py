"""Streaming codec for the spoken word-level transcript format.

Entry layout: three digits (time within a rolling 10-second window, in
centiseconds), one uppercase speaker letter, the word, then a newline
which doubles as the end-of-message sentinel:

    055Aknock
    079Aknock
    154Bwho's

Absolute time moves forward by ``(new_code - prev_code) mod 1000``
centiseconds per entry; an equal code means simultaneity. Silences of ten
seconds or more are therefore unrepresentable: plain encoding rejects
them, alias mode folds them modulo the window.
"""

from __future__ import annotations

import string

from ..timebase import US_PER_CENTISECOND, truncate_us
from .base import WORD, WORD_OR_EOM
from .errors import DecodeError, EncodeError
from .events import Event

EOM = "\n"
WINDOW_CODES = 1000  # 10 s window at centisecond resolution
WINDOW_US = WINDOW_CODES * US_PER_CENTISECOND
SPEAKERS = frozenset(string.ascii_uppercase)

P_CODE0, P_CODE1, P_CODE2, P_SPEAKER, P_WORD0, P_WORD = range(6)

_DIGITS = frozenset("0123456789")
_WS = frozenset(" \t\r\n\v\f")


def time_to_code(t_us: int) -> int:
    return (t_us // US_PER_CENTISECOND) % WINDOW_CODES


class SpokenState:
    """Decoder state for the spoken format; cheap to copy and compare."""

    __slots__ = ("prev_us", "phase", "buf", "speaker", "word", "pos")

    def __init__(self, prev_time_us: int | None = None):
        self.prev_us = (None if prev_time_us is None
                        else truncate_us(prev_time_us, US_PER_CENTISECOND))
        self.pos = 0
        self._reset_entry()

    def _reset_entry(self):
        self.phase = P_CODE0
        self.buf = ""
        self.speaker = None
        self.word = []

    def copy(self) -> "SpokenState":
        st = SpokenState.__new__(SpokenState)
        st.prev_us = self.prev_us
        st.phase = self.phase
        st.buf = self.buf
        st.speaker = self.speaker
        st.word = list(self.word)
        st.pos = self.pos
        return st

    def signature(self) -> tuple:
        return (self.prev_us, self.phase, self.buf, self.speaker)

    def __eq__(self, other):
        return (isinstance(other, SpokenState)
                and self.signature() == other.signature()
                and self.word == other.word)

    def at_entry_start(self) -> bool:
        return self.phase == P_CODE0

    def partial_text(self) -> str:
        return "".join(self.word)

    def entry_time_us(self) -> int | None:
        """The current entry's timestamp, once its three digits are read."""
        if self.phase not in (P_SPEAKER, P_WORD0, P_WORD):
            return None
        code = int(self.buf)
        if self.prev_us is None:
            return code * US_PER_CENTISECOND
        delta = (code - time_to_code(self.prev_us)) % WINDOW_CODES
        return self.prev_us + delta * US_PER_CENTISECOND

    def entry_speaker(self) -> str | None:
        return self.speaker

    def step(self, ch: str) -> Event | None:
        self.pos += 1
        phase = self.phase
        if phase == P_WORD or phase == P_WORD0:
            if ch == EOM:
                if phase == P_WORD0:
                    raise DecodeError("empty word", self.pos)
                return self._finish_entry()
            if ch in _WS:
                raise DecodeError(f"whitespace {ch!r} inside word", self.pos)
            self.word.append(ch)
            self.phase = P_WORD
            return None
        if phase in (P_CODE0, P_CODE1, P_CODE2):
            if ch not in _DIGITS:
                raise DecodeError(f"expected timestamp digit, got {ch!r}",
                                  self.pos)
            self.buf += ch
            self.phase = phase + 1
            return None
        if phase == P_SPEAKER:
            if ch not in SPEAKERS:
                raise DecodeError(f"invalid speaker {ch!r}", self.pos)
            self.speaker = ch
            self.phase = P_WORD0
            return None
        raise AssertionError(f"unhandled phase {phase}")  # pragma: no cover

    def _finish_entry(self) -> Event:
        code = int(self.buf)
        if self.prev_us is None:
            t_us = code * US_PER_CENTISECOND
        else:
            delta = (code - time_to_code(self.prev_us)) % WINDOW_CODES
            t_us = self.prev_us + delta * US_PER_CENTISECOND
        event = Event(t_us, self.speaker, "".join(self.word))
        self.prev_us = t_us
        self._reset_entry()
        return event

    def legal_chars(self, min_time_us: int):
        phase = self.phase
        if phase == P_WORD:
            return WORD_OR_EOM
        if phase == P_WORD0:
            return WORD
        if phase == P_SPEAKER:
            return SPEAKERS
        # Timestamp digits: a code is legal when the delta it implies lands
        # at or after min_time_us.
        if self.prev_us is None:
            need = _ceil_div(max(min_time_us, 0), US_PER_CENTISECOND)
            if need >= WINDOW_CODES:
                return frozenset()
            return self._digits_reaching(lambda code: code >= need)
        need = _ceil_div(max(min_time_us - self.prev_us, 0), US_PER_CENTISECOND)
        if need >= WINDOW_CODES:
            return frozenset()
        if need == 0:
            return _DIGITS
        base = time_to_code(self.prev_us)
        return self._digits_reaching(
            lambda code: (code - base) % WINDOW_CODES >= need)

    def _digits_reaching(self, pred):
        out = set()
        done = len(self.buf)
        for dg in "0123456789":
            prefix = int(self.buf + dg)
            span = 10 ** (2 - done)
            lo = prefix * span
            if any(pred(code) for code in range(lo, lo + span)):
                out.add(dg)
        return frozenset(out)


def encode_entry(prev_us: int | None, event: Event,
                 alias_gap: bool = False) -> tuple[str, int]:
    """Render one entry; returns (text, this entry's truncated time)."""
    if len(event.speaker) != 1 or event.speaker not in SPEAKERS:
        raise EncodeError(f"invalid spoken speaker {event.speaker!r}")
    if not event.text:
        raise EncodeError("spoken word must be non-empty")
    if any(c in _WS for c in event.text):
        raise EncodeError(f"spoken word contains whitespace: {event.text!r}")
    t_us = truncate_us(event.time_us, US_PER_CENTISECOND)
    if t_us < 0:
        raise EncodeError("negative timestamps are unsupported")
    if prev_us is not None:
        if t_us < prev_us:
            raise EncodeError(f"non-monotonic event times ({t_us} < {prev_us})")
        if t_us - prev_us >= WINDOW_US:
            if alias_gap:
                t_us = prev_us + (t_us - prev_us) % WINDOW_US
            else:
                raise EncodeError(
                    f"gap of {(t_us - prev_us) / 1e6:.2f}s meets or exceeds "
                    "the 10s window and cannot be represented")
    code = time_to_code(t_us)
    return f"{code:03d}{event.speaker}{event.text}{EOM}", t_us


def decode_into(state: SpokenState, text: str) -> list[Event]:
    """Feed text through the state, collecting completed events."""
    events = []
    pos = 0
    n = len(text)
    while pos < n:
        if state.phase == P_WORD:
            idx = text.find(EOM, pos)
            end = n if idx == -1 else idx
            chunk = text[pos:end]
            for c in chunk:
                if c in _WS:
                    raise DecodeError(
                        f"whitespace {c!r} inside word",
                        state.pos + chunk.index(c) + 1)
            state.word.extend(chunk)
            state.pos += len(chunk)
            pos = end
            if idx != -1:
                state.pos += 1
                events.append(state._finish_entry())
                pos += 1
        else:
            ev = state.step(text[pos])
            if ev is not None:
                events.append(ev)
            pos += 1
    return events


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)

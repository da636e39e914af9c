"""Timed diarized transcript codecs.

Two wire formats share one contract: bit-exact, streaming, prefix-free
encode/decode of (time, speaker, text) events, plus continuation masks
that admit exactly the characters able to complete to a timestamp at or
after a floor ("time only flows forward").
"""

from __future__ import annotations

from typing import Union

from . import messenger, spoken
from .base import FREE_TEXT, WORD, WORD_OR_EOM, char_allowed
from .errors import CodecError, DecodeError, EncodeError
from .events import (
    FORMATS,
    GRANULARITY_US,
    MESSENGER,
    SPOKEN,
    Event,
    event_from_json,
    event_to_json,
    load_events,
    read_events,
    save_events,
    write_events,
)

CodecState = Union[messenger.MessengerState, spoken.SpokenState]

__all__ = [
    "CodecError", "CodecState", "DecodeError", "EncodeError", "Encoder",
    "Event", "FORMATS", "FREE_TEXT", "GRANULARITY_US", "MESSENGER", "SPOKEN",
    "StreamDecoder", "WORD", "WORD_OR_EOM", "char_allowed", "decode",
    "encode", "encode_entries", "eom_sentinel", "event_from_json",
    "event_to_json", "initial_state", "legal_continuations", "load_events",
    "read_events", "save_events", "write_events",
]


def initial_state(fmt: str, prev_time_us: int | None = None,
                  lenient: bool = False) -> CodecState:
    if fmt == MESSENGER:
        return messenger.MessengerState(prev_time_us, lenient=lenient)
    if fmt == SPOKEN:
        return spoken.SpokenState(prev_time_us)
    raise ValueError(f"unknown format {fmt!r}")


def eom_sentinel(fmt: str) -> str:
    return messenger.EOM if fmt == MESSENGER else spoken.EOM


class Encoder:
    """Incremental canonical encoder; tracks the previous timestamp so
    consecutive entries share prefixes."""

    def __init__(self, fmt: str, prev_time_us: int | None = None,
                 alias_gap: bool = False):
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}")
        self.fmt = fmt
        self.alias_gap = alias_gap
        self._prev_fields = None
        self._prev_us = None
        if prev_time_us is not None:
            self._set_prev(prev_time_us)

    def _set_prev(self, t_us: int):
        from ..timebase import truncate_us, us_to_fields
        t_us = truncate_us(t_us, GRANULARITY_US[self.fmt])
        self._prev_us = t_us
        if self.fmt == MESSENGER:
            self._prev_fields = us_to_fields(t_us)

    @property
    def prev_time_us(self) -> int | None:
        return self._prev_us

    def encode_event(self, event: Event) -> str:
        if self.fmt == MESSENGER:
            text, fields = messenger.encode_entry(self._prev_fields, event)
            self._prev_fields = fields
            from ..timebase import fields_to_us
            self._prev_us = fields_to_us(*fields)
        else:
            text, t_us = spoken.encode_entry(self._prev_us, event,
                                             alias_gap=self.alias_gap)
            self._prev_us = t_us
        return text


def encode_entries(events, fmt: str, prev_time_us: int | None = None,
                   alias_gap: bool = False) -> list[str]:
    """Canonical per-entry renderings (concatenate for the full stream)."""
    enc = Encoder(fmt, prev_time_us, alias_gap=alias_gap)
    return [enc.encode_event(ev) for ev in events]


def encode(events, fmt: str, prev_time_us: int | None = None,
           alias_gap: bool = False) -> str:
    return "".join(encode_entries(events, fmt, prev_time_us,
                                  alias_gap=alias_gap))


class StreamDecoder:
    """Incremental decoder; feed any chunking of the stream and collect
    events as their sentinels complete."""

    def __init__(self, fmt: str, prev_time_us: int | None = None,
                 lenient: bool = False, state: CodecState | None = None):
        self.fmt = fmt
        self.state = state if state is not None else initial_state(
            fmt, prev_time_us, lenient)

    def feed(self, text: str) -> list[Event]:
        if self.fmt == MESSENGER:
            return messenger.decode_into(self.state, text)
        return spoken.decode_into(self.state, text)

    def feed_char(self, ch: str) -> Event | None:
        return self.state.step(ch)


def decode(text: str, fmt: str, state: CodecState | None = None,
           prev_time_us: int | None = None,
           lenient: bool = False) -> tuple[list[Event], CodecState]:
    """Decode a (prefix of a) transcript stream.

    Returns the completed events and the final state; a stream ending
    mid-entry leaves the partial entry described by the state.
    """
    dec = StreamDecoder(fmt, prev_time_us, lenient, state)
    events = dec.feed(text)
    return events, dec.state


def legal_continuations(state: CodecState, min_time_us: int):
    """Characters that keep the stream grammatical and able to complete to
    a timestamp >= min_time_us; FREE_TEXT/WORD markers inside bodies."""
    return state.legal_chars(min_time_us)

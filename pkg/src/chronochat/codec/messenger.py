"""Streaming codec for the instant-messenger transcript format.

Entry layout (one per message, concatenated without separators):

    [timestamp suffix][speaker][text]<eom>

The full timestamp reads like ``2024February28W+22:32;13.8``: year, month
name, day, weekday code, then ``+HH:MM;SS.D``, all UTC, no spaces. Fields
repeated from the previous entry are omitted group-wise from the left
(groups: year+month, day+weekday, hour, minute, second); ``.D`` is always
rendered and every rendered field keeps its leading separator. The format
is prefix-free: a decoder never needs more than the next character to
know which field it is reading.

Lenient mode additionally accepts a separator-less minute form
(``33;03.6B...``) and downgrades weekday mismatches to warnings.
"""

from __future__ import annotations

import logging
from functools import lru_cache

from ..timebase import (
    MONTH_NAMES,
    US_PER_DECISECOND,
    WEEKDAY_CODES,
    civil_weekday,
    days_in_month,
    fields_to_us,
    truncate_us,
    us_to_fields,
)
from .base import FREE_TEXT
from .errors import DecodeError, EncodeError
from .events import Event

logger = logging.getLogger(__name__)

EOM = "<eom>"
SPEAKERS = ("A", "B")

# Timestamp groups, coarse to fine. Omission drops a prefix of this list;
# G_DSEC is rendered unconditionally.
G_FULL, G_DAY, G_HOUR, G_MINUTE, G_SECOND, G_DSEC = range(6)

# Parser phases.
(P_ENTRY, P_AMBIG1, P_AMBIG2, P_YEAR3, P_MONTH, P_DAY0, P_DAY1, P_WDAY,
 P_PLUS, P_HOUR0, P_HOUR1, P_COLON, P_MIN0, P_MIN1, P_SEMI, P_SEC0, P_SEC1,
 P_DOT, P_DSEC, P_SPEAKER, P_MSG) = range(21)

_DIGITS = frozenset("0123456789")


def _prefix_maps(names):
    nxt: dict[str, set] = {}
    complete: dict[str, int] = {}
    for i, name in enumerate(names):
        complete[name] = i
        for k in range(len(name)):
            nxt.setdefault(name[:k], set()).add(name[k])
    return {k: frozenset(v) for k, v in nxt.items()}, complete


MONTH_NEXT, _MONTH_COMPLETE = _prefix_maps(MONTH_NAMES)
MONTH_COMPLETE = {name: i + 1 for name, i in _MONTH_COMPLETE.items()}
WDAY_NEXT, WDAY_COMPLETE = _prefix_maps(WEEKDAY_CODES)

# How many of (year, month, day, hour, minute, second) are inherited from
# the previous timestamp for each start group.
_INHERITED = {G_FULL: 0, G_DAY: 2, G_HOUR: 3, G_MINUTE: 4, G_SECOND: 5,
              G_DSEC: 6}


@lru_cache(maxsize=65536)
def _max_completion_us(y, mo, d, h, mi, s):
    """Largest decisecond-truncated time reachable when the given fields are
    fixed and the remaining (None) fields are still free."""
    if y is None or y < 1:
        return -1
    mo = 12 if mo is None else mo
    d = days_in_month(y, mo) if d is None else d
    h = 23 if h is None else h
    mi = 59 if mi is None else mi
    s = 59 if s is None else s
    try:
        return fields_to_us(y, mo, d, h, mi, s, 9)
    except (ValueError, OverflowError, OSError):
        return -1


class MessengerState:
    """Decoder state: previous timestamp plus position within the current
    entry. A deterministic function of the characters consumed; cheap to
    copy, hash and compare."""

    __slots__ = ("prev", "prev_us", "lenient", "phase", "buf", "mprefix",
                 "wprefix", "start_group", "year", "month", "day", "hour",
                 "minute", "second", "dsec", "speaker", "msg", "kmp", "pos")

    def __init__(self, prev_time_us: int | None = None, lenient: bool = False):
        self.prev = None if prev_time_us is None else us_to_fields(
            truncate_us(prev_time_us, US_PER_DECISECOND))
        self.prev_us = (None if prev_time_us is None
                        else truncate_us(prev_time_us, US_PER_DECISECOND))
        self.lenient = lenient
        self.pos = 0
        self._reset_entry()

    def _reset_entry(self):
        self.phase = P_ENTRY
        self.buf = ""
        self.mprefix = ""
        self.wprefix = ""
        self.start_group = G_FULL
        self.year = self.month = self.day = None
        self.hour = self.minute = self.second = self.dsec = None
        self.speaker = None
        self.msg = []
        self.kmp = 0

    def copy(self) -> "MessengerState":
        st = MessengerState.__new__(MessengerState)
        for name in self.__slots__:
            setattr(st, name, getattr(self, name))
        st.msg = list(self.msg)
        return st

    def signature(self) -> tuple:
        # Message text does not influence grammar decisions; only the
        # sentinel match counter does.
        return (self.prev_us, self.lenient, self.phase, self.buf,
                self.mprefix, self.wprefix, self.start_group, self.year,
                self.month, self.day, self.hour, self.minute, self.second,
                self.dsec, self.speaker, self.kmp)

    def __eq__(self, other):
        return (isinstance(other, MessengerState)
                and self.signature() == other.signature()
                and self.msg == other.msg)

    def at_entry_start(self) -> bool:
        return self.phase == P_ENTRY

    def partial_text(self) -> str:
        """Message text accumulated so far, excluding a half-read sentinel."""
        if self.kmp:
            return "".join(self.msg[:-self.kmp])
        return "".join(self.msg)

    def entry_time_us(self) -> int | None:
        """The current entry's timestamp, once fully parsed."""
        if self.phase not in (P_SPEAKER, P_MSG):
            return None
        vals = self._eff()
        return fields_to_us(*vals, self.dsec)

    def entry_speaker(self) -> str | None:
        return self.speaker

    # Effective (so far known) calendar context, inherited where omitted.
    def _eff(self):
        inherited = _INHERITED[self.start_group]
        vals = [self.year, self.month, self.day, self.hour, self.minute,
                self.second]
        if self.prev is not None:
            for i in range(inherited):
                vals[i] = self.prev[i]
        return vals

    # ------------------------------------------------------------------
    # Decoding
    # ------------------------------------------------------------------

    def step(self, ch: str) -> Event | None:
        """Consume one character; return a finished Event when the entry's
        sentinel completes, else None. Raises DecodeError on malformed
        input."""
        phase = self.phase
        self.pos += 1
        if phase == P_MSG:
            self.msg.append(ch)
            if ch == EOM[self.kmp]:
                self.kmp += 1
                if self.kmp == len(EOM):
                    return self._finish_entry()
            elif ch == "<":
                self.kmp = 1
            else:
                self.kmp = 0
            return None
        if phase == P_ENTRY:
            if ch in _DIGITS:
                self.buf = ch
                self.phase = P_AMBIG1
            elif ch == "+":
                self._require_prev(ch)
                self.start_group = G_HOUR
                self.phase = P_HOUR0
            elif ch == ":":
                self._require_prev(ch)
                self.start_group = G_MINUTE
                self.phase = P_MIN0
            elif ch == ";":
                self._require_prev(ch)
                self.start_group = G_SECOND
                self.phase = P_SEC0
            elif ch == ".":
                self._require_prev(ch)
                self.start_group = G_DSEC
                self.phase = P_DSEC
            else:
                raise DecodeError(f"unexpected {ch!r} at entry start", self.pos)
        elif phase == P_AMBIG1:
            if ch not in _DIGITS:
                raise DecodeError(f"expected digit, got {ch!r}", self.pos)
            self.buf += ch
            self.phase = P_AMBIG2
        elif phase == P_AMBIG2:
            if ch in _DIGITS:
                self.buf += ch
                self.phase = P_YEAR3
            elif ch in WDAY_NEXT[""]:
                self._require_prev(ch)
                self._commit_day(int(self.buf), explicit_ym=False)
                self.start_group = G_DAY
                self._wday_step(ch)
            elif ch == ";" and self.lenient:
                self._require_prev(ch)
                self._commit_minute(int(self.buf))
                self.start_group = G_MINUTE
                self.phase = P_SEC0
            else:
                raise DecodeError(
                    f"unexpected {ch!r} after digits {self.buf!r}", self.pos)
        elif phase == P_YEAR3:
            if ch not in _DIGITS:
                raise DecodeError(f"expected year digit, got {ch!r}", self.pos)
            self.year = int(self.buf + ch)
            if self.year == 0:
                raise DecodeError("year 0000 is not a valid date", self.pos)
            self.buf = ""
            self.phase = P_MONTH
        elif phase == P_MONTH:
            prefix = self.mprefix + ch
            if prefix in MONTH_COMPLETE:
                self.month = MONTH_COMPLETE[prefix]
                self.mprefix = ""
                self.phase = P_DAY0
            elif prefix in MONTH_NEXT:
                self.mprefix = prefix
            else:
                raise DecodeError(f"unknown month name at {prefix!r}", self.pos)
        elif phase == P_DAY0:
            if ch not in _DIGITS:
                raise DecodeError(f"expected day digit, got {ch!r}", self.pos)
            self.buf = ch
            self.phase = P_DAY1
        elif phase == P_DAY1:
            if ch not in _DIGITS:
                raise DecodeError(f"expected day digit, got {ch!r}", self.pos)
            self._commit_day(int(self.buf + ch), explicit_ym=True)
        elif phase == P_WDAY:
            self._wday_step(ch)
        elif phase == P_PLUS:
            if ch != "+":
                raise DecodeError(f"expected '+', got {ch!r}", self.pos)
            self.phase = P_HOUR0
        elif phase == P_HOUR0:
            self._digit(ch, "hour")
            self.buf = ch
            self.phase = P_HOUR1
        elif phase == P_HOUR1:
            self._digit(ch, "hour")
            self.hour = int(self.buf + ch)
            if self.hour > 23:
                raise DecodeError(f"hour {self.hour} > 23", self.pos)
            self.phase = P_COLON
        elif phase == P_COLON:
            if ch != ":":
                raise DecodeError(f"expected ':', got {ch!r}", self.pos)
            self.phase = P_MIN0
        elif phase == P_MIN0:
            self._digit(ch, "minute")
            self.buf = ch
            self.phase = P_MIN1
        elif phase == P_MIN1:
            self._digit(ch, "minute")
            self._commit_minute(int(self.buf + ch))
            self.phase = P_SEMI
        elif phase == P_SEMI:
            if ch != ";":
                raise DecodeError(f"expected ';', got {ch!r}", self.pos)
            self.phase = P_SEC0
        elif phase == P_SEC0:
            self._digit(ch, "second")
            self.buf = ch
            self.phase = P_SEC1
        elif phase == P_SEC1:
            self._digit(ch, "second")
            self.second = int(self.buf + ch)
            if self.second > 59:
                raise DecodeError(f"second {self.second} > 59", self.pos)
            self.phase = P_DOT
        elif phase == P_DOT:
            if ch != ".":
                raise DecodeError(f"expected '.', got {ch!r}", self.pos)
            self.phase = P_DSEC
        elif phase == P_DSEC:
            self._digit(ch, "decisecond")
            self.dsec = int(ch)
            self.phase = P_SPEAKER
        elif phase == P_SPEAKER:
            if ch not in SPEAKERS:
                raise DecodeError(f"invalid speaker {ch!r}", self.pos)
            self.speaker = ch
            self.phase = P_MSG
        return None

    def _digit(self, ch, what):
        if ch not in _DIGITS:
            raise DecodeError(f"expected {what} digit, got {ch!r}", self.pos)

    def _require_prev(self, ch):
        if self.prev is None:
            raise DecodeError(
                f"{ch!r} needs a previous timestamp to inherit from", self.pos)

    def _commit_day(self, day, explicit_ym):
        if explicit_ym:
            y, mo = self.year, self.month
        else:
            y, mo = self.prev[0], self.prev[1]
        if not 1 <= day <= days_in_month(y, mo):
            raise DecodeError(
                f"day {day:02d} invalid for {MONTH_NAMES[mo - 1]} {y}", self.pos)
        self.day = day
        self.wprefix = ""
        self.phase = P_WDAY

    def _commit_minute(self, minute):
        if minute > 59:
            raise DecodeError(f"minute {minute} > 59", self.pos)
        self.minute = minute

    def _wday_step(self, ch):
        prefix = self.wprefix + ch
        if prefix in WDAY_COMPLETE:
            eff = self._eff()
            expected = WEEKDAY_CODES[civil_weekday(eff[0], eff[1], eff[2])]
            if prefix != expected:
                if self.lenient:
                    logger.warning(
                        "weekday %s disagrees with civil date (%04d-%02d-%02d"
                        " is %s)", prefix, eff[0], eff[1], eff[2], expected)
                else:
                    raise DecodeError(
                        f"weekday {prefix} disagrees with date "
                        f"{eff[0]:04d}-{eff[1]:02d}-{eff[2]:02d} ({expected})",
                        self.pos)
            self.wprefix = ""
            self.phase = P_PLUS
        elif prefix in WDAY_NEXT:
            self.wprefix = prefix
        else:
            raise DecodeError(f"unknown weekday at {prefix!r}", self.pos)

    def _finish_entry(self) -> Event:
        vals = self._eff()
        y, mo, d, h, mi, s = vals
        try:
            t_us = fields_to_us(y, mo, d, h, mi, s, self.dsec)
        except (ValueError, OverflowError, OSError) as exc:
            raise DecodeError(f"invalid timestamp: {exc}", self.pos) from None
        if t_us < 0:
            raise DecodeError("timestamps before 1970 are unsupported", self.pos)
        if self.prev_us is not None and t_us < self.prev_us:
            raise DecodeError(
                f"timestamp regression: decoded {t_us} < previous "
                f"{self.prev_us}", self.pos)
        event = Event(t_us, self.speaker, "".join(self.msg[:-len(EOM)]))
        self.prev = (y, mo, d, h, mi, s, self.dsec)
        self.prev_us = t_us
        self._reset_entry()
        return event

    # ------------------------------------------------------------------
    # Continuation masks
    # ------------------------------------------------------------------

    def legal_chars(self, min_time_us: int):
        """Characters that keep the stream grammatical and completable to a
        timestamp >= min_time_us. Returns FREE_TEXT inside a message body."""
        phase = self.phase
        if phase == P_MSG:
            return FREE_TEXT
        if phase == P_SPEAKER:
            return frozenset(SPEAKERS)
        eff = self._eff()
        ok = _max_completion_us
        out = set()
        if phase == P_ENTRY:
            p = self.prev
            for dg in "0123456789":
                if self._year_digit_ok(dg, min_time_us):
                    out.add(dg)
                elif p is not None and self._day_decade_ok(
                        int(dg), p[0], p[1], min_time_us):
                    out.add(dg)
                elif (self.lenient and p is not None
                      and self._minute_decade_ok(int(dg), min_time_us)):
                    out.add(dg)
            if p is not None:
                if ok(p[0], p[1], p[2], None, None, None) >= min_time_us:
                    out.add("+")
                if ok(p[0], p[1], p[2], p[3], None, None) >= min_time_us:
                    out.add(":")
                if ok(p[0], p[1], p[2], p[3], p[4], None) >= min_time_us:
                    out.add(";")
                if fields_to_us(p[0], p[1], p[2], p[3], p[4], p[5], 9) >= min_time_us:
                    out.add(".")
            return frozenset(out)
        if phase == P_AMBIG1:
            p = self.prev
            for dg in "0123456789":
                if self._year_digit_ok(dg, min_time_us):
                    out.add(dg)
                    continue
                if p is not None:
                    day = int(self.buf + dg)
                    if (1 <= day <= days_in_month(p[0], p[1])
                            and ok(p[0], p[1], day, None, None, None)
                            >= min_time_us):
                        out.add(dg)
                        continue
                    if self.lenient:
                        minute = int(self.buf + dg)
                        if (minute <= 59 and ok(p[0], p[1], p[2], p[3], minute,
                                                None) >= min_time_us):
                            out.add(dg)
            return frozenset(out)
        if phase == P_AMBIG2:
            p = self.prev
            for dg in "0123456789":
                if self._year_digit_ok(dg, min_time_us):
                    out.add(dg)
            if p is not None:
                day = int(self.buf)
                if (1 <= day <= days_in_month(p[0], p[1])
                        and ok(p[0], p[1], day, None, None, None) >= min_time_us):
                    out.add(WEEKDAY_CODES[civil_weekday(p[0], p[1], day)][0])
                if self.lenient:
                    minute = int(self.buf)
                    if (minute <= 59 and ok(p[0], p[1], p[2], p[3], minute,
                                            None) >= min_time_us):
                        out.add(";")
            return frozenset(out)
        if phase == P_YEAR3:
            for dg in "0123456789":
                y = int(self.buf + dg)
                if y >= 1 and ok(y, None, None, None, None, None) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_MONTH:
            for ch in MONTH_NEXT.get(self.mprefix, ()):
                prefix = self.mprefix + ch
                months = ([MONTH_COMPLETE[prefix]] if prefix in MONTH_COMPLETE
                          else [m for n, m in MONTH_COMPLETE.items()
                                if n.startswith(prefix)])
                if any(ok(self.year, m, None, None, None, None) >= min_time_us
                       for m in months):
                    out.add(ch)
            return frozenset(out)
        if phase == P_DAY0:
            for dg in "0123456789":
                if self._day_decade_ok(int(dg), self.year, self.month,
                                       min_time_us):
                    out.add(dg)
            return frozenset(out)
        if phase == P_DAY1:
            for dg in "0123456789":
                day = int(self.buf + dg)
                if (1 <= day <= days_in_month(self.year, self.month)
                        and ok(self.year, self.month, day, None, None, None)
                        >= min_time_us):
                    out.add(dg)
            return frozenset(out)
        if phase == P_WDAY:
            expected = WEEKDAY_CODES[civil_weekday(eff[0], eff[1], eff[2])]
            if expected.startswith(self.wprefix) and len(expected) > len(self.wprefix):
                return frozenset(expected[len(self.wprefix)])
            return frozenset()
        if phase == P_PLUS:
            return frozenset("+")
        if phase == P_HOUR0:
            for dg in "012":
                hmax = 23 if dg == "2" else int(dg) * 10 + 9
                if ok(eff[0], eff[1], eff[2], hmax, None, None) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_HOUR1:
            for dg in "0123456789":
                h = int(self.buf + dg)
                if h <= 23 and ok(eff[0], eff[1], eff[2], h, None, None) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_COLON:
            return frozenset(":")
        if phase == P_MIN0:
            for dg in "012345":
                mmax = int(dg) * 10 + 9
                if ok(eff[0], eff[1], eff[2], eff[3], mmax, None) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_MIN1:
            for dg in "0123456789":
                mi = int(self.buf + dg)
                if mi <= 59 and ok(eff[0], eff[1], eff[2], eff[3], mi, None) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_SEMI:
            return frozenset(";")
        if phase == P_SEC0:
            for dg in "012345":
                smax = int(dg) * 10 + 9
                if ok(eff[0], eff[1], eff[2], eff[3], eff[4], smax) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_SEC1:
            for dg in "0123456789":
                s = int(self.buf + dg)
                if s <= 59 and ok(eff[0], eff[1], eff[2], eff[3], eff[4], s) >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        if phase == P_DOT:
            return frozenset(".")
        if phase == P_DSEC:
            base = fields_to_us(eff[0], eff[1], eff[2], eff[3], eff[4], eff[5], 0)
            for dg in "0123456789":
                if base + int(dg) * US_PER_DECISECOND >= min_time_us:
                    out.add(dg)
            return frozenset(out)
        raise AssertionError(f"unhandled phase {phase}")

    def _year_digit_ok(self, dg: str, min_time_us: int) -> bool:
        filled = self.buf + dg
        ymax = int(filled + "9" * (4 - len(filled)))
        if ymax < 1:
            return False
        return _max_completion_us(ymax, None, None, None, None, None) >= min_time_us

    def _day_decade_ok(self, d1: int, y: int, mo: int, min_time_us: int) -> bool:
        hi = min(d1 * 10 + 9, days_in_month(y, mo))
        if hi < max(1, d1 * 10):
            return False
        return _max_completion_us(y, mo, hi, None, None, None) >= min_time_us

    def _minute_decade_ok(self, d1: int, min_time_us: int) -> bool:
        p = self.prev
        hi = min(d1 * 10 + 9, 59)
        return _max_completion_us(p[0], p[1], p[2], p[3], hi, None) >= min_time_us


# ----------------------------------------------------------------------
# Encoding
# ----------------------------------------------------------------------

def encode_entry(prev_fields: tuple | None, event: Event) -> tuple[str, tuple]:
    """Render one entry against the previous timestamp fields.

    Returns (entry text, this entry's timestamp fields). Timestamps are
    truncated to deciseconds; the rendered suffix is the shortest one that
    reconstructs the full timestamp.
    """
    if event.speaker not in SPEAKERS:
        raise EncodeError(f"invalid messenger speaker {event.speaker!r}")
    if EOM in event.text:
        raise EncodeError(f"message text contains the reserved sentinel {EOM!r}")
    t_us = truncate_us(event.time_us, US_PER_DECISECOND)
    if t_us < 0:
        raise EncodeError("negative timestamps are unsupported")
    cur = us_to_fields(t_us)
    if prev_fields is not None:
        prev_us = fields_to_us(*prev_fields)
        if t_us < prev_us:
            raise EncodeError(
                f"non-monotonic event times ({t_us} < {prev_us})")
    return (timestamp_suffix(prev_fields, cur) + event.speaker + event.text
            + EOM), cur


def timestamp_suffix(prev_fields: tuple | None, cur: tuple) -> str:
    """Shortest timestamp rendering that reconstructs `cur` against the
    previous timestamp fields."""
    y, mo, d, h, mi, s, ds = cur
    if prev_fields is None:
        group = G_FULL
    elif (y, mo) != prev_fields[:2]:
        group = G_FULL
    elif d != prev_fields[2]:
        group = G_DAY
    elif h != prev_fields[3]:
        group = G_HOUR
    elif mi != prev_fields[4]:
        group = G_MINUTE
    elif s != prev_fields[5]:
        group = G_SECOND
    else:
        group = G_DSEC
    parts = []
    if group <= G_FULL:
        parts.append(f"{y:04d}{MONTH_NAMES[mo - 1]}")
    if group <= G_DAY:
        parts.append(f"{d:02d}{WEEKDAY_CODES[civil_weekday(y, mo, d)]}")
    if group <= G_HOUR:
        parts.append(f"+{h:02d}")
    if group <= G_MINUTE:
        parts.append(f":{mi:02d}")
    if group <= G_SECOND:
        parts.append(f";{s:02d}")
    parts.append(f".{ds}")
    return "".join(parts)


def render_timestamp(prev_time_us: int | None, time_us: int) -> str:
    """Timestamp suffix for a time, given the previous entry's time."""
    prev = (None if prev_time_us is None
            else us_to_fields(truncate_us(prev_time_us, US_PER_DECISECOND)))
    return timestamp_suffix(
        prev, us_to_fields(truncate_us(time_us, US_PER_DECISECOND)))


def decode_into(state: MessengerState, text: str) -> list[Event]:
    """Feed text through the state, collecting completed events.

    Uses a fast scan for message bodies; byte-for-byte equivalent to
    calling ``state.step`` per character.
    """
    events = []
    pos = 0
    n = len(text)
    while pos < n:
        if state.phase == P_MSG and state.kmp == 0:
            idx = text.find(EOM, pos)
            if idx == -1:
                # Whole tail is body text, possibly ending inside a sentinel.
                tail = text[pos:]
                for k in range(min(len(EOM) - 1, len(tail)), 0, -1):
                    if tail.endswith(EOM[:k]):
                        state.kmp = k
                        break
                state.msg.extend(tail)
                state.pos += len(tail)
                break
            state.msg.extend(text[pos:idx])
            state.msg.extend(EOM)
            state.pos += idx - pos + len(EOM)
            state.kmp = len(EOM)
            events.append(state._finish_entry())
            pos = idx + len(EOM)
        else:
            ev = state.step(text[pos])
            if ev is not None:
                events.append(ev)
            pos += 1
    return events

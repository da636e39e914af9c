"""Time units and conversions.

All engine-internal times are integer microseconds: absolute UTC epoch
microseconds for messenger transcripts, microseconds since session start
for spoken ones. Floats appear only at the edges (CLI flags, stats).
"""

from __future__ import annotations

import re
from datetime import datetime, timezone

US_PER_SECOND = 1_000_000
US_PER_DECISECOND = 100_000
US_PER_CENTISECOND = 10_000
US_PER_MS = 1_000

MONTH_NAMES = (
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December",
)
# Monday-first, matching datetime.weekday().
WEEKDAY_CODES = ("M", "Tu", "W", "Th", "F", "Sa", "Su")

_DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)

_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(us|ms|s|m|h|d)?\s*$")
_DURATION_UNITS = {
    "us": 1,
    "ms": US_PER_MS,
    "s": US_PER_SECOND,
    "m": 60 * US_PER_SECOND,
    "h": 3600 * US_PER_SECOND,
    "d": 86400 * US_PER_SECOND,
}


def is_leap_year(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def days_in_month(year: int, month: int) -> int:
    if month == 2 and is_leap_year(year):
        return 29
    return _DAYS_IN_MONTH[month - 1]


def civil_weekday(year: int, month: int, day: int) -> int:
    """Day of week, 0 = Monday, for a proleptic Gregorian date."""
    return datetime(year, month, day).weekday()


def fields_to_us(year: int, month: int, day: int, hour: int, minute: int,
                 second: int, dsec: int) -> int:
    """UTC civil fields (decisecond resolution) to epoch microseconds."""
    dt = datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)
    return int(dt.timestamp()) * US_PER_SECOND + dsec * US_PER_DECISECOND


def us_to_fields(t_us: int) -> tuple[int, int, int, int, int, int, int]:
    """Epoch microseconds to UTC (year, month, day, hour, minute, second, dsec)."""
    dt = datetime.fromtimestamp(t_us // US_PER_SECOND, tz=timezone.utc)
    dsec = (t_us // US_PER_DECISECOND) % 10
    return (dt.year, dt.month, dt.day, dt.hour, dt.minute, dt.second, dsec)


def truncate_us(t_us: int, granularity_us: int) -> int:
    return t_us - (t_us % granularity_us)


def parse_duration_us(text: str) -> int:
    """Parse a human duration like '200ms', '0.2s', '5m' into microseconds.

    A bare number is read as seconds.
    """
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"unparseable duration: {text!r}")
    value, unit = m.group(1), m.group(2) or "s"
    return round(float(value) * _DURATION_UNITS[unit])


def format_us(t_us: int) -> str:
    """Readable rendering for logs: seconds with microsecond precision."""
    return f"{t_us / US_PER_SECOND:.6f}s"

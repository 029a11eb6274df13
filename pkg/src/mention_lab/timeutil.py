"""Timestamp parsing/formatting and half-open time windows."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from dateutil.relativedelta import relativedelta


def parse_ts(value: str | datetime) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime.

    Naive inputs are taken to be UTC already.
    """
    if isinstance(value, datetime):
        dt = value
    else:
        text = value.strip()
        if text.endswith("Z") or text.endswith("z"):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_ts(dt: datetime) -> str:
    dt = parse_ts(dt)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def add_months(dt: datetime, months: int) -> datetime:
    """Calendar-month arithmetic; day-of-month is clamped (Jan 31 + 1 month = Feb 28/29)."""
    return dt + relativedelta(months=months)


@dataclass(frozen=True)
class Window:
    """Half-open interval ``[start, end)``. ``None`` leaves that side unbounded."""

    start: datetime | None = None
    end: datetime | None = None

    def __contains__(self, ts: datetime) -> bool:
        if self.start is not None and ts < self.start:
            return False
        if self.end is not None and ts >= self.end:
            return False
        return True

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``START..END``; either side may be empty."""
        if ".." not in text:
            raise ValueError(f"window must look like START..END, got {text!r}")
        lo, hi = text.split("..", 1)
        return cls(parse_ts(lo) if lo.strip() else None, parse_ts(hi) if hi.strip() else None)

    def __str__(self) -> str:
        lo = format_ts(self.start) if self.start else ""
        hi = format_ts(self.end) if self.end else ""
        return f"{lo}..{hi}"

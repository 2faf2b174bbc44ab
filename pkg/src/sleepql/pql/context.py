"""Evaluation context: the fixed clock and user scope queries run against.

``now`` is injected everywhere a query would otherwise consult the wall
clock, so identical (plan, store, context) triples always produce identical
results.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timezone
from functools import cached_property
from zoneinfo import ZoneInfo


@dataclass(frozen=True)
class EvalContext:
    now: datetime  # aware instant
    user_id: str
    timezone: str = "UTC"

    def __post_init__(self):
        if self.now.tzinfo is None:
            raise ValueError("EvalContext.now must be timezone-aware")
        object.__setattr__(self, "now", self.now.astimezone(timezone.utc))

    @cached_property
    def tz(self) -> ZoneInfo:
        return ZoneInfo(self.timezone)

    @property
    def local_now(self) -> datetime:
        return self.now.astimezone(self.tz)

    @property
    def local_today(self) -> date:
        return self.local_now.date()

"""Seeded synthetic sensor data for validation and demos.

Generates raw activity and sleep documents as plain dicts in the exact
shape the store ingests from JSONL. Everything is driven by one numpy
generator with a fixed draw order, so a seed pins the dataset down to
the last decimal regardless of which anomaly overrides are applied
(values are drawn first and overridden after).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone as dt_timezone
from pathlib import Path
from typing import Optional
from zoneinfo import ZoneInfo

import numpy as np

SLEEP_DEVICE = "mattress-001"
ACTIVITY_DEVICE = "watch-001"
# Secondary devices used when a fixture needs overlapping records.
SLEEP_SHADOW_DEVICE = "watch-001"
ACTIVITY_SHADOW_DEVICE = "mattress-001"

DEMO_USER = "demo"
DEMO_TIMEZONE = "Asia/Seoul"
DEMO_START = date(2025, 6, 10)
DEMO_DAYS = 30


@dataclass(frozen=True)
class Distributions:
    """Nightly/daily sampling parameters; all normal or uniform."""

    total_sleep_mean: float = 420.0
    total_sleep_sd: float = 45.0
    total_sleep_lo: float = 180.0
    total_sleep_hi: float = 600.0
    deep_frac_lo: float = 0.13
    deep_frac_hi: float = 0.23
    rem_frac_lo: float = 0.18
    rem_frac_hi: float = 0.25
    waso_mean: float = 35.0
    waso_sd: float = 12.0
    snoring_mean: float = 600.0
    snoring_sd: float = 300.0
    apnea_rate: float = 2.0
    steps_mean: float = 6000.0
    steps_sd: float = 1500.0
    calories_mean: float = 2100.0
    calories_sd: float = 180.0
    hr_mean: float = 72.0
    hr_sd: float = 4.0


@dataclass(frozen=True)
class AnomalySpec:
    """Deterministic post-draw overrides keyed by day index (0-based).

    `steps_scale` multiplies the drawn value; the `*_set` maps replace it
    outright. `drop_sleep_days` / `drop_activity_days` omit the document
    for those days entirely. `duplicate_devices` emits a second copy of
    every document from the other device class, values scaled by
    `duplicate_scale`, to exercise priority-based deduplication.
    """

    steps_scale: dict[int, float] = field(default_factory=dict)
    steps_set: dict[int, float] = field(default_factory=dict)
    total_sleep_set: dict[int, float] = field(default_factory=dict)
    deep_set: dict[int, float] = field(default_factory=dict)
    drop_sleep_days: frozenset[int] = frozenset()
    drop_activity_days: frozenset[int] = frozenset()
    duplicate_devices: bool = False
    duplicate_scale: float = 0.9


@dataclass(frozen=True)
class Dataset:
    """Raw documents plus the identity they belong to."""

    user_id: str
    timezone: str
    start_date: date
    days: int
    sleep_docs: tuple[dict, ...]
    activity_docs: tuple[dict, ...]

    @property
    def end_date(self) -> date:
        return self.start_date + timedelta(days=self.days - 1)

    def day(self, index: int) -> date:
        if not 0 <= index < self.days:
            raise IndexError(f"day index {index} outside 0..{self.days - 1}")
        return self.start_date + timedelta(days=index)

    def write_jsonl(self, out_dir: Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        sleep_path = out_dir / "sleep.jsonl"
        activity_path = out_dir / "activity.jsonl"
        for path, docs in ((sleep_path, self.sleep_docs),
                           (activity_path, self.activity_docs)):
            with open(path, "w", encoding="utf-8") as fh:
                for doc in docs:
                    fh.write(json.dumps(doc, sort_keys=True) + "\n")
        return sleep_path, activity_path


def _round2(value: float) -> float:
    return float(round(value, 2))


def generate_dataset(seed: int,
                     days: int = DEMO_DAYS,
                     *,
                     start_date: date = DEMO_START,
                     timezone: str = DEMO_TIMEZONE,
                     user_id: str = DEMO_USER,
                     distributions: Optional[Distributions] = None,
                     anomalies: Optional[AnomalySpec] = None) -> Dataset:
    """One sleep session and one activity summary per calendar day.

    The session for day `d` ends on the morning of `d` (bedtime is the
    prior evening), so its wake-date attribution is `d` in the dataset's
    timezone, matching the activity summary for `d`.
    """
    dist = distributions or Distributions()
    spec = anomalies or AnomalySpec()
    rng = np.random.default_rng(seed)
    tz = ZoneInfo(timezone)

    sleep_docs: list[dict] = []
    activity_docs: list[dict] = []
    for index in range(days):
        day = start_date + timedelta(days=index)

        # Draw every quantity unconditionally to keep the stream aligned.
        total_min = float(np.clip(rng.normal(dist.total_sleep_mean,
                                             dist.total_sleep_sd),
                                  dist.total_sleep_lo, dist.total_sleep_hi))
        deep_frac = float(rng.uniform(dist.deep_frac_lo, dist.deep_frac_hi))
        rem_frac = float(rng.uniform(dist.rem_frac_lo, dist.rem_frac_hi))
        waso_min = float(max(0.0, rng.normal(dist.waso_mean, dist.waso_sd)))
        snoring_s = float(max(0.0, rng.normal(dist.snoring_mean,
                                              dist.snoring_sd)))
        apnea = int(rng.poisson(dist.apnea_rate))
        bed_offset_min = float(rng.uniform(-20.0, 20.0))
        sleep_hr = float(rng.normal(dist.hr_mean - 14.0, dist.hr_sd))

        steps = float(max(0.0, rng.normal(dist.steps_mean, dist.steps_sd)))
        calories = float(max(0.0, rng.normal(dist.calories_mean,
                                             dist.calories_sd)))
        hr_avg = float(rng.normal(dist.hr_mean, dist.hr_sd))
        hr_spread_lo = float(rng.uniform(12.0, 22.0))
        hr_spread_hi = float(rng.uniform(28.0, 55.0))

        if index in spec.total_sleep_set:
            total_min = float(spec.total_sleep_set[index])
        deep_min = deep_frac * total_min
        if index in spec.deep_set:
            deep_min = float(spec.deep_set[index])
        rem_min = rem_frac * total_min
        if deep_min + rem_min > total_min:
            rem_min = max(0.0, total_min - deep_min)
        light_min = max(0.0, total_min - deep_min - rem_min)

        if index in spec.steps_set:
            steps = float(spec.steps_set[index])
        if index in spec.steps_scale:
            steps *= float(spec.steps_scale[index])

        bedtime_local = datetime.combine(day - timedelta(days=1),
                                         time(23, 0), tzinfo=tz)
        start_dt = bedtime_local + timedelta(minutes=bed_offset_min)
        end_dt = start_dt + timedelta(minutes=total_min + waso_min)
        start_epoch = start_dt.timestamp()
        end_epoch = end_dt.timestamp()

        if index not in spec.drop_sleep_days:
            sleep = {
                "device_id": SLEEP_DEVICE,
                "start_epoch": start_epoch,
                "end_epoch": end_epoch,
                "timezone": timezone,
                "light_seconds": _round2(light_min * 60.0),
                "deep_seconds": _round2(deep_min * 60.0),
                "rem_seconds": _round2(rem_min * 60.0),
                "waso_seconds": _round2(waso_min * 60.0),
                "apnea_events": apnea,
                "snoring_seconds": _round2(snoring_s),
                "hr_avg": _round2(sleep_hr),
            }
            sleep_docs.append(sleep)
            if spec.duplicate_devices:
                shadow = dict(sleep)
                shadow["device_id"] = SLEEP_SHADOW_DEVICE
                for key in ("light_seconds", "deep_seconds", "rem_seconds",
                            "waso_seconds", "snoring_seconds"):
                    shadow[key] = _round2(sleep[key] * spec.duplicate_scale)
                sleep_docs.append(shadow)

        if index not in spec.drop_activity_days:
            activity = {
                "device_id": ACTIVITY_DEVICE,
                "date": day.isoformat(),
                "timezone": timezone,
                "steps": int(round(steps)),
                "calories": _round2(calories),
                "hr_avg": _round2(hr_avg),
                "hr_min": _round2(hr_avg - hr_spread_lo),
                "hr_max": _round2(hr_avg + hr_spread_hi),
            }
            activity_docs.append(activity)
            if spec.duplicate_devices:
                shadow = dict(activity)
                shadow["device_id"] = ACTIVITY_SHADOW_DEVICE
                shadow["steps"] = int(round(activity["steps"]
                                            * spec.duplicate_scale))
                shadow["calories"] = _round2(activity["calories"]
                                             * spec.duplicate_scale)
                activity_docs.append(shadow)

    return Dataset(user_id=user_id, timezone=timezone, start_date=start_date,
                   days=days, sleep_docs=tuple(sleep_docs),
                   activity_docs=tuple(activity_docs))


def demo_now() -> datetime:
    """Reference clock for the shipped demo dataset: 21:00 local."""
    return datetime(2025, 7, 9, 12, 0, 0, tzinfo=dt_timezone.utc)


def demo_anomalies() -> AnomalySpec:
    """Fixed overrides that make the demo dataset tell a story.

    Day indices are relative to DEMO_START (2025-06-10):
      * days 8..14 pin steps to 6000, day 15 to 8400, so the step count
        on 2025-06-25 sits exactly 40% above its trailing 7-day average;
      * days 22..28 pin steps to 6000 and day 29 (the demo "today",
        2025-07-09) to 4500, a clean -25% against the weekly average;
      * day 29's sleep is pinned to 420 total / 75 deep minutes.
    """
    steps_set: dict[int, float] = {i: 6000.0 for i in range(8, 15)}
    steps_set[15] = 8400.0
    steps_set.update({i: 6000.0 for i in range(22, 29)})
    steps_set[29] = 4500.0
    return AnomalySpec(steps_set=steps_set,
                       total_sleep_set={29: 420.0},
                       deep_set={29: 75.0})


def make_demo_dataset(seed: int = 7) -> Dataset:
    return generate_dataset(seed, DEMO_DAYS, start_date=DEMO_START,
                            timezone=DEMO_TIMEZONE, user_id=DEMO_USER,
                            anomalies=demo_anomalies())

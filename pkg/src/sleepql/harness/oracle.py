"""Brute-force reference answers computed straight from raw documents.

The oracle answers a resolved DataRequest by iterating over the raw
sleep/activity dicts of a synthetic dataset. It deliberately shares no
code with the store or the query pipeline (a test inspects this file's
imports); it re-derives wake-date attribution, per-session durations,
main-sleep eligibility, and device-priority deduplication on its own,
and even carries its own copy of the metric table. Aggregation uses the
same left-fold ordering a table scan produces, so sums match the engine
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional, Union
from zoneinfo import ZoneInfo

from ..generator import DataRequest, TimeWindow
from .datagen import Dataset

Scalar = Union[int, float, None]

_MAIN_SLEEP_MIN = 180.0

# metric id -> (source, derived field, device-class priority)
_METRICS: dict[str, tuple[str, str, tuple[str, ...]]] = {
    "total_sleep_minutes": ("sleep", "duration_total", ("mattress", "watch")),
    "deep_sleep_minutes": ("sleep", "deep", ("mattress", "watch")),
    "rem_minutes": ("sleep", "rem", ("mattress", "watch")),
    "light_minutes": ("sleep", "light", ("mattress", "watch")),
    "waso_minutes": ("sleep", "waso", ("mattress", "watch")),
    "snoring_minutes": ("sleep", "snoring", ("mattress", "watch")),
    "ahi": ("sleep", "ahi", ("mattress", "watch")),
    "sleep_efficiency": ("sleep", "sleep_efficiency", ("mattress", "watch")),
    "steps": ("activity", "steps", ("watch", "mattress")),
    "calories": ("activity", "calories", ("watch", "mattress")),
    "hr_avg": ("activity", "hr_avg", ("watch", "mattress")),
}


@dataclass(frozen=True)
class OracleAnswer:
    primary: Scalar
    comparison: Scalar


def _device_class(device_id: str) -> str:
    return device_id.split("-", 1)[0]


def _sleep_record(doc: dict) -> dict:
    tz = ZoneInfo(doc["timezone"])
    wake = datetime.fromtimestamp(doc["end_epoch"], tz)
    in_bed = (doc["end_epoch"] - doc["start_epoch"]) / 60.0
    light = doc.get("light_seconds", 0.0) / 60.0
    deep = doc.get("deep_seconds", 0.0) / 60.0
    rem = doc.get("rem_seconds", 0.0) / 60.0
    total = light + deep + rem
    hr = doc.get("hr_avg")
    return {
        "local_date": wake.date().isoformat(),
        "device_class": _device_class(doc["device_id"]),
        "order_key": f"{doc['device_id']}:{int(doc['start_epoch'])}",
        "end_epoch": doc["end_epoch"],
        "is_main": total >= _MAIN_SLEEP_MIN,
        "duration_total": total,
        "light": light,
        "deep": deep,
        "rem": rem,
        "waso": doc.get("waso_seconds", 0.0) / 60.0,
        "snoring": doc.get("snoring_seconds", 0.0) / 60.0,
        "ahi": (doc.get("apnea_events", 0) / (total / 60.0)
                if total > 0 else 0.0),
        "sleep_efficiency": total / in_bed if in_bed > 0 else 0.0,
        "hr_avg_sleep": float(hr) if hr is not None else None,
    }


def _activity_record(doc: dict) -> dict:
    steps = doc.get("steps")
    calories = doc.get("calories")
    hr = doc.get("hr_avg")
    return {
        "local_date": doc["date"],
        "device_class": _device_class(doc["device_id"]),
        "order_key": doc["device_id"],
        "is_main": True,
        "steps": int(steps) if steps is not None else None,
        "calories": float(calories) if calories is not None else None,
        "hr_avg": float(hr) if hr is not None else None,
    }


def _window_dates(window: TimeWindow) -> tuple[str, str]:
    tz = ZoneInfo(window.timezone)
    lo = window.start.astimezone(tz).date()
    hi = (window.end - timedelta(microseconds=1)).astimezone(tz).date()
    return lo.isoformat(), hi.isoformat()


def _in_window(records: list[dict], lo: str, hi: str) -> list[dict]:
    return [r for r in records if lo <= r["local_date"] <= hi]


def _pick_class(records: list[dict], field: str,
                priority: tuple[str, ...]) -> str:
    present = {r["device_class"] for r in records
               if r["is_main"] and r.get(field) is not None}
    for cls in priority:
        if cls in present:
            return cls
    return priority[0]


def _aggregate(agg: str, rows: list[dict], field: str) -> Scalar:
    rows = sorted(rows, key=lambda r: (r["local_date"], r["order_key"]))
    if agg == "count":
        return len(rows)
    if agg == "raw":
        # Most recent record wins; ties keep scan order, like a stable
        # descending sort followed by take 1.
        order = "end_epoch" if rows and "end_epoch" in rows[0] else "local_date"
        rows = sorted(rows, key=lambda r: _desc_key(r[order]))
        return rows[0].get(field) if rows else None
    cells = [r.get(field) for r in rows]
    cells = [c for c in cells if c is not None]
    if not cells:
        return None
    if agg == "sum":
        return sum(cells)
    if agg == "avg":
        return float(sum(cells)) / len(cells)
    if agg == "min":
        return min(cells)
    if agg == "max":
        return max(cells)
    raise AssertionError(f"unknown aggregation {agg!r}")


class _desc_key:
    """Inverted sort key so a stable ascending sort yields descending order."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __lt__(self, other: "_desc_key") -> bool:
        return other.value < self.value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _desc_key) and other.value == self.value


def oracle_evaluate(request: DataRequest, dataset: Dataset) -> OracleAnswer:
    """Answer a resolved request by scanning the raw documents.

    Device-class choice and last-night narrowing follow the engine's
    stated rules: the class is picked once from the primary window, and a
    "last_night" window collapses to the wake date of the newest main
    sleep session inside its envelope.
    """
    try:
        source, field, priority = _METRICS[request.metric]
    except KeyError:
        raise ValueError(f"metric {request.metric!r} not known to the oracle")
    if source == "sleep":
        records = [_sleep_record(d) for d in dataset.sleep_docs]
    else:
        records = [_activity_record(d) for d in dataset.activity_docs]

    p_lo, p_hi = _window_dates(request.primary_window)
    envelope = _in_window(records, p_lo, p_hi)
    cls = _pick_class(envelope, field, priority)

    if request.primary_window.label == "last_night" and source == "sleep":
        mains = [r for r in envelope
                 if r["device_class"] == cls and r["is_main"]]
        if mains:
            night = max(mains, key=lambda r: r["end_epoch"])["local_date"]
            p_lo = p_hi = night

    def rows_for(lo: str, hi: str) -> list[dict]:
        picked = [r for r in _in_window(records, lo, hi)
                  if r["device_class"] == cls]
        if source == "sleep":
            picked = [r for r in picked if r["is_main"]]
        return picked

    primary = _aggregate(request.aggregation, rows_for(p_lo, p_hi), field)

    comparison: Scalar = None
    if request.comparison_mode != "none":
        agg = ("avg" if request.comparison_mode == "vs_baseline_avg"
               else request.aggregation)
        c_lo, c_hi = _window_dates(request.comparison_window)
        comparison = _aggregate(agg, rows_for(c_lo, c_hi), field)

    return OracleAnswer(primary=primary, comparison=comparison)

"""Normalized table schemas and the metric lexicon.

Two tables make up the queryable layer:

* ``activity_daily`` — one row per (user, local day, device) with daytime
  numerics (steps, calories, heart-rate min/avg/max).
* ``sleep_session`` — one row per recorded sleep session with stage minutes,
  WASO, respiratory metrics and the local calendar date the night is
  attributed to (the wake-up date).

The metric lexicon maps natural-language surface forms ("deep sleep",
"steps", "heart rate") onto exactly one (table, column) pair each. Anything
outside the lexicon is an unsupported topic by definition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .values import ValueType

ACTIVITY_DAILY = "activity_daily"
SLEEP_SESSION = "sleep_session"

# Device classes used by sensor-priority dedup. A device id's class is its
# leading token, e.g. "mattress-01" -> "mattress".
MATTRESS = "mattress"
WATCH = "watch"

# A session this long or longer counts as the night's main sleep.
MAIN_SLEEP_MIN_MINUTES = 180.0


def device_class(device_id: str) -> str:
    return device_id.split("-", 1)[0]


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: dict[str, ValueType]
    # Columns that carry the row's position in time; filters on these are
    # "time filters" for the filter-then-aggregate rule.
    time_columns: tuple[str, ...]
    # Primary time column used for scan ordering plus tie-break columns.
    order_by: tuple[str, ...]

    def has_column(self, name: str) -> bool:
        return name in self.columns

    def column_type(self, name: str) -> ValueType:
        return self.columns[name]


ACTIVITY_DAILY_SCHEMA = TableSchema(
    name=ACTIVITY_DAILY,
    columns={
        "user_id": ValueType.TEXT,
        "local_date": ValueType.TEXT,
        "device_id": ValueType.TEXT,
        "device_class": ValueType.TEXT,
        "steps": ValueType.INT,
        "calories": ValueType.FLOAT,
        "hr_avg": ValueType.FLOAT,
        "hr_min": ValueType.FLOAT,
        "hr_max": ValueType.FLOAT,
    },
    time_columns=("local_date",),
    order_by=("local_date", "device_id"),
)

SLEEP_SESSION_SCHEMA = TableSchema(
    name=SLEEP_SESSION,
    columns={
        "user_id": ValueType.TEXT,
        "session_id": ValueType.TEXT,
        "device_id": ValueType.TEXT,
        "device_class": ValueType.TEXT,
        "start_utc": ValueType.TIMESTAMP,
        "end_utc": ValueType.TIMESTAMP,
        "local_date": ValueType.TEXT,
        "duration_total": ValueType.FLOAT,
        "light": ValueType.FLOAT,
        "deep": ValueType.FLOAT,
        "rem": ValueType.FLOAT,
        "waso": ValueType.FLOAT,
        "sleep_efficiency": ValueType.FLOAT,
        "ahi": ValueType.FLOAT,
        "snoring": ValueType.FLOAT,
        "hr_avg_sleep": ValueType.FLOAT,
        "is_main_sleep": ValueType.BOOL,
    },
    time_columns=("local_date", "start_utc", "end_utc"),
    order_by=("local_date", "session_id"),
)

TABLES: dict[str, TableSchema] = {
    ACTIVITY_DAILY: ACTIVITY_DAILY_SCHEMA,
    SLEEP_SESSION: SLEEP_SESSION_SCHEMA,
}


@dataclass(frozen=True)
class MetricDescriptor:
    metric_id: str
    table: str
    column: str
    unit: str  # one of: minutes, steps, kcal, bpm, events_per_hour, ratio
    default_aggregation: str  # sum | avg | min | max | count
    synonyms: tuple[str, ...]
    sensor_priority: tuple[str, ...]  # ordered device classes, best first

    @property
    def is_duration(self) -> bool:
        return self.unit == "minutes"


_SLEEP_PRIORITY = (MATTRESS, WATCH)
_ACTIVITY_PRIORITY = (WATCH, MATTRESS)

DEFAULT_METRICS: tuple[MetricDescriptor, ...] = (
    MetricDescriptor("deep_sleep_minutes", SLEEP_SESSION, "deep", "minutes", "avg",
                     ("deep sleep", "deep"), _SLEEP_PRIORITY),
    MetricDescriptor("rem_minutes", SLEEP_SESSION, "rem", "minutes", "avg",
                     ("rem sleep", "rem", "dream sleep"), _SLEEP_PRIORITY),
    MetricDescriptor("light_minutes", SLEEP_SESSION, "light", "minutes", "avg",
                     ("light sleep", "light"), _SLEEP_PRIORITY),
    MetricDescriptor("total_sleep_minutes", SLEEP_SESSION, "duration_total", "minutes", "avg",
                     ("total sleep", "sleep duration", "sleep time", "time asleep", "sleep"),
                     _SLEEP_PRIORITY),
    MetricDescriptor("waso_minutes", SLEEP_SESSION, "waso", "minutes", "avg",
                     ("waso", "wake after sleep onset", "awake time", "time awake"),
                     _SLEEP_PRIORITY),
    MetricDescriptor("snoring_minutes", SLEEP_SESSION, "snoring", "minutes", "avg",
                     ("snoring", "snore time"), _SLEEP_PRIORITY),
    MetricDescriptor("ahi", SLEEP_SESSION, "ahi", "events_per_hour", "avg",
                     ("ahi", "apnea", "apnea events", "breathing events",
                      "apnea-hypopnea index"), _SLEEP_PRIORITY),
    MetricDescriptor("sleep_efficiency", SLEEP_SESSION, "sleep_efficiency", "ratio", "avg",
                     ("sleep efficiency", "efficiency"), _SLEEP_PRIORITY),
    MetricDescriptor("steps", ACTIVITY_DAILY, "steps", "steps", "sum",
                     ("steps", "step count", "activity", "walking"), _ACTIVITY_PRIORITY),
    MetricDescriptor("calories", ACTIVITY_DAILY, "calories", "kcal", "sum",
                     ("calories", "calorie burn", "energy burn"), _ACTIVITY_PRIORITY),
    MetricDescriptor("hr_avg", ACTIVITY_DAILY, "hr_avg", "bpm", "avg",
                     ("heart rate", "average heart rate", "hr", "pulse"),
                     _ACTIVITY_PRIORITY),
)


class LexiconError(ValueError):
    pass


class MetricLexicon:
    """Immutable registry of metric descriptors with surface-form lookup."""

    def __init__(self, metrics: Iterable[MetricDescriptor]):
        self.metrics: tuple[MetricDescriptor, ...] = tuple(metrics)
        self._by_id: dict[str, MetricDescriptor] = {}
        self._by_surface: dict[str, MetricDescriptor] = {}
        seen_target: dict[str, str] = {}
        for m in self.metrics:
            if m.metric_id in self._by_id:
                raise LexiconError(f"duplicate metric_id {m.metric_id!r}")
            if m.table not in TABLES:
                raise LexiconError(f"{m.metric_id}: unknown table {m.table!r}")
            if not TABLES[m.table].has_column(m.column):
                raise LexiconError(f"{m.metric_id}: unknown column {m.column!r}")
            target = f"{m.table}.{m.column}"
            if target in seen_target:
                raise LexiconError(
                    f"{m.metric_id}: column {target} already claimed by {seen_target[target]}")
            seen_target[target] = m.metric_id
            self._by_id[m.metric_id] = m
            for form in (m.metric_id,) + m.synonyms:
                key = form.casefold()
                if key in self._by_surface and self._by_surface[key] is not m:
                    raise LexiconError(
                        f"surface form {form!r} maps to both "
                        f"{self._by_surface[key].metric_id} and {m.metric_id}")
                self._by_surface[key] = m

    def lookup_metric(self, surface_form: str) -> Optional[MetricDescriptor]:
        """Resolve a case-folded surface form; None means unsupported topic."""
        return self._by_surface.get(surface_form.strip().casefold())

    def by_id(self, metric_id: str) -> MetricDescriptor:
        return self._by_id[metric_id]

    def __contains__(self, metric_id: str) -> bool:
        return metric_id in self._by_id

    def find_in_text(self, text: str) -> Optional[MetricDescriptor]:
        """Longest surface form appearing (word-bounded) in the message."""
        found = self.find_surface(text)
        return found[0] if found else None

    def find_surface(self, text: str) -> Optional[tuple[MetricDescriptor, str]]:
        """Like find_in_text but also reports which surface form matched."""
        folded = " ".join(text.casefold().split())
        best: Optional[tuple[int, str, MetricDescriptor]] = None
        for surface, metric in self._by_surface.items():
            idx = _find_word_bounded(folded, surface)
            if idx < 0:
                continue
            cand = (len(surface), surface, metric)
            if best is None or cand[0] > best[0]:
                best = cand
        return (best[2], best[1]) if best else None

    def surface_forms(self) -> list[str]:
        return sorted(self._by_surface)

    def to_document(self) -> list[dict]:
        return [
            {
                "metric_id": m.metric_id,
                "table": m.table,
                "column": m.column,
                "unit": m.unit,
                "default_aggregation": m.default_aggregation,
                "synonyms": list(m.synonyms),
                "sensor_priority": list(m.sensor_priority),
            }
            for m in self.metrics
        ]

    @classmethod
    def from_document(cls, doc: list[dict]) -> "MetricLexicon":
        metrics = [
            MetricDescriptor(
                metric_id=entry["metric_id"],
                table=entry["table"],
                column=entry["column"],
                unit=entry["unit"],
                default_aggregation=entry["default_aggregation"],
                synonyms=tuple(entry.get("synonyms", ())),
                sensor_priority=tuple(entry.get("sensor_priority", ())),
            )
            for entry in doc
        ]
        return cls(metrics)

    @classmethod
    def load(cls, path) -> "MetricLexicon":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_document(json.load(fh))

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_document(), fh, indent=2)
            fh.write("\n")


def _find_word_bounded(haystack: str, needle: str) -> int:
    start = 0
    while True:
        idx = haystack.find(needle, start)
        if idx < 0:
            return -1
        before_ok = idx == 0 or not haystack[idx - 1].isalnum()
        end = idx + len(needle)
        after_ok = end >= len(haystack) or not haystack[end].isalnum()
        if before_ok and after_ok:
            return idx
        start = idx + 1


DEFAULT_LEXICON = MetricLexicon(DEFAULT_METRICS)


def lookup_metric(surface_form: str,
                  lexicon: MetricLexicon = DEFAULT_LEXICON) -> Optional[MetricDescriptor]:
    return lexicon.lookup_metric(surface_form)

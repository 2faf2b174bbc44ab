"""Columnar time-series store: the single source of truth.

Raw device documents come in as line-delimited JSON, get validated and
normalized (timezone conversion, stage seconds to minutes, derived fields),
and land in in-memory column vectors. Readers always see a consistent
snapshot: ingestion builds new column vectors and publishes them atomically
under a lock, evaluation never mutates.

Re-ingesting the same natural key replaces the prior row (device clouds
re-deliver corrected records), so ingestion is idempotent per batch.

Snapshots persist as a single JSON document with an embedded SHA-256
checksum over the payload; a corrupt or truncated file fails to load.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Optional
from zoneinfo import ZoneInfo

from .schema import (ACTIVITY_DAILY, ACTIVITY_DAILY_SCHEMA, SLEEP_SESSION,
                     SLEEP_SESSION_SCHEMA, TABLES, MAIN_SLEEP_MIN_MINUTES,
                     device_class)
from .values import ValueType, from_epoch, parse_iso_date

SNAPSHOT_VERSION = 1

# Stage minutes may exceed the in-bed interval by at most this much (rounding).
STAGE_SUM_TOLERANCE_MIN = 1.0


class StoreError(Exception):
    pass


class SnapshotError(StoreError):
    """Snapshot file unreadable, wrong version, or checksum mismatch."""


def normalize_timestamp(epoch_utc: float, zone: str) -> datetime:
    """Civil time of a UTC epoch in the given IANA zone (DST-aware).

    Unknown zones are a hard error: a record without a resolvable zone
    cannot be attributed to a local calendar date.
    """
    try:
        tz = ZoneInfo(zone)
    except Exception as exc:
        raise StoreError(f"unknown timezone {zone!r}") from exc
    return from_epoch(epoch_utc).astimezone(tz)


@dataclass(frozen=True)
class RawActivityDocument:
    device_id: str
    date: str  # local calendar date, ISO YYYY-MM-DD
    timezone: str
    steps: Optional[int] = None
    calories: Optional[float] = None
    hr_avg: Optional[float] = None
    hr_min: Optional[float] = None
    hr_max: Optional[float] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RawActivityDocument":
        return cls(
            device_id=str(doc["device_id"]),
            date=str(doc["date"]),
            timezone=str(doc.get("timezone", "UTC")),
            steps=doc.get("steps"),
            calories=doc.get("calories"),
            hr_avg=doc.get("hr_avg"),
            hr_min=doc.get("hr_min"),
            hr_max=doc.get("hr_max"),
        )

    def to_dict(self) -> dict:
        out = {"device_id": self.device_id, "date": self.date, "timezone": self.timezone}
        for key in ("steps", "calories", "hr_avg", "hr_min", "hr_max"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class RawSleepDocument:
    device_id: str
    start_epoch: float  # seconds UTC
    end_epoch: float
    timezone: str
    light_seconds: float = 0.0
    deep_seconds: float = 0.0
    rem_seconds: float = 0.0
    waso_seconds: float = 0.0
    apnea_events: int = 0
    snoring_seconds: float = 0.0
    hr_avg: Optional[float] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RawSleepDocument":
        return cls(
            device_id=str(doc["device_id"]),
            start_epoch=float(doc["start_epoch"]),
            end_epoch=float(doc["end_epoch"]),
            timezone=str(doc.get("timezone", "UTC")),
            light_seconds=float(doc.get("light_seconds", 0.0)),
            deep_seconds=float(doc.get("deep_seconds", 0.0)),
            rem_seconds=float(doc.get("rem_seconds", 0.0)),
            waso_seconds=float(doc.get("waso_seconds", 0.0)),
            apnea_events=int(doc.get("apnea_events", 0)),
            snoring_seconds=float(doc.get("snoring_seconds", 0.0)),
            hr_avg=doc.get("hr_avg"),
        )

    def to_dict(self) -> dict:
        out = {
            "device_id": self.device_id,
            "start_epoch": self.start_epoch,
            "end_epoch": self.end_epoch,
            "timezone": self.timezone,
            "light_seconds": self.light_seconds,
            "deep_seconds": self.deep_seconds,
            "rem_seconds": self.rem_seconds,
            "waso_seconds": self.waso_seconds,
            "apnea_events": self.apnea_events,
            "snoring_seconds": self.snoring_seconds,
        }
        if self.hr_avg is not None:
            out["hr_avg"] = self.hr_avg
        return out


@dataclass
class IngestReceipt:
    table: str
    rows_written: int = 0
    rows_rejected: int = 0
    rejection_reasons: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, index: int, reason: str) -> None:
        self.rows_rejected += 1
        self.rejection_reasons.append((index, reason))

    def to_dict(self) -> dict:
        return {
            "table": self.table,
            "rows_written": self.rows_written,
            "rows_rejected": self.rows_rejected,
            "rejection_reasons": [
                {"index": i, "reason": r} for i, r in self.rejection_reasons
            ],
        }


def _activity_row(doc: RawActivityDocument, user_id: str) -> dict:
    try:
        parse_iso_date(doc.date)
    except ValueError as exc:
        raise StoreError(f"bad date {doc.date!r}") from exc
    # timezone must at least resolve, even though daily rows are already local
    normalize_timestamp(0, doc.timezone)
    for name in ("steps", "calories"):
        v = getattr(doc, name)
        if v is not None and v < 0:
            raise StoreError(f"negative count: {name}")
    hr = (doc.hr_min, doc.hr_avg, doc.hr_max)
    if all(v is not None for v in hr) and not (hr[0] <= hr[1] <= hr[2]):
        raise StoreError("hr_min <= hr_avg <= hr_max violated")
    return {
        "user_id": user_id,
        "local_date": doc.date,
        "device_id": doc.device_id,
        "device_class": device_class(doc.device_id),
        "steps": int(doc.steps) if doc.steps is not None else None,
        "calories": float(doc.calories) if doc.calories is not None else None,
        "hr_avg": float(doc.hr_avg) if doc.hr_avg is not None else None,
        "hr_min": float(doc.hr_min) if doc.hr_min is not None else None,
        "hr_max": float(doc.hr_max) if doc.hr_max is not None else None,
    }


def _sleep_row(doc: RawSleepDocument, user_id: str) -> dict:
    if doc.start_epoch >= doc.end_epoch:
        raise StoreError("start_epoch >= end_epoch")
    for name in ("light_seconds", "deep_seconds", "rem_seconds", "waso_seconds",
                 "snoring_seconds"):
        if getattr(doc, name) < 0:
            raise StoreError(f"negative duration: {name}")
    if doc.apnea_events < 0:
        raise StoreError("negative count: apnea_events")

    end_local = normalize_timestamp(doc.end_epoch, doc.timezone)
    local_date = end_local.date().isoformat()

    in_bed_min = (doc.end_epoch - doc.start_epoch) / 60.0
    light = doc.light_seconds / 60.0
    deep = doc.deep_seconds / 60.0
    rem = doc.rem_seconds / 60.0
    waso = doc.waso_seconds / 60.0
    if light + deep + rem + waso > in_bed_min + STAGE_SUM_TOLERANCE_MIN:
        raise StoreError("stage sum exceeds time in bed")

    duration_total = light + deep + rem  # asleep time, WASO excluded
    efficiency = duration_total / in_bed_min if in_bed_min > 0 else 0.0
    ahi = doc.apnea_events / (duration_total / 60.0) if duration_total > 0 else 0.0

    start_utc = from_epoch(doc.start_epoch)
    end_utc = from_epoch(doc.end_epoch)
    session_id = f"{doc.device_id}:{int(doc.start_epoch)}"
    return {
        "user_id": user_id,
        "session_id": session_id,
        "device_id": doc.device_id,
        "device_class": device_class(doc.device_id),
        "start_utc": start_utc,
        "end_utc": end_utc,
        "local_date": local_date,
        "duration_total": duration_total,
        "light": light,
        "deep": deep,
        "rem": rem,
        "waso": waso,
        "sleep_efficiency": efficiency,
        "ahi": ahi,
        "snoring": doc.snoring_seconds / 60.0,
        "hr_avg_sleep": float(doc.hr_avg) if doc.hr_avg is not None else None,
        "is_main_sleep": duration_total >= MAIN_SLEEP_MIN_MINUTES,
    }


_NATURAL_KEYS = {
    ACTIVITY_DAILY: ("user_id", "local_date", "device_id"),
    SLEEP_SESSION: ("user_id", "session_id"),
}


class _Table:
    """Column vectors plus a natural-key index for upserts."""

    def __init__(self, name: str):
        self.schema = TABLES[name]
        self.name = name
        self.columns: dict[str, list] = {c: [] for c in self.schema.columns}
        self._key_index: dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(next(iter(self.columns.values())))

    def _key_of(self, row: dict) -> tuple:
        return tuple(row[k] for k in _NATURAL_KEYS[self.name])

    def upsert(self, row: dict) -> None:
        key = self._key_of(row)
        if key in self._key_index:
            i = self._key_index[key]
            for col, values in self.columns.items():
                values[i] = row[col]
        else:
            self._key_index[key] = len(self)
            for col, values in self.columns.items():
                values.append(row[col])

    def rows(self) -> list[dict]:
        names = list(self.columns)
        out = [dict(zip(names, values)) for values in zip(*self.columns.values())]
        if not out and len(self) == 0:
            return []
        return out

    def copy(self) -> "_Table":
        t = _Table(self.name)
        t.columns = {c: list(v) for c, v in self.columns.items()}
        t._key_index = dict(self._key_index)
        return t


class Store:
    """Embedded single-process store with snapshot persistence.

    Concurrency: many readers or one writer. ``scan`` works on the published
    table objects; ingestion replaces them atomically under ``_write_lock``.
    """

    def __init__(self):
        self._tables: dict[str, _Table] = {
            ACTIVITY_DAILY: _Table(ACTIVITY_DAILY),
            SLEEP_SESSION: _Table(SLEEP_SESSION),
        }
        self._write_lock = threading.Lock()

    # -- ingestion ---------------------------------------------------------

    def ingest_activity(self, docs: Iterable[RawActivityDocument | dict],
                        user_id: str) -> IngestReceipt:
        return self._ingest(ACTIVITY_DAILY, docs, user_id,
                            RawActivityDocument, _activity_row)

    def ingest_sleep(self, docs: Iterable[RawSleepDocument | dict],
                     user_id: str) -> IngestReceipt:
        return self._ingest(SLEEP_SESSION, docs, user_id,
                            RawSleepDocument, _sleep_row)

    def _ingest(self, table: str, docs, user_id, doc_cls, to_row) -> IngestReceipt:
        receipt = IngestReceipt(table=table)
        rows = []
        for i, doc in enumerate(docs):
            try:
                if isinstance(doc, dict):
                    doc = doc_cls.from_dict(doc)
                rows.append(to_row(doc, user_id))
            except (StoreError, KeyError, TypeError, ValueError) as exc:
                receipt.reject(i, str(exc) or exc.__class__.__name__)
        with self._write_lock:
            fresh = self._tables[table].copy()
            for row in rows:
                fresh.upsert(row)
                receipt.rows_written += 1
            self._tables = {**self._tables, table: fresh}
        return receipt

    # -- reads -------------------------------------------------------------

    def scan(self, table: str, user_id: str,
             time_range: Optional[tuple[str, str]] = None) -> list[dict]:
        """Rows for a user ordered by time, optionally bounded to [start, end).

        Bounds are ISO date strings over the table's local_date column.
        """
        if table not in self._tables:
            raise StoreError(f"unknown table {table!r}")
        tab = self._tables[table]
        rows = [r for r in tab.rows() if r["user_id"] == user_id]
        if time_range is not None:
            lo, hi = time_range
            rows = [r for r in rows if lo <= r["local_date"] < hi]
        order = tab.schema.order_by
        rows.sort(key=lambda r: tuple(r[c] for c in order))
        return rows

    def all_rows(self, table: str) -> list[dict]:
        if table not in self._tables:
            raise StoreError(f"unknown table {table!r}")
        tab = self._tables[table]
        rows = tab.rows()
        rows.sort(key=lambda r: (r["user_id"],) + tuple(r[c] for c in tab.schema.order_by))
        return rows

    def user_ids(self) -> list[str]:
        seen = set()
        for tab in self._tables.values():
            seen.update(tab.columns["user_id"])
        return sorted(seen)

    # -- persistence -------------------------------------------------------

    def persist(self, path) -> None:
        payload = {
            "tables": {
                name: [_encode_row(r) for r in self.all_rows(name)]
                for name in self._tables
            }
        }
        body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        document = {"version": SNAPSHOT_VERSION, "checksum": digest, "payload": payload}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(document, fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path) -> "Store":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                document = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SnapshotError(f"unreadable snapshot: {exc}") from exc
        if not isinstance(document, dict) or document.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError("unsupported snapshot version")
        payload = document.get("payload")
        body = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if digest != document.get("checksum"):
            raise SnapshotError("checksum mismatch")
        store = cls()
        for name, rows in payload["tables"].items():
            if name not in store._tables:
                raise SnapshotError(f"unknown table in snapshot: {name}")
            tab = store._tables[name]
            for encoded in rows:
                tab.upsert(_decode_row(tab, encoded))
        return store


def _encode_row(row: dict) -> dict:
    out = {}
    for key, value in row.items():
        if isinstance(value, datetime):
            out[key] = {"$ts": value.astimezone(timezone.utc).isoformat()}
        elif isinstance(value, timedelta):
            out[key] = {"$span_us": round(value.total_seconds() * 1e6)}
        else:
            out[key] = value
    return out


def _decode_row(tab: _Table, encoded: dict) -> dict:
    out = {}
    for key, value in encoded.items():
        if isinstance(value, dict) and "$ts" in value:
            out[key] = datetime.fromisoformat(value["$ts"]).astimezone(timezone.utc)
        elif isinstance(value, dict) and "$span_us" in value:
            out[key] = timedelta(microseconds=value["$span_us"])
        else:
            out[key] = value
    return out


def read_jsonl(path) -> list[dict]:
    """Raw ingestion corpus: one JSON document per line."""
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs.append(json.loads(line))
    return docs


def write_jsonl(path, docs: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, sort_keys=True))
            fh.write("\n")

"""System-initiated monitoring: deviations, sleep debt, and suppression.

A daily run evaluates a fixed set of predefined query templates (never
generated on the fly), compares each observed value against the user's own
trailing seven-day average, and emits at most a couple of carefully chosen
notifications. Silence is the designed-for outcome: thresholds are strict,
short histories never fire, repeat alerts are suppressed unless the
deviation keeps growing, and a hard daily cap keeps the worst case small.

All numeric text in a notification carries provenance and passes the same
faithfulness audit as chat answers.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Optional

from .generator import build_metric_plan, choose_device_class
from .pql.context import EvalContext
from .pql.evaluate import QueryResult, evaluate
from .responder import (AuditVerdict, Evidence, GroundedResponse, NumberClaim,
                        faithfulness_audit, format_metric_value, percent_diff)
from .schema import DEFAULT_LEXICON, MetricLexicon
from .store import Store

# The predefined template set: which metrics the daily run watches.
MONITOR_METRICS = ("steps", "total_sleep_minutes", "deep_sleep_minutes",
                   "waso_minutes", "ahi")


@dataclass(frozen=True)
class MonitorConfig:
    """All monitoring thresholds, overridable but bounded by validation."""

    threshold: float = 0.30        # deviation fires strictly above this ratio
    min_days: int = 4              # baseline days required before firing
    daily_cap: int = 2             # max notifications per user per day
    regrowth: float = 0.10         # repeat alerts need this much ratio growth
    baseline_days: int = 7
    debt_min_minutes: float = 120.0
    debt_nights: int = 3
    debt_min_present: int = 2

    def __post_init__(self):
        if not 0.0 < self.threshold <= 10.0:
            raise ValueError("threshold out of range")
        if not 0 <= self.min_days <= self.baseline_days:
            raise ValueError("min_days out of range")
        if self.daily_cap < 0 or self.debt_nights < 1:
            raise ValueError("bad cap or debt window")


@dataclass(frozen=True)
class BaselineStat:
    """Trailing mean over the seven days before (excluding) as_of_date."""

    metric: str
    as_of_date: date
    mean: Optional[float]
    sample_count: int

    def __post_init__(self):
        if (self.mean is None) != (self.sample_count == 0):
            raise ValueError("mean is null iff no samples")


@dataclass(frozen=True)
class Notification:
    user_id: str
    date: str                     # ISO local date the run was for
    kind: str                     # "deviation" | "sleep_debt"
    metric: str
    observed: float
    baseline: Optional[float]
    delta_ratio: float            # may be math.inf when baseline mean is 0
    message: str
    evidence: tuple[Evidence, ...]
    provenance: tuple[NumberClaim, ...] = ()

    def delta_percent(self) -> str:
        if math.isinf(self.delta_ratio):
            return "far above baseline"
        return f"{self.delta_ratio * 100:+.1f}%"

    def to_response(self) -> GroundedResponse:
        """Audit view: the message with its evidence and provenance."""
        return GroundedResponse("simple", self.message, self.evidence,
                                self.provenance, trace=("notification",))

    def audit(self) -> AuditVerdict:
        return faithfulness_audit(self.to_response())

    def to_dict(self) -> dict:
        finite = not math.isinf(self.delta_ratio)
        return {
            "user_id": self.user_id,
            "date": self.date,
            "kind": self.kind,
            "metric": self.metric,
            "observed": self.observed,
            "baseline": self.baseline,
            "delta_ratio": self.delta_ratio if finite else None,
            "far_above": not finite,
            "delta_percent": self.delta_percent(),
            "message": self.message,
            "evidence": [e.to_dict() for e in self.evidence],
        }


# ---------------------------------------------------------------------------
# Detectors


def _window_ctx(store: Store, user_id: str, as_of_date: date,
                timezone: str) -> EvalContext:
    # evaluation clock: end of the as_of local day, so date filters up to
    # as_of are never flagged as future
    from zoneinfo import ZoneInfo
    from datetime import datetime, timezone as _tz
    local_end = datetime(as_of_date.year, as_of_date.month, as_of_date.day,
                         23, 59, 59, tzinfo=ZoneInfo(timezone))
    return EvalContext(now=local_end.astimezone(_tz.utc), user_id=user_id,
                       timezone=timezone)


def _metric_day_plan(metric_id: str, store: Store, user_id: str,
                     day: date, lexicon: MetricLexicon):
    metric = lexicon.by_id(metric_id)
    iso = day.isoformat()
    cls = choose_device_class(metric, store, user_id, iso, iso)
    agg = "sum" if metric.default_aggregation == "sum" else "avg"
    return build_metric_plan(metric, agg, cls, iso, iso), cls


def _evaluate_plan(plan, store: Store, ctx: EvalContext) -> QueryResult:
    from .pql.validate import validate
    result = validate(plan, ctx=ctx)
    if not result.ok:
        raise RuntimeError(f"monitor template invalid: {result.diagnostics}")
    return evaluate(result.validated, store, ctx)


def compute_baseline(metric_id: str, as_of_date: date, store: Store,
                     user_id: str, timezone: str = "UTC",
                     days: int = 7,
                     lexicon: MetricLexicon = DEFAULT_LEXICON
                     ) -> tuple[BaselineStat, Evidence]:
    """Mean over the trailing window [as_of - days, as_of), present days only."""
    metric = lexicon.by_id(metric_id)
    lo = (as_of_date - timedelta(days=days)).isoformat()
    hi = (as_of_date - timedelta(days=1)).isoformat()
    cls = choose_device_class(metric, store, user_id, lo, hi)
    plan = build_metric_plan(metric, "avg", cls, lo, hi)
    # widen with a row count so sample sufficiency is part of the evidence
    from .pql.ast import Aggregation, QueryPlan, Summarize
    stages = list(plan.stages)
    stages[-1] = Summarize((Aggregation("avg", metric.column),
                            Aggregation("count", None)), ())
    plan = QueryPlan(plan.source, tuple(stages))
    ctx = _window_ctx(store, user_id, as_of_date, timezone)
    result = _evaluate_plan(plan, store, ctx)
    mean, count = result.rows[0]
    stat = BaselineStat(metric_id, as_of_date, mean, count)
    return stat, Evidence(result.provenance, result)


def detect_deviation(observed: float, baseline: BaselineStat,
                     threshold: float = 0.30,
                     min_days: int = 4) -> Optional[float]:
    """Delta ratio when the observation deviates enough to notify, else None.

    Fires only with at least min_days of baseline history and strictly more
    than the threshold ratio; exactly at threshold stays silent.
    """
    if observed is None:
        raise ValueError("observed must be non-null")
    if baseline.sample_count < min_days or baseline.mean is None:
        return None
    if baseline.mean == 0:
        return math.inf if observed > 0 else None
    ratio = (observed - baseline.mean) / baseline.mean
    return ratio if abs(ratio) > threshold else None


@dataclass(frozen=True)
class DebtFinding:
    debt_minutes: float
    baseline_mean: float
    nights_present: int
    delta_ratio: float  # debt as a fraction of expected sleep over the window


def detect_sleep_debt(as_of_date: date, store: Store, user_id: str,
                      timezone: str = "UTC",
                      config: MonitorConfig = MonitorConfig(),
                      lexicon: MetricLexicon = DEFAULT_LEXICON
                      ) -> Optional[tuple[DebtFinding, tuple[Evidence, ...]]]:
    """Accumulated shortfall versus baseline over the last debt_nights nights.

    The baseline window sits entirely before the assessed nights, so a bad
    stretch cannot drag down the standard it is judged against.
    """
    metric = lexicon.by_id("total_sleep_minutes")
    nights_lo = as_of_date - timedelta(days=config.debt_nights - 1)
    base_anchor = nights_lo  # baseline ends the day before the first night
    base_stat, base_ev = compute_baseline(
        "total_sleep_minutes", base_anchor, store, user_id, timezone,
        config.baseline_days, lexicon)
    if base_stat.mean is None or base_stat.sample_count < config.min_days:
        return None

    lo, hi = nights_lo.isoformat(), as_of_date.isoformat()
    cls = choose_device_class(metric, store, user_id, lo, hi)
    from .pql.ast import Project, QueryPlan
    plan = build_metric_plan(metric, "avg", cls, lo, hi)
    stages = list(plan.stages)
    stages[-1] = Project(("local_date", metric.column))
    plan = QueryPlan(plan.source, tuple(stages))
    ctx = _window_ctx(store, user_id, as_of_date, timezone)
    nights = _evaluate_plan(plan, store, ctx)

    values = [row[1] for row in nights.rows if row[1] is not None]
    if len(values) < config.debt_min_present:
        return None
    debt = sum(max(0.0, base_stat.mean - v) for v in values)
    if debt < config.debt_min_minutes:
        return None
    expected = base_stat.mean * config.debt_nights
    finding = DebtFinding(debt_minutes=debt, baseline_mean=base_stat.mean,
                          nights_present=len(values),
                          delta_ratio=debt / expected if expected else math.inf)
    return finding, (Evidence(nights.provenance, nights), base_ev)


# ---------------------------------------------------------------------------
# Notification assembly


def _deviation_message(metric_id: str, observed: float, stat: BaselineStat,
                       ratio: float, observed_cell: tuple,
                       baseline_cell: tuple,
                       lexicon: MetricLexicon) -> tuple[str, tuple[NumberClaim, ...]]:
    metric = lexicon.by_id(metric_id)
    obs_token, obs_tf = format_metric_value(metric, observed)
    claims = [NumberClaim(obs_token, obs_tf, (observed_cell,))]
    names = {
        "steps": "step count", "total_sleep_minutes": "total sleep",
        "deep_sleep_minutes": "deep sleep",
        "waso_minutes": "time awake after falling asleep",
        "ahi": "apnea-hypopnea index",
    }
    name = names.get(metric_id, metric_id)
    if math.isinf(ratio):
        text = (f"Heads up: your {name} was {obs_token}, far above your "
                "seven-day average, which was zero.")
        return text, tuple(claims)
    base_token, base_tf = format_metric_value(metric, stat.mean)
    claims.append(NumberClaim(base_token, base_tf, (baseline_cell,)))
    pct = percent_diff(observed, stat.mean)
    claims.append(NumberClaim(pct, "percent_diff",
                              (observed_cell, baseline_cell)))
    direction = "above" if ratio > 0 else "below"
    text = (f"Heads up: your {name} was {obs_token}, {direction} your "
            f"seven-day average of {base_token} ({pct}).")
    return text, tuple(claims)


def _debt_message(finding: DebtFinding, nights_result: QueryResult,
                  baseline_cell: tuple) -> tuple[str, tuple[NumberClaim, ...]]:
    from .responder import duration_words
    debt_sources = (baseline_cell,) + tuple(
        ("cell", 0, i, 1) for i in range(len(nights_result.rows))
        if nights_result.rows[i][1] is not None)
    debt_token = duration_words(finding.debt_minutes)
    base_token = duration_words(finding.baseline_mean)
    claims = (
        NumberClaim(debt_token, "debt_minutes", debt_sources),
        NumberClaim(base_token, "duration_words", (baseline_cell,)),
    )
    text = (f"You have built up {debt_token} of sleep debt over your last "
            f"few nights, against a seven-day average of {base_token} "
            "per night.")
    return text, claims


# ---------------------------------------------------------------------------
# Log and daily run


class NotificationLog:
    """Append-only notification history, optionally mirrored to a JSONL file.

    The in-memory index answers the suppression queries; the file is the
    durable per-user record (one JSON object per line).
    """

    def __init__(self, path=None):
        self.path = path
        self._records: list[dict] = []
        self._lock = threading.Lock()
        if path is not None:
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    self._records = [json.loads(line) for line in fh if line.strip()]
            except FileNotFoundError:
                pass

    def append(self, notification: Notification) -> None:
        record = notification.to_dict()
        with self._lock:
            self._records.append(record)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")

    def find(self, user_id: str, date_iso: str, kind: str,
             metric: str) -> Optional[dict]:
        with self._lock:
            for rec in reversed(self._records):
                if (rec["user_id"] == user_id and rec["date"] == date_iso
                        and rec["kind"] == kind and rec["metric"] == metric):
                    return rec
        return None

    def for_user(self, user_id: str, since: Optional[str] = None) -> list[dict]:
        with self._lock:
            out = [r for r in self._records if r["user_id"] == user_id]
        if since is not None:
            out = [r for r in out if r["date"] >= since]
        return out

    @staticmethod
    def record_ratio(record: dict) -> float:
        if record.get("far_above"):
            return math.inf
        return record["delta_ratio"]


class Monitor:
    """Daily monitoring runner; per-user runs are serialized."""

    def __init__(self, store: Store, config: MonitorConfig = MonitorConfig(),
                 log: Optional[NotificationLog] = None,
                 lexicon: MetricLexicon = DEFAULT_LEXICON,
                 timezone: str = "UTC"):
        self.store = store
        self.config = config
        self.log = log if log is not None else NotificationLog()
        self.lexicon = lexicon
        self.timezone = timezone
        self.alerts: list[str] = []  # internal failures, never user-facing
        self._user_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._user_locks.setdefault(user_id, threading.Lock())

    def _deviation_candidate(self, metric_id: str, as_of_date: date,
                             user_id: str) -> Optional[Notification]:
        cfg = self.config
        stat, base_ev = compute_baseline(metric_id, as_of_date, self.store,
                                         user_id, self.timezone,
                                         cfg.baseline_days, self.lexicon)
        plan, _cls = _metric_day_plan(metric_id, self.store, user_id,
                                      as_of_date, self.lexicon)
        ctx = _window_ctx(self.store, user_id, as_of_date, self.timezone)
        observed_result = _evaluate_plan(plan, self.store, ctx)
        observed = (observed_result.rows[0][0] if observed_result.rows
                    else None)
        if observed is None:
            return None
        ratio = detect_deviation(observed, stat, cfg.threshold, cfg.min_days)
        if ratio is None:
            return None
        evidence = (Evidence(observed_result.provenance, observed_result),
                    base_ev)
        message, claims = _deviation_message(
            metric_id, observed, stat, ratio,
            ("cell", 0, 0, 0), ("cell", 1, 0, 0), self.lexicon)
        return Notification(user_id=user_id, date=as_of_date.isoformat(),
                            kind="deviation", metric=metric_id,
                            observed=observed, baseline=stat.mean,
                            delta_ratio=ratio, message=message,
                            evidence=evidence, provenance=claims)

    def _debt_candidate(self, as_of_date: date,
                        user_id: str) -> Optional[Notification]:
        found = detect_sleep_debt(as_of_date, self.store, user_id,
                                  self.timezone, self.config, self.lexicon)
        if found is None:
            return None
        finding, evidence = found
        message, claims = _debt_message(finding, evidence[0].result,
                                        ("cell", 1, 0, 0))
        return Notification(user_id=user_id, date=as_of_date.isoformat(),
                            kind="sleep_debt", metric="total_sleep_minutes",
                            observed=finding.debt_minutes,
                            baseline=finding.baseline_mean,
                            delta_ratio=finding.delta_ratio, message=message,
                            evidence=evidence, provenance=claims)

    def _suppressed_by_yesterday(self, cand: Notification) -> bool:
        yesterday = (date.fromisoformat(cand.date)
                     - timedelta(days=1)).isoformat()
        prev = self.log.find(cand.user_id, yesterday, cand.kind, cand.metric)
        if prev is None:
            return False
        growth = abs(cand.delta_ratio) - abs(NotificationLog.record_ratio(prev))
        # inf minus inf is nan; nan fails the growth test, so a repeated
        # zero-baseline spike stays suppressed
        return not growth >= self.config.regrowth

    def run_daily(self, as_of_date: date, user_id: str) -> list[Notification]:
        """Evaluate all templates for one user and day; returns what fired.

        Already-admitted notifications land in the log, so calling twice for
        the same day double-logs; schedule callers run each day once.
        """
        with self._lock_for(user_id):
            candidates: list[Notification] = []
            for metric_id in MONITOR_METRICS:
                try:
                    cand = self._deviation_candidate(metric_id, as_of_date,
                                                     user_id)
                except Exception as exc:
                    self.alerts.append(
                        f"{as_of_date} {user_id} {metric_id}: {exc}")
                    continue
                if cand is not None:
                    candidates.append(cand)
            try:
                debt = self._debt_candidate(as_of_date, user_id)
                if debt is not None:
                    candidates.append(debt)
            except Exception as exc:
                self.alerts.append(f"{as_of_date} {user_id} sleep_debt: {exc}")

            admitted = [c for c in candidates
                        if not self._suppressed_by_yesterday(c)]
            admitted.sort(key=lambda c: (-abs(c.delta_ratio), c.metric, c.kind))
            admitted = admitted[:self.config.daily_cap]
            for n in admitted:
                self.log.append(n)
            return admitted


def run_daily(as_of_date: date, store: Store, user_id: str,
              config: MonitorConfig = MonitorConfig(),
              log: Optional[NotificationLog] = None,
              timezone: str = "UTC",
              lexicon: MetricLexicon = DEFAULT_LEXICON) -> list[Notification]:
    """One-shot convenience wrapper around Monitor.run_daily."""
    monitor = Monitor(store, config, log, lexicon, timezone)
    return monitor.run_daily(as_of_date, user_id)

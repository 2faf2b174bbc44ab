"""Grounded query generation.

A data-seeking message is reduced in two stages: first to a DataRequest --
a small IR answering When / Compared to what / Which metric -- and from
there to one or two validated query plans. Natural-language ambiguity is
quarantined in the first stage; the second is a deterministic template.

Three hard rules are baked into the templates rather than left to callers:

* every time filter is emitted before any aggregation stage, so the
  filter-then-aggregate shape holds by construction;
* every resolved time window is clamped to end at or before the evaluation
  clock -- windows never extend into the future;
* before aggregation, rows are restricted to a single device class chosen
  by the metric's sensor priority, so a night recorded by two devices is
  counted once.
"""

from __future__ import annotations

import calendar
import re
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone as _tz
from typing import Optional, Protocol
from zoneinfo import ZoneInfo

from .router import Intent, classify
from .schema import DEFAULT_LEXICON, MetricDescriptor, MetricLexicon
from .pql.ast import (Aggregation, BinaryOp, Column, CountStage, Literal,
                      Project, QueryPlan, Sort, Summarize, Take, Where)
from .pql.canonical import canonicalize
from .pql.context import EvalContext
from .pql.validate import ValidatedPlan, validate

UNPARSEABLE_TIME = "UNPARSEABLE_TIME"
AMBIGUOUS_PERIOD = "AMBIGUOUS_PERIOD"

AGGREGATIONS = ("sum", "avg", "min", "max", "count", "raw")
COMPARISON_MODES = ("none", "vs_window", "vs_baseline_avg")

# Days in the trailing baseline used for "usual" comparisons; matches the
# monitor's moving-average window so both features agree on "usual".
BASELINE_DAYS = 7


class GeneratorError(ValueError):
    """Message could not be reduced to a DataRequest."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class TimeParseError(GeneratorError):
    def __init__(self, message: str):
        super().__init__(UNPARSEABLE_TIME, message)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open UTC interval [start, end) with a stable label.

    The label names the calendar concept ("last_night", "this_week", an ISO
    date); start/end are the concrete instants it resolved to, in UTC.
    Invariants: start < end and end never exceeds the clock it was resolved
    against.
    """

    start: datetime
    end: datetime
    label: str
    timezone: str

    def __post_init__(self):
        if self.start.tzinfo is None or self.end.tzinfo is None:
            raise ValueError("window bounds must be timezone-aware")
        if self.start >= self.end:
            raise ValueError(f"empty window: {self.start} >= {self.end}")

    def local_dates(self) -> tuple[str, str]:
        """Inclusive ISO date range of local calendar days the window covers."""
        tz = ZoneInfo(self.timezone)
        lo = self.start.astimezone(tz).date()
        hi = (self.end - timedelta(microseconds=1)).astimezone(tz).date()
        return lo.isoformat(), hi.isoformat()

    @property
    def single_day(self) -> bool:
        lo, hi = self.local_dates()
        return lo == hi

    def day_count(self) -> int:
        lo, hi = self.local_dates()
        return (date.fromisoformat(hi) - date.fromisoformat(lo)).days + 1

    def to_dict(self) -> dict:
        return {"start": self.start.isoformat(), "end": self.end.isoformat(),
                "label": self.label, "timezone": self.timezone}

    @classmethod
    def from_dict(cls, doc: dict) -> "TimeWindow":
        return cls(datetime.fromisoformat(doc["start"]),
                   datetime.fromisoformat(doc["end"]),
                   doc["label"], doc["timezone"])


@dataclass(frozen=True)
class DataRequest:
    """When / Compared to what / Which metric, plus who is asking."""

    metric: str
    aggregation: str  # one of AGGREGATIONS
    primary_window: TimeWindow
    comparison_window: Optional[TimeWindow]
    comparison_mode: str  # one of COMPARISON_MODES
    user_id: str

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"bad aggregation {self.aggregation!r}")
        if self.comparison_mode not in COMPARISON_MODES:
            raise ValueError(f"bad comparison_mode {self.comparison_mode!r}")
        if (self.comparison_mode == "none") != (self.comparison_window is None):
            raise ValueError("comparison_window present iff a comparison mode is set")
        if self.comparison_mode != "none" and self.aggregation == "raw":
            raise ValueError("comparisons require an aggregation")

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "aggregation": self.aggregation,
            "primary_window": self.primary_window.to_dict(),
            "comparison_window": (self.comparison_window.to_dict()
                                  if self.comparison_window else None),
            "comparison_mode": self.comparison_mode,
            "user_id": self.user_id,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DataRequest":
        return cls(
            metric=doc["metric"],
            aggregation=doc["aggregation"],
            primary_window=TimeWindow.from_dict(doc["primary_window"]),
            comparison_window=(TimeWindow.from_dict(doc["comparison_window"])
                               if doc.get("comparison_window") else None),
            comparison_mode=doc["comparison_mode"],
            user_id=doc["user_id"],
        )


# ---------------------------------------------------------------------------
# Time normalization


def _local_midnight(d: date, tz: ZoneInfo) -> datetime:
    return datetime(d.year, d.month, d.day, tzinfo=tz).astimezone(_tz.utc)


_LAST_N_DAYS_RE = re.compile(r"(?:last|past|previous)\s+(\d+)\s+days?")
_ISO_DATE_RE = re.compile(r"\d{4}-\d{2}-\d{2}")


def parse_time_expression(phrase: str, now: datetime, timezone: str) -> TimeWindow:
    """Resolve a supported time phrase to a concrete window, never past now.

    Supported: last night, today, yesterday, this week, last week,
    last N days, this month, last month, and a literal ISO date. Anything
    else raises rather than guessing, so the caller can ask for
    clarification instead of answering the wrong question.
    """
    if now.tzinfo is None:
        raise ValueError("now must be timezone-aware")
    now = now.astimezone(_tz.utc)
    tz = ZoneInfo(timezone)
    today = now.astimezone(tz).date()
    text = " ".join(phrase.casefold().split())

    def window(start: datetime, end: datetime, label: str) -> TimeWindow:
        end = min(end, now)
        if start >= end:
            raise TimeParseError(f"{phrase!r} has no elapsed time yet")
        return TimeWindow(start, end, label, timezone)

    if text in ("last night", "last_night", "tonight"):
        return window(_local_midnight(today - timedelta(days=1), tz), now,
                      "last_night")
    if text == "today":
        return window(_local_midnight(today, tz), now, "today")
    if text == "yesterday":
        return window(_local_midnight(today - timedelta(days=1), tz),
                      _local_midnight(today, tz), "yesterday")
    if text in ("this week", "this_week"):
        monday = today - timedelta(days=today.weekday())
        return window(_local_midnight(monday, tz), now, "this_week")
    if text in ("last week", "last_week"):
        monday = today - timedelta(days=today.weekday())
        return window(_local_midnight(monday - timedelta(days=7), tz),
                      _local_midnight(monday, tz), "last_week")
    if text in ("this month", "this_month"):
        return window(_local_midnight(today.replace(day=1), tz), now,
                      "this_month")
    if text in ("last month", "last_month"):
        first = today.replace(day=1)
        prev_last = first - timedelta(days=1)
        return window(_local_midnight(prev_last.replace(day=1), tz),
                      _local_midnight(first, tz), "last_month")
    m = _LAST_N_DAYS_RE.fullmatch(text)
    if m:
        n = int(m.group(1))
        if not 1 <= n <= 366:
            raise TimeParseError(f"day count {n} out of range")
        return window(_local_midnight(today - timedelta(days=n), tz),
                      _local_midnight(today, tz), f"last_{n}_days")
    if _ISO_DATE_RE.fullmatch(text):
        try:
            d = date.fromisoformat(text)
        except ValueError:
            raise TimeParseError(f"{phrase!r} is not a calendar date") from None
        if d > today:
            raise TimeParseError(f"{phrase!r} lies in the future")
        if d == today:
            return window(_local_midnight(d, tz), now, d.isoformat())
        return window(_local_midnight(d, tz),
                      _local_midnight(d + timedelta(days=1), tz), d.isoformat())
    raise TimeParseError(f"unsupported time phrase {phrase!r}")


def baseline_window(now: datetime, timezone: str,
                    days: int = BASELINE_DAYS) -> TimeWindow:
    """The trailing block of complete local days, excluding today."""
    now = now.astimezone(_tz.utc)
    tz = ZoneInfo(timezone)
    today = now.astimezone(tz).date()
    return TimeWindow(_local_midnight(today - timedelta(days=days), tz),
                      _local_midnight(today, tz), f"baseline_{days}d", timezone)


# ---------------------------------------------------------------------------
# Message -> DataRequest

_TIME_PHRASE_RE = re.compile(
    r"last night|tonight|today|yesterday|this week|last week|this month"
    r"|last month|(?:last|past|previous) \d+ days?|\d{4}-\d{2}-\d{2}")
_COMPARE_RE = re.compile(
    r"\bcompared?\b|\bcomparison\b|\bvs\b|\bversus\b|\bagainst\b"
    r"|\bdifference\b|stack up")
_BASELINE_RE = re.compile(r"\busual(?:ly)?\b|\btypical(?:ly)?\b|\bnormally\b")
_BASELINE_CONTEXT_RE = re.compile(
    r"\busual\b|\btypical\b|weekly average|daily average|\baverage\b"
    r"|\bbaseline\b|\bnormal\b")
_COUNT_RE = re.compile(r"how many (?:nights|days|sessions|times)")
# Temporal language the vocabulary does not cover; when one of these is the
# only time reference in a message, asking beats guessing a default window.
_RESIDUAL_TIME_RE = re.compile(
    r"\bago\b|\bfortnights?\b|\bweeks?\b|\bmonths?\b|\byears?\b"
    r"|\bmonday\b|\btuesday\b|\bwednesday\b|\bthursday\b|\bfriday\b"
    r"|\bsaturday\b|\bsunday\b"
    r"|\bjanuary\b|\bfebruary\b|\bmarch\b|\bapril\b|\bmay\b|\bjune\b"
    r"|\bjuly\b|\baugust\b|\bseptember\b|\boctober\b|\bnovember\b"
    r"|\bdecember\b")
_AGG_KEYWORDS = (
    ("max", re.compile(r"\bmax\b|\bmaximum\b|\bmost\b|\bhighest\b|\blongest\b"
                       r"|\bbest\b|\bpeak\b")),
    ("min", re.compile(r"\bmin\b|\bminimum\b|\bleast\b|\blowest\b|\bfewest\b"
                       r"|\bshortest\b")),
    ("sum", re.compile(r"\btotal\b|in total|\baltogether\b|\bcombined\b"
                       r"|\bsum\b|\boverall\b")),
    ("avg", re.compile(r"\baverage\b|\bavg\b|\bmean\b|on average"
                       r"|\btypically\b")),
)


def _find_time_phrases(folded: str) -> list[tuple[str, tuple[int, int]]]:
    return [(m.group(0), m.span()) for m in _TIME_PHRASE_RE.finditer(folded)]


def _mask(text: str, spans: list[tuple[int, int]]) -> str:
    chars = list(text)
    for lo, hi in spans:
        for i in range(lo, hi):
            chars[i] = " "
    return "".join(chars)


def build_data_request(message: str, intent: Intent, now: datetime,
                       timezone: str, user_id: str,
                       lexicon: MetricLexicon = DEFAULT_LEXICON) -> DataRequest:
    """Reduce a data-intent message to its DataRequest.

    Raises GeneratorError with UNPARSEABLE_TIME or AMBIGUOUS_PERIOD when the
    temporal side cannot be pinned down; the caller should ask a clarifying
    question rather than guess.
    """
    if intent.kind != "data" or intent.matched_metric is None:
        raise ValueError("build_data_request needs a data intent")
    metric = lexicon.by_id(intent.matched_metric)
    folded = " ".join(message.casefold().split())

    phrases = _find_time_phrases(folded)
    masked_spans = [span for _, span in phrases]

    # Comparison shape first: two explicit periods beat baseline triggers.
    comparison_mode = "none"
    comparison_window: Optional[TimeWindow] = None
    has_compare = bool(_COMPARE_RE.search(folded))
    if len(phrases) > 2:
        raise GeneratorError(AMBIGUOUS_PERIOD,
                             f"found {len(phrases)} time phrases; need at most 2")
    if len(phrases) == 2:
        if not has_compare:
            raise GeneratorError(
                AMBIGUOUS_PERIOD,
                "two time phrases without a comparison word; unclear period")
        comparison_mode = "vs_window"
        primary_window = parse_time_expression(phrases[0][0], now, timezone)
        comparison_window = parse_time_expression(phrases[1][0], now, timezone)
    else:
        if has_compare or _BASELINE_RE.search(folded):
            comparison_mode = "vs_baseline_avg"
            comparison_window = baseline_window(now, timezone)
        if phrases:
            primary_window = parse_time_expression(phrases[0][0], now, timezone)
        else:
            residual = _RESIDUAL_TIME_RE.search(folded)
            if residual:
                raise TimeParseError(
                    f"cannot resolve the time reference near {residual.group(0)!r}")
            default = ("last night" if metric.table == "sleep_session"
                       else "today")
            primary_window = parse_time_expression(default, now, timezone)

    # Aggregation keywords are read from what remains after consuming the
    # metric's surface form, the time phrases, and comparison vocabulary --
    # "usual weekly average" describes the baseline, not the aggregation.
    remainder = _mask(folded, masked_spans)
    found = lexicon.find_surface(message)
    if found is not None:
        _, surface = found
        idx = remainder.find(surface)
        if idx >= 0:
            remainder = _mask(remainder, [(idx, idx + len(surface))])
    remainder = _COMPARE_RE.sub(" ", remainder)
    if comparison_mode != "none":
        remainder = _BASELINE_CONTEXT_RE.sub(" ", remainder)

    aggregation: Optional[str] = None
    if _COUNT_RE.search(folded):
        aggregation = "count"
    else:
        for name, pattern in _AGG_KEYWORDS:
            if pattern.search(remainder):
                aggregation = name
                break
    if aggregation is None:
        # "last night" picks one session even though its envelope spans the
        # yesterday/today date pair, so it reads raw like a single day does.
        single_night = (primary_window.single_day
                        or primary_window.label == "last_night")
        if (comparison_mode == "none" and metric.table == "sleep_session"
                and single_night):
            aggregation = "raw"
        else:
            aggregation = metric.default_aggregation
    # A multi-day window compared against the per-day baseline must itself
    # be a per-day figure, or the comparison is meaningless.
    if (comparison_mode == "vs_baseline_avg" and aggregation == "sum"
            and not primary_window.single_day):
        aggregation = "avg"
    if aggregation == "raw" and comparison_mode != "none":
        aggregation = metric.default_aggregation
    # A record count has no per-day baseline to stand against; answer the
    # count plainly. Explicit window-vs-window count comparisons stay.
    if aggregation == "count" and comparison_mode == "vs_baseline_avg":
        comparison_mode, comparison_window = "none", None

    return DataRequest(metric=metric.metric_id, aggregation=aggregation,
                       primary_window=primary_window,
                       comparison_window=comparison_window,
                       comparison_mode=comparison_mode, user_id=user_id)


# ---------------------------------------------------------------------------
# DataRequest -> validated plans


@dataclass(frozen=True)
class InstantiatedQuery:
    """One or two validated plans plus their canonical printed forms."""

    request: DataRequest
    primary: ValidatedPlan
    primary_text: str
    comparison: Optional[ValidatedPlan]
    comparison_text: Optional[str]
    device_class: str

    @property
    def plans(self) -> list[tuple[str, ValidatedPlan]]:
        out = [(self.primary_text, self.primary)]
        if self.comparison is not None:
            out.append((self.comparison_text, self.comparison))
        return out


def _next_day(iso: str) -> str:
    return (date.fromisoformat(iso) + timedelta(days=1)).isoformat()


def _present_classes(store, user_id: str, metric: MetricDescriptor,
                     date_lo: str, date_hi: str) -> set[str]:
    rows = store.scan(metric.table, user_id, (date_lo, _next_day(date_hi)))
    present = set()
    for row in rows:
        if row.get(metric.column) is None:
            continue
        if metric.table == "sleep_session" and row.get("is_main_sleep") is not True:
            continue
        present.add(row["device_class"])
    return present


def choose_device_class(metric: MetricDescriptor, store, user_id: str,
                        date_lo: str, date_hi: str) -> str:
    """Top-priority device class with usable rows in the window.

    Falls back to the metric's first priority when nothing is present; the
    query then simply returns no rows.
    """
    if store is not None:
        present = _present_classes(store, user_id, metric, date_lo, date_hi)
        for cls in metric.sensor_priority:
            if cls in present:
                return cls
    return metric.sensor_priority[0]


def _narrow_last_night(store, user_id: str, cls: str,
                       date_lo: str, date_hi: str) -> Optional[str]:
    """Local date of the most recent main sleep session in the range."""
    rows = store.scan("sleep_session", user_id, (date_lo, _next_day(date_hi)))
    candidates = [r for r in rows
                  if r["device_class"] == cls and r["is_main_sleep"] is True]
    if not candidates:
        return None
    return max(candidates, key=lambda r: r["end_utc"])["local_date"]


def _date_conjuncts(date_lo: str, date_hi: str) -> list:
    col = Column("local_date")
    if date_lo == date_hi:
        return [BinaryOp("==", col, Literal(date_lo))]
    return [BinaryOp(">=", col, Literal(date_lo)),
            BinaryOp("<=", col, Literal(date_hi))]


def build_metric_plan(metric: MetricDescriptor, aggregation: str, cls: str,
                date_lo: str, date_hi: str) -> QueryPlan:
    conjuncts = _date_conjuncts(date_lo, date_hi)
    if metric.table == "sleep_session":
        conjuncts.append(BinaryOp("==", Column("is_main_sleep"), Literal(True)))
    conjuncts.append(BinaryOp("==", Column("device_class"), Literal(cls)))
    expr = conjuncts[0]
    for c in conjuncts[1:]:
        expr = BinaryOp("and", expr, c)
    stages: list = [Where(expr)]
    if aggregation == "raw":
        order_col = ("end_utc" if metric.table == "sleep_session"
                     else "local_date")
        stages += [Sort(order_col, descending=True), Take(1),
                   Project((metric.column,))]
    elif aggregation == "count":
        stages.append(CountStage())
    else:
        stages.append(Summarize((Aggregation(aggregation, metric.column),), ()))
    return QueryPlan(metric.table, tuple(stages))


class PlanTemplateError(AssertionError):
    """A template produced an invalid plan; always a defect, never user error."""


def _validated(plan: QueryPlan, ctx: EvalContext) -> tuple[ValidatedPlan, str]:
    result = validate(plan, ctx=ctx)
    if not result.ok or result.warnings:
        raise PlanTemplateError(
            f"template produced diagnostics: {result.diagnostics}")
    canon = canonicalize(result.validated, ctx)
    return result.validated, canon.text


def instantiate_query(request: DataRequest, ctx: EvalContext, store=None,
                      lexicon: MetricLexicon = DEFAULT_LEXICON) -> InstantiatedQuery:
    """Turn a DataRequest into validated plans.

    ``store`` enables data-aware choices: which device class to pin, and
    which concrete night "last night" means. Without it the metric's first
    priority class is assumed and "last night" keeps its two-day envelope.
    """
    metric = lexicon.by_id(request.metric)
    p_lo, p_hi = request.primary_window.local_dates()
    cls = choose_device_class(metric, store, request.user_id, p_lo, p_hi)

    if (request.primary_window.label == "last_night" and store is not None
            and metric.table == "sleep_session"):
        night = _narrow_last_night(store, request.user_id, cls, p_lo, p_hi)
        if night is not None:
            p_lo = p_hi = night

    primary_plan = build_metric_plan(metric, request.aggregation, cls, p_lo, p_hi)
    primary, primary_text = _validated(primary_plan, ctx)

    comparison = comparison_text = None
    if request.comparison_mode == "vs_window":
        c_lo, c_hi = request.comparison_window.local_dates()
        comp_plan = build_metric_plan(metric, request.aggregation, cls, c_lo, c_hi)
        comparison, comparison_text = _validated(comp_plan, ctx)
    elif request.comparison_mode == "vs_baseline_avg":
        c_lo, c_hi = request.comparison_window.local_dates()
        comp_plan = build_metric_plan(metric, "avg", cls, c_lo, c_hi)
        comparison, comparison_text = _validated(comp_plan, ctx)

    return InstantiatedQuery(request=request, primary=primary,
                             primary_text=primary_text,
                             comparison=comparison,
                             comparison_text=comparison_text,
                             device_class=cls)


# ---------------------------------------------------------------------------
# Pluggable translation backend


@dataclass(frozen=True)
class Translation:
    """What a backend hands the engine: a verdict plus its payload.

    ``request`` is set for data intents; ``reply`` optionally carries a
    free-text chat answer. Backends never produce numbers -- numeric content
    enters responses only from query results.
    """

    intent: Intent
    request: Optional[DataRequest] = None
    reply: Optional[str] = None

    def to_document(self) -> dict:
        return {
            "version": 1,
            "intent": {"kind": self.intent.kind,
                       "matched_metric": self.intent.matched_metric,
                       "confidence": self.intent.confidence,
                       "rationale": self.intent.rationale},
            "request": self.request.to_dict() if self.request else None,
            "reply": self.reply,
        }

    @classmethod
    def from_document(cls, doc: dict) -> "Translation":
        if doc.get("version") != 1:
            raise ValueError(f"unsupported translation version {doc.get('version')!r}")
        i = doc["intent"]
        return cls(
            intent=Intent(i["kind"], i.get("matched_metric"),
                          i.get("confidence", 1.0), i.get("rationale", "")),
            request=(DataRequest.from_dict(doc["request"])
                     if doc.get("request") else None),
            reply=doc.get("reply"),
        )


class TranslatorBackend(Protocol):
    name: str

    def translate(self, message: str, *, lexicon: MetricLexicon,
                  now: datetime, timezone: str, user_id: str) -> Translation:
        ...


class DeterministicBackend:
    """Rule-based reference backend: classify, then build the request."""

    name = "deterministic"

    def translate(self, message: str, *, lexicon: MetricLexicon,
                  now: datetime, timezone: str, user_id: str) -> Translation:
        intent = classify(message, lexicon)
        if intent.kind != "data":
            return Translation(intent=intent)
        request = build_data_request(message, intent, now, timezone,
                                     user_id, lexicon)
        return Translation(intent=intent, request=request)


def clamp_request(request: DataRequest, now: datetime) -> tuple[DataRequest, bool]:
    """Force both windows to end at or before now; reports whether it acted.

    Backends are untrusted here: a window that reaches into the future is
    cut back, and a window that lies entirely in the future is rejected.
    """
    now = now.astimezone(_tz.utc)
    clamped = False

    def fix(win: Optional[TimeWindow]) -> Optional[TimeWindow]:
        nonlocal clamped
        if win is None or win.end <= now:
            return win
        if win.start >= now:
            raise GeneratorError(UNPARSEABLE_TIME,
                                 f"window {win.label!r} lies entirely in the future")
        clamped = True
        return replace(win, end=now)

    primary = fix(request.primary_window)
    comparison = fix(request.comparison_window)
    if not clamped:
        return request, False
    return replace(request, primary_window=primary,
                   comparison_window=comparison), True

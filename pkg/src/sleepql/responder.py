"""Response rendering with auditable number provenance.

Every number a data-path response states is tied to a provenance claim:
which result cell (or pair of cells) it came from and which declared
transform produced the printed token. The faithfulness audit re-derives
each token from the attached evidence and additionally requires that every
digit run in the text falls inside some claimed token -- so both a
distorted number and a fabricated one are caught.

Chat and unsupported responses carry no provenance and must be digit-free;
they are never allowed to state numbers about the user's data.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .generator import DataRequest, TimeWindow
from .schema import DEFAULT_LEXICON, MetricDescriptor, MetricLexicon
from .pql.evaluate import QueryResult

KINDS = ("chat", "simple", "comparative", "null_data", "unsupported",
         "clarification")

NULL_DATA_PHRASE = "no records exist"

# Human noun phrases per metric; none may contain a digit.
_DISPLAY = {
    "deep_sleep_minutes": "deep sleep",
    "rem_minutes": "REM sleep",
    "light_minutes": "light sleep",
    "total_sleep_minutes": "sleep",
    "waso_minutes": "wake after sleep onset",
    "snoring_minutes": "snoring",
    "ahi": "apnea-hypopnea index",
    "sleep_efficiency": "sleep efficiency",
    "steps": "steps",
    "calories": "calories",
    "hr_avg": "heart rate",
}


@dataclass(frozen=True)
class Evidence:
    plan_text: str
    result: QueryResult

    def to_dict(self) -> dict:
        return {"plan": self.plan_text, "result": self.result.to_dict()}


@dataclass(frozen=True)
class NumberClaim:
    """One printed token and the recipe that produced it.

    ``sources`` are references resolvable against the response: ("cell",
    evidence_index, row, col) reads a result cell; ("window", which, field)
    reads a window date from the echoed request.
    """

    token: str
    transform: str
    sources: tuple[tuple, ...]

    def to_dict(self) -> dict:
        return {"token": self.token, "transform": self.transform,
                "sources": [list(s) for s in self.sources]}


@dataclass(frozen=True)
class GroundedResponse:
    kind: str
    text: str
    evidence: tuple[Evidence, ...] = ()
    number_provenance: tuple[NumberClaim, ...] = ()
    request: Optional[DataRequest] = None
    trace: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"bad response kind {self.kind!r}")
        if self.kind == "null_data" and NULL_DATA_PHRASE not in self.text:
            raise ValueError(f"null_data text must contain {NULL_DATA_PHRASE!r}")

    def with_trace(self, *notes: str) -> "GroundedResponse":
        return replace(self, trace=self.trace + notes)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "text": self.text,
            "evidence": [e.to_dict() for e in self.evidence],
            "number_provenance": [c.to_dict() for c in self.number_provenance],
            "request": self.request.to_dict() if self.request else None,
            "trace": list(self.trace),
        }


# ---------------------------------------------------------------------------
# Token formatting (the declared transforms)


def duration_words(minutes: float) -> str:
    """75 -> "1 hour and 15 minutes"; rounds to the nearest whole minute."""
    total = int(round(minutes))
    if total < 0:
        raise ValueError("negative duration")
    hours, mins = divmod(total, 60)
    if hours == 0:
        return f"{mins} minute{'s' if mins != 1 else ''}"
    head = f"{hours} hour{'s' if hours != 1 else ''}"
    if mins == 0:
        return head
    return f"{head} and {mins} minute{'s' if mins != 1 else ''}"


def thousands(value: float) -> str:
    return f"{round(value):,}"


def decimal1(value: float) -> str:
    return f"{value:.1f}"


def percent100(value: float) -> str:
    return f"{value * 100:.1f}%"


def percent_diff(primary: float, reference: float) -> str:
    return f"{(primary - reference) / reference * 100:+.1f}%"


_TRANSFORMS = {
    "duration_words": lambda vals: duration_words(vals[0]),
    "thousands": lambda vals: thousands(vals[0]),
    "decimal1": lambda vals: decimal1(vals[0]),
    "percent100": lambda vals: percent100(vals[0]),
    "percent_diff": lambda vals: percent_diff(vals[0], vals[1]),
    "count": lambda vals: f"{int(vals[0]):,}",
    "date": lambda vals: str(vals[0]),
    "debt_minutes": lambda vals: duration_words(
        sum(max(0.0, vals[0] - v) for v in vals[1:])),
}


def format_metric_value(metric: MetricDescriptor, value: float) -> tuple[str, str]:
    """(printed token, transform name) for one value of this metric."""
    if metric.is_duration:
        return duration_words(value), "duration_words"
    if metric.metric_id == "sleep_efficiency":
        return percent100(value), "percent100"
    if metric.metric_id in ("steps", "calories"):
        return thousands(value), "thousands"
    return decimal1(value), "decimal1"


def _value_with_unit(metric: MetricDescriptor, token: str) -> str:
    if metric.metric_id == "steps":
        return f"{token} steps"
    if metric.metric_id == "calories":
        return f"{token} kcal"
    if metric.metric_id == "hr_avg":
        return f"{token} bpm"
    if metric.metric_id == "ahi":
        return f"{token} events per hour"
    return token  # durations and percentages carry their own wording


def window_phrase(window: TimeWindow, which: str) -> tuple[str, list[NumberClaim]]:
    """Human phrase for a window, with claims for any dates it prints."""
    label = window.label
    fixed = {
        "last_night": "last night", "today": "today", "yesterday": "yesterday",
        "this_week": "this week", "last_week": "last week",
        "this_month": "this month", "last_month": "last month",
    }
    if label in fixed:
        return fixed[label], []
    lo, hi = window.local_dates()
    if lo == hi:
        claim = NumberClaim(lo, "date", (("window", which, "start_date"),))
        return f"on {lo}", [claim]
    return (f"between {lo} and {hi}",
            [NumberClaim(lo, "date", (("window", which, "start_date"),)),
             NumberClaim(hi, "date", (("window", which, "end_date"),))])


# ---------------------------------------------------------------------------
# Rendering


def _scalar(result: QueryResult) -> Optional[float]:
    if not result.rows:
        return None
    return result.rows[0][0]


def _per_unit(metric: MetricDescriptor) -> str:
    return "night" if metric.table == "sleep_session" else "day"


def _simple_sentence(metric: MetricDescriptor, aggregation: str, token: str,
                     when: str) -> str:
    name = _DISPLAY[metric.metric_id]
    value = _value_with_unit(metric, token)
    per = _per_unit(metric)
    if aggregation == "count":
        noun = "nights" if per == "night" else "days"
        return f"You have {token} {noun} with records {when}."
    if aggregation == "avg":
        if metric.metric_id == "steps":
            return f"On average, you took {value} per {per} {when}."
        if metric.metric_id == "calories":
            return f"On average, you burned {value} per {per} {when}."
        return f"On average, your {name} was {value} per {per} {when}."
    if aggregation == "sum":
        if metric.metric_id == "steps":
            return f"In total, you took {value} {when}."
        if metric.metric_id == "calories":
            return f"In total, you burned {value} {when}."
        return f"In total, you got {value} of {name} {when}."
    if aggregation in ("min", "max"):
        adj = ({"max": "longest", "min": "shortest"} if metric.is_duration
               else {"max": "highest", "min": "lowest"})[aggregation]
        return f"Your {adj} {name} {when} was {value}."
    # raw single reading
    if metric.metric_id == "steps":
        return f"You took {value} {when}."
    if metric.metric_id == "calories":
        return f"You burned {value} {when}."
    if metric.is_duration:
        return f"You got {value} of {name} {when}."
    return f"Your {name} {when} was {value}."


def render(request: DataRequest, results: Sequence[QueryResult],
           lexicon: MetricLexicon = DEFAULT_LEXICON) -> GroundedResponse:
    """Render the data-path outcome for an executed request.

    ``results`` holds the primary result and, for comparisons, the
    reference result, in plan order. Evidence plan texts are taken from
    each result's recorded provenance.
    """
    metric = lexicon.by_id(request.metric)
    expected = 1 if request.comparison_mode == "none" else 2
    if len(results) != expected:
        raise AssertionError(
            f"{request.comparison_mode} request needs {expected} results, "
            f"got {len(results)}")
    evidence = tuple(Evidence(r.provenance, r) for r in results)

    when, claims = window_phrase(request.primary_window, "primary")
    primary_value = _scalar(results[0])
    if primary_value is None:
        name = _DISPLAY[metric.metric_id]
        text = (f"I checked your {name} {when}, but {NULL_DATA_PHRASE} "
                "for that period.")
        return GroundedResponse("null_data", text, evidence, tuple(claims),
                                request)

    if request.aggregation == "count":
        # the scalar is a row count, not a metric reading
        token, transform = f"{int(primary_value):,}", "count"
    else:
        token, transform = format_metric_value(metric, primary_value)
    claims.append(NumberClaim(token, transform, (("cell", 0, 0, 0),)))
    # an aggregate over a single day is just that day's value; phrase it so
    sentence_agg = request.aggregation
    if sentence_agg in ("sum", "avg") and request.primary_window.single_day:
        sentence_agg = "raw"
    sentence = _simple_sentence(metric, sentence_agg, token, when)

    if request.comparison_mode == "none":
        return GroundedResponse("simple", sentence, evidence, tuple(claims),
                                request)

    reference_value = _scalar(results[1])
    if reference_value is None or reference_value == 0:
        text = sentence + " No baseline available for comparison."
        return GroundedResponse("simple", text, evidence, tuple(claims),
                                request)

    if request.aggregation == "count" and request.comparison_mode == "vs_window":
        # window-vs-window count comparisons put a count on both sides;
        # baseline references are always per-day metric averages
        ref_token, ref_transform = f"{int(reference_value):,}", "count"
        noun = "nights" if metric.table == "sleep_session" else "days"
        ref_value_str = f"{ref_token} {noun}"
    else:
        ref_token, ref_transform = format_metric_value(metric, reference_value)
        ref_value_str = _value_with_unit(metric, ref_token)
    claims.append(NumberClaim(ref_token, ref_transform, (("cell", 1, 0, 0),)))
    pct = percent_diff(primary_value, reference_value)
    claims.append(NumberClaim(pct, "percent_diff",
                              (("cell", 0, 0, 0), ("cell", 1, 0, 0))))
    if request.comparison_mode == "vs_baseline_avg":
        text = (f"{sentence[:-1]}, compared with your seven-day average of "
                f"{ref_value_str}: {pct}.")
    else:
        ref_when, ref_claims = window_phrase(request.comparison_window,
                                             "comparison")
        claims.extend(ref_claims)
        text = (f"{sentence[:-1]}, compared with {ref_value_str} {ref_when}: "
                f"{pct}.")
    return GroundedResponse("comparative", text, evidence, tuple(claims),
                            request)


_DEFAULT_CHAT_REPLY = (
    "Happy to help. Keeping a regular sleep and wake time, dimming lights "
    "in the evening, and avoiding caffeine or heavy meals late in the day "
    "all support deeper sleep. Ask about your recorded sleep or activity "
    "and I can ground the answer in your own measurements.")


def render_chat(message: str, reply: Optional[str] = None) -> GroundedResponse:
    """Free-conversation path; the reply must make no numeric data claims."""
    return GroundedResponse("chat", reply or _DEFAULT_CHAT_REPLY)


def render_unsupported(topic: str,
                       lexicon: MetricLexicon = DEFAULT_LEXICON) -> GroundedResponse:
    names = ", ".join(_DISPLAY.get(m.metric_id, m.metric_id)
                      for m in lexicon.metrics)
    text = (f"I do not have data about {topic}, so I cannot answer that "
            f"from your records. I can answer questions about: {names}.")
    return GroundedResponse("unsupported", text)


def render_clarification(code: str, detail: str = "") -> GroundedResponse:
    if code == "AMBIGUOUS_PERIOD":
        text = ("I found more than one time period in your question and "
                "could not tell which you meant. Please ask about a single "
                "period, or phrase it as one period compared to another.")
    else:
        text = ("I could not work out the time period you mean. Try phrases "
                "like last night, yesterday, this week, last week, or a "
                "specific date.")
    return GroundedResponse("clarification", text,
                            trace=(f"clarification:{code}",) if code else ())


# ---------------------------------------------------------------------------
# Faithfulness audit


@dataclass(frozen=True)
class AuditVerdict:
    faithful: bool
    violations: tuple[str, ...] = ()


_DIGIT_RUN_RE = re.compile(r"\d+(?:[.,]\d+)*")


def _resolve_source(source: tuple, response: GroundedResponse):
    kind = source[0]
    if kind == "cell":
        _, e, r, c = source
        try:
            return response.evidence[e].result.rows[r][c]
        except IndexError:
            return None
    if kind == "window":
        _, which, fld = source
        if response.request is None:
            return None
        window = (response.request.primary_window if which == "primary"
                  else response.request.comparison_window)
        if window is None:
            return None
        lo, hi = window.local_dates()
        return lo if fld == "start_date" else hi
    if kind == "value":
        return source[1]
    return None


def faithfulness_audit(response: GroundedResponse) -> AuditVerdict:
    """Re-derive every claimed token and check full digit coverage.

    A response is faithful when (a) each provenance claim reproduces its
    token from the referenced evidence under its declared transform, (b)
    each claimed token occurs in the text, and (c) no digit run in the text
    lies outside a claimed token. Chat, unsupported, and clarification
    responses must be digit-free.
    """
    violations: list[str] = []
    text = response.text

    if response.kind in ("chat", "unsupported", "clarification"):
        if response.number_provenance:
            violations.append(f"{response.kind} response carries provenance")
        if _DIGIT_RUN_RE.search(text):
            violations.append(f"{response.kind} response contains digits")
        return AuditVerdict(not violations, tuple(violations))

    if response.kind == "null_data" and NULL_DATA_PHRASE not in text:
        violations.append(f"null_data text lacks {NULL_DATA_PHRASE!r}")

    covered = [False] * len(text)
    for claim in response.number_provenance:
        fn = _TRANSFORMS.get(claim.transform)
        if fn is None:
            violations.append(f"unknown transform {claim.transform!r}")
            continue
        values = [_resolve_source(s, response) for s in claim.sources]
        if any(v is None for v in values):
            violations.append(f"claim {claim.token!r}: unresolvable source")
            continue
        try:
            expected = fn(values)
        except (ValueError, ZeroDivisionError, TypeError) as exc:
            violations.append(f"claim {claim.token!r}: transform failed ({exc})")
            continue
        if expected != claim.token:
            violations.append(
                f"claim {claim.token!r} does not re-derive (expected "
                f"{expected!r})")
            continue
        spans = [m.span() for m in re.finditer(re.escape(claim.token), text)]
        if not spans:
            violations.append(f"claimed token {claim.token!r} absent from text")
            continue
        for lo, hi in spans:
            for i in range(lo, hi):
                covered[i] = True

    for m in _DIGIT_RUN_RE.finditer(text):
        if not all(covered[i] for i in range(*m.span())):
            violations.append(f"number {m.group(0)!r} has no provenance")

    return AuditVerdict(not violations, tuple(violations))

"""Seeded question corpus for end-to-end validation.

Three categories: ``simple`` (one metric, one window), ``comparative``
(explicit second window or an implicit seven-day baseline), and ``null``
(well-formed questions about dates before any data exists). Every item
carries the request it should translate to, built from the template's
own parameters, plus the oracle's answer computed straight from the raw
documents, so the validation run can grade translation and retrieval
independently of the engine under test.

Questions stay inside the supported time/aggregation vocabulary on
purpose; out-of-vocabulary phrasings are exercised separately as
clarification and injected-fault tests.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import timedelta
from typing import Optional

from ..generator import (DataRequest, baseline_window, parse_time_expression)
from ..router import classify
from ..schema import DEFAULT_LEXICON, MetricLexicon
from .datagen import Dataset
from .oracle import OracleAnswer, oracle_evaluate

CATEGORIES = ("simple", "comparative", "null")

# (question, metric_id, aggregation, time phrase)
_SIMPLE: tuple[tuple[str, str, str, str], ...] = (
    ("How much deep sleep did I get last night?",
     "deep_sleep_minutes", "raw", "last night"),
    ("How much REM sleep did I get last night?",
     "rem_minutes", "raw", "last night"),
    ("How long did I sleep last night?",
     "total_sleep_minutes", "raw", "last night"),
    ("How much light sleep did I get last night?",
     "light_minutes", "raw", "last night"),
    ("How much snoring was recorded last night?",
     "snoring_minutes", "raw", "last night"),
    ("What was my AHI last night?", "ahi", "raw", "last night"),
    ("What was my sleep efficiency last night?",
     "sleep_efficiency", "raw", "last night"),
    ("How much time awake was recorded last night?",
     "waso_minutes", "raw", "last night"),
    ("How many steps did I take yesterday?", "steps", "sum", "yesterday"),
    ("How many steps did I take last week?", "steps", "sum", "last week"),
    ("How many steps have I taken today?", "steps", "sum", "today"),
    ("How many calories did I burn yesterday?", "calories", "sum", "yesterday"),
    ("What was my average heart rate yesterday?", "hr_avg", "avg", "yesterday"),
    ("What was my average sleep over the last 7 days?",
     "total_sleep_minutes", "avg", "last 7 days"),
    ("What was my average deep sleep over the last 14 days?",
     "deep_sleep_minutes", "avg", "last 14 days"),
    ("What was my average sleep efficiency this week?",
     "sleep_efficiency", "avg", "this week"),
    ("What was my average time awake over the last 10 days?",
     "waso_minutes", "avg", "last 10 days"),
    ("What was my average snoring over the last 14 days?",
     "snoring_minutes", "avg", "last 14 days"),
    ("What was my average AHI over the last 7 days?",
     "ahi", "avg", "last 7 days"),
    ("What was my average calorie burn over the last 21 days?",
     "calories", "avg", "last 21 days"),
    ("What was my highest step count in the last 14 days?",
     "steps", "max", "last 14 days"),
    ("What was the most calories I burned in the last 7 days?",
     "calories", "max", "last 7 days"),
    ("What was my longest sleep in the last 30 days?",
     "total_sleep_minutes", "max", "last 30 days"),
    ("What was my shortest sleep in the last 30 days?",
     "total_sleep_minutes", "min", "last 30 days"),
    ("What was my lowest heart rate this week?", "hr_avg", "min", "this week"),
    ("What was the fewest steps I took in the last 7 days?",
     "steps", "min", "last 7 days"),
    ("How many nights of sleep do I have on record in the last 30 days?",
     "total_sleep_minutes", "count", "last 30 days"),
    ("How many days did I log steps in the last 14 days?",
     "steps", "count", "last 14 days"),
    ("How many steps did I take on 2025-07-01?", "steps", "sum", "2025-07-01"),
    ("How much sleep did I get on 2025-06-20?",
     "total_sleep_minutes", "raw", "2025-06-20"),
)

# (question, metric_id, aggregation, primary phrase, mode, comparison phrase)
# A None comparison phrase means the trailing seven-day baseline.
_COMPARATIVE: tuple[tuple[str, str, str, str, str, Optional[str]], ...] = (
    ("How did my sleep this week compare to last week?",
     "total_sleep_minutes", "avg", "this week", "vs_window", "last week"),
    ("How did my steps this week compare to last week?",
     "steps", "sum", "this week", "vs_window", "last week"),
    ("How did my deep sleep this week compare to last week?",
     "deep_sleep_minutes", "avg", "this week", "vs_window", "last week"),
    ("How do my steps today compare to yesterday?",
     "steps", "sum", "today", "vs_window", "yesterday"),
    ("How did my sleep yesterday compare to last week?",
     "total_sleep_minutes", "avg", "yesterday", "vs_window", "last week"),
    ("How did my sleep efficiency this week compare to last week?",
     "sleep_efficiency", "avg", "this week", "vs_window", "last week"),
    ("How did my heart rate this week compare against last week?",
     "hr_avg", "avg", "this week", "vs_window", "last week"),
    ("What is the difference in my sleep between this week and last week?",
     "total_sleep_minutes", "avg", "this week", "vs_window", "last week"),
    ("How does my snoring this week stack up against last week?",
     "snoring_minutes", "avg", "this week", "vs_window", "last week"),
    ("How did my steps on 2025-07-01 compare to 2025-07-08?",
     "steps", "sum", "2025-07-01", "vs_window", "2025-07-08"),
    ("How did my calories this week compare to last week?",
     "calories", "sum", "this week", "vs_window", "last week"),
    ("How did my REM sleep this week compare to last week?",
     "rem_minutes", "avg", "this week", "vs_window", "last week"),
    ("How did my time awake this week compare to last week?",
     "waso_minutes", "avg", "this week", "vs_window", "last week"),
    ("How did my AHI this week compare to last week?",
     "ahi", "avg", "this week", "vs_window", "last week"),
    ("How did my light sleep yesterday compare to last week?",
     "light_minutes", "avg", "yesterday", "vs_window", "last week"),
    ("How many steps did I take yesterday compared to last week?",
     "steps", "sum", "yesterday", "vs_window", "last week"),
    ("How does my activity today compare to my usual weekly average?",
     "steps", "sum", "today", "vs_baseline_avg", None),
    ("How was my sleep last night compared to usual?",
     "total_sleep_minutes", "avg", "last night", "vs_baseline_avg", None),
    ("Was my deep sleep last night above my usual average?",
     "deep_sleep_minutes", "avg", "last night", "vs_baseline_avg", None),
    ("How do my steps this week compare to my usual daily average?",
     "steps", "avg", "this week", "vs_baseline_avg", None),
    ("How does my heart rate today compare to normal?",
     "hr_avg", "avg", "today", "vs_baseline_avg", None),
    ("How did my sleep efficiency last night compare with my typical average?",
     "sleep_efficiency", "avg", "last night", "vs_baseline_avg", None),
    ("How much snoring did I have last night compared to usual?",
     "snoring_minutes", "avg", "last night", "vs_baseline_avg", None),
    ("How does my AHI this week compare to my usual average?",
     "ahi", "avg", "this week", "vs_baseline_avg", None),
    ("How many calories have I burned today versus my usual average?",
     "calories", "sum", "today", "vs_baseline_avg", None),
    ("How does my time awake this week compare to usual?",
     "waso_minutes", "avg", "this week", "vs_baseline_avg", None),
    ("How did my REM sleep last night compare to usual?",
     "rem_minutes", "avg", "last night", "vs_baseline_avg", None),
    ("How does my sleep compare to usual?",
     "total_sleep_minutes", "avg", "last night", "vs_baseline_avg", None),
    ("How do my steps yesterday compare to my usual average?",
     "steps", "sum", "yesterday", "vs_baseline_avg", None),
    ("How was my sleep last week compared to usual?",
     "total_sleep_minutes", "avg", "last week", "vs_baseline_avg", None),
)

# (question with a {date} slot, metric_id, aggregation)
_NULL: tuple[tuple[str, str, str], ...] = (
    ("How many steps did I take on {date}?", "steps", "sum"),
    ("How much sleep did I get on {date}?", "total_sleep_minutes", "raw"),
    ("What was my average heart rate on {date}?", "hr_avg", "avg"),
    ("How many calories did I burn on {date}?", "calories", "sum"),
    ("How much deep sleep did I get on {date}?", "deep_sleep_minutes", "raw"),
    ("What was my sleep efficiency on {date}?", "sleep_efficiency", "raw"),
    ("How much snoring was recorded on {date}?", "snoring_minutes", "raw"),
    ("What was my AHI on {date}?", "ahi", "raw"),
    ("How much REM sleep did I get on {date}?", "rem_minutes", "raw"),
    ("How much time awake was recorded on {date}?", "waso_minutes", "raw"),
    ("How much light sleep did I get on {date}?", "light_minutes", "raw"),
)

_EXPECTED_KIND = {"simple": "simple", "comparative": "comparative",
                  "null": "null_data"}


@dataclass(frozen=True)
class CorpusItem:
    item_id: str
    category: str  # "simple" | "comparative" | "null"
    question: str
    expected: DataRequest
    oracle: OracleAnswer

    @property
    def expected_kind(self) -> str:
        return _EXPECTED_KIND[self.category]

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "category": self.category,
            "question": self.question,
            "expected_request": self.expected.to_dict(),
            "oracle": {"primary": self.oracle.primary,
                       "comparison": self.oracle.comparison},
        }


def _check_routing(question: str, metric: str, lexicon: MetricLexicon) -> None:
    intent = classify(question, lexicon)
    if intent.kind != "data" or intent.matched_metric != metric:
        raise AssertionError(
            f"corpus question {question!r} routed to {intent.kind}"
            f"/{intent.matched_metric}, wanted data/{metric}")


def generate_corpus(seed: int = 2025,
                    counts: tuple[int, int, int] = (30, 30, 30),
                    *,
                    dataset: Dataset,
                    now,
                    timezone: Optional[str] = None,
                    lexicon: MetricLexicon = DEFAULT_LEXICON) -> list[CorpusItem]:
    """Deterministic corpus of data-seeking questions with known answers.

    ``now`` must be the same clock later given to the engine under test,
    or the resolved windows will not line up.
    """
    n_simple, n_comp, n_null = counts
    if n_simple > len(_SIMPLE):
        raise ValueError(f"at most {len(_SIMPLE)} simple items available")
    if n_comp > len(_COMPARATIVE):
        raise ValueError(f"at most {len(_COMPARATIVE)} comparative items available")
    tz = timezone or dataset.timezone
    user = dataset.user_id
    rng = random.Random(seed)
    items: list[CorpusItem] = []

    for i, (question, metric, agg, phrase) in enumerate(_SIMPLE[:n_simple]):
        _check_routing(question, metric, lexicon)
        expected = DataRequest(
            metric=metric, aggregation=agg,
            primary_window=parse_time_expression(phrase, now, tz),
            comparison_window=None, comparison_mode="none", user_id=user)
        items.append(CorpusItem(f"simple-{i:03d}", "simple", question,
                                expected, oracle_evaluate(expected, dataset)))

    for i, (question, metric, agg, phrase, mode, cmp_phrase) in (
            enumerate(_COMPARATIVE[:n_comp])):
        _check_routing(question, metric, lexicon)
        if mode == "vs_window":
            comparison = parse_time_expression(cmp_phrase, now, tz)
        else:
            comparison = baseline_window(now, tz)
        expected = DataRequest(
            metric=metric, aggregation=agg,
            primary_window=parse_time_expression(phrase, now, tz),
            comparison_window=comparison, comparison_mode=mode, user_id=user)
        items.append(CorpusItem(f"comparative-{i:03d}", "comparative",
                                question, expected,
                                oracle_evaluate(expected, dataset)))

    # Null questions ask about real calendar dates that precede the data.
    gap_days = (dataset.start_date - timedelta(days=1)
                - (dataset.start_date - timedelta(days=120))).days
    seen: set[str] = set()
    i = 0
    while len(items) < n_simple + n_comp + n_null:
        fmt, metric, agg = _NULL[i % len(_NULL)]
        day = (dataset.start_date - timedelta(days=120)
               + timedelta(days=rng.randrange(gap_days)))
        question = fmt.format(date=day.isoformat())
        if question in seen:
            continue
        seen.add(question)
        _check_routing(question, metric, lexicon)
        expected = DataRequest(
            metric=metric, aggregation=agg,
            primary_window=parse_time_expression(day.isoformat(), now, tz),
            comparison_window=None, comparison_mode="none", user_id=user)
        answer = oracle_evaluate(expected, dataset)
        if answer.primary is not None:
            raise AssertionError(f"null item {question!r} found data")
        items.append(CorpusItem(f"null-{i:03d}", "null", question,
                                expected, answer))
        i += 1

    return items

"""Corpus-driven validation of the whole question-answering path.

Four metrics per item, graded in order:

* M1 plan executability: the engine produced a data-path response whose
  evidence plans re-parse, re-validate with no errors and no future-range
  warnings, and re-evaluate cleanly;
* M2 intent match: the evidence plans are exactly the plans the item's
  expected request instantiates to (canonical text equality);
* M3 oracle equivalence: the evaluated scalars equal the brute-force
  oracle's, exactly for counts and sums, within 1e-9 relative error
  otherwise;
* M4 faithfulness: the rendered text passes the number-provenance audit.

M2 through M4 are only scored when M1 passes; a response that never
executed has no plans or numbers to grade. Each failed item lands in the
bucket of its first failed metric, which gives the report its failure
taxonomy: syntax, intent, retrieval, faithfulness.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from ..generator import instantiate_query
from ..pql import EvalContext, FUTURE_RANGE, evaluate, parse, validate
from ..responder import GroundedResponse, faithfulness_audit
from .corpus import CorpusItem

DATA_KINDS = ("simple", "comparative", "null_data")
RELATIVE_TOLERANCE = 1e-9
FAILURE_BUCKETS = ("syntax", "intent", "retrieval", "faithfulness")


@dataclass(frozen=True)
class ItemOutcome:
    """Per-question scorecard. None means the metric was not scored."""

    item_id: str
    category: str
    question: str
    m1: bool
    m2: Optional[bool]
    m3: Optional[bool]
    m4: Optional[bool]
    failure: Optional[str]
    detail: str
    response: Optional[GroundedResponse]

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "category": self.category,
            "question": self.question,
            "m1": self.m1, "m2": self.m2, "m3": self.m3, "m4": self.m4,
            "failure": self.failure,
            "detail": self.detail,
            "response_kind": self.response.kind if self.response else None,
            "response_text": self.response.text if self.response else None,
        }


@dataclass(frozen=True)
class ValidationReport:
    outcomes: tuple[ItemOutcome, ...]
    elapsed_seconds: float

    def _counts(self, metric: str) -> tuple[int, int]:
        """(passed, scored) for one metric; unscored items are excluded."""
        scored = [getattr(o, metric) for o in self.outcomes
                  if getattr(o, metric) is not None]
        return sum(1 for s in scored if s), len(scored)

    def _rate(self, metric: str) -> Fraction:
        passed, scored = self._counts(metric)
        if not scored:
            return Fraction(1)
        return Fraction(passed, scored)

    @property
    def m1_rate(self) -> Fraction:
        return self._rate("m1")

    @property
    def m2_rate(self) -> Fraction:
        return self._rate("m2")

    @property
    def m3_rate(self) -> Fraction:
        return self._rate("m3")

    @property
    def m4_rate(self) -> Fraction:
        return self._rate("m4")

    @property
    def passed(self) -> bool:
        return all(rate == 1 for rate in
                   (self.m1_rate, self.m2_rate, self.m3_rate, self.m4_rate))

    def taxonomy(self) -> dict[str, int]:
        counts = {bucket: 0 for bucket in FAILURE_BUCKETS}
        for outcome in self.outcomes:
            if outcome.failure is not None:
                counts[outcome.failure] += 1
        return counts

    def failures(self) -> list[ItemOutcome]:
        return [o for o in self.outcomes if o.failure is not None]

    def to_dict(self) -> dict:
        return {
            "items": len(self.outcomes),
            "rates": {name: list(self._counts(name))
                      for name in ("m1", "m2", "m3", "m4")},
            "passed": self.passed,
            "taxonomy": self.taxonomy(),
            "elapsed_seconds": self.elapsed_seconds,
            "outcomes": [o.to_dict() for o in self.outcomes],
        }

    def to_text(self) -> str:
        by_cat: dict[str, int] = {}
        for o in self.outcomes:
            by_cat[o.category] = by_cat.get(o.category, 0) + 1
        cats = " / ".join(f"{n} {c}" for c, n in sorted(by_cat.items()))
        lines = [f"corpus: {len(self.outcomes)} items ({cats})"]
        for name, label in (("m1", "M1 plan executability"),
                            ("m2", "M2 intent match"),
                            ("m3", "M3 oracle equivalence"),
                            ("m4", "M4 faithfulness")):
            passed, scored = self._counts(name)
            lines.append(f"{label:24s} {passed}/{scored}")
        bad = self.failures()
        if bad:
            counts = {k: v for k, v in self.taxonomy().items() if v}
            lines.append("failures: "
                         + ", ".join(f"{k}={v}" for k, v in counts.items()))
            for o in bad:
                lines.append(f"  {o.item_id} [{o.failure}] {o.detail}")
        else:
            lines.append("failures: none")
        lines.append(f"elapsed: {self.elapsed_seconds:.2f} s")
        return "\n".join(lines)


def _scalar_matches(aggregation: str, got, want) -> bool:
    if got is None or want is None:
        return got is None and want is None
    if aggregation in ("count", "sum"):
        return got == want
    if want == 0:
        return got == 0
    return abs(got - want) <= RELATIVE_TOLERANCE * abs(want)


def _check_executable(response: GroundedResponse, ctx: EvalContext,
                      store) -> Optional[str]:
    """None when every evidence plan round-trips and runs; else a reason."""
    if response.kind not in DATA_KINDS:
        return f"response kind {response.kind!r} is not a data answer"
    if not response.evidence:
        return "data response carries no evidence plans"
    for pos, ev in enumerate(response.evidence):
        parsed = parse(ev.plan_text)
        if not parsed.ok:
            return f"plan {pos} does not re-parse: {parsed.diagnostics[0]}"
        checked = validate(parsed.plan, ctx=ctx)
        if not checked.ok:
            return f"plan {pos} does not validate: {checked.errors[0]}"
        future = [d for d in checked.diagnostics if d.code == FUTURE_RANGE]
        if future:
            return f"plan {pos} touches the future: {future[0]}"
        try:
            evaluate(checked.validated, store, ctx)
        except Exception as exc:  # any runtime failure means not executable
            return f"plan {pos} failed to evaluate: {exc}"
    return None


def score_item(item: CorpusItem, engine, now, timezone: str) -> ItemOutcome:
    ctx = EvalContext(now=now, user_id=item.expected.user_id,
                      timezone=timezone)
    try:
        response = engine.handle(item.question, user_id=item.expected.user_id,
                                 now=now, timezone=timezone)
    except Exception as exc:
        return ItemOutcome(item.item_id, item.category, item.question,
                           m1=False, m2=None, m3=None, m4=None,
                           failure="syntax",
                           detail=f"engine raised {type(exc).__name__}: {exc}",
                           response=None)

    reason = _check_executable(response, ctx, engine.store)
    if reason is not None:
        return ItemOutcome(item.item_id, item.category, item.question,
                           m1=False, m2=None, m3=None, m4=None,
                           failure="syntax", detail=reason, response=response)

    details: list[str] = []

    expected = instantiate_query(item.expected, ctx, engine.store,
                                 engine.lexicon)
    want_texts = [text for text, _ in expected.plans]
    got_texts = [ev.plan_text for ev in response.evidence]
    m2 = got_texts == want_texts
    if not m2:
        details.append(f"plans differ: got {got_texts} want {want_texts}")

    want_scalars = [item.oracle.primary]
    aggs = [item.expected.aggregation]
    if item.expected.comparison_mode != "none":
        want_scalars.append(item.oracle.comparison)
        aggs.append("avg" if item.expected.comparison_mode == "vs_baseline_avg"
                    else item.expected.aggregation)
    got_scalars = [ev.result.scalar() for ev in response.evidence]
    if len(got_scalars) != len(want_scalars):
        m3 = False
        details.append(f"expected {len(want_scalars)} results, "
                       f"got {len(got_scalars)}")
    else:
        m3 = all(_scalar_matches(agg, got, want) for agg, got, want
                 in zip(aggs, got_scalars, want_scalars))
        if not m3:
            details.append(f"scalars differ: got {got_scalars} "
                           f"want {want_scalars}")

    verdict = faithfulness_audit(response)
    m4 = verdict.faithful
    if not m4:
        details.append("; ".join(verdict.violations))

    failure = None
    if not m2:
        failure = "intent"
    elif not m3:
        failure = "retrieval"
    elif not m4:
        failure = "faithfulness"
    return ItemOutcome(item.item_id, item.category, item.question,
                       m1=True, m2=m2, m3=m3, m4=m4, failure=failure,
                       detail="; ".join(details), response=response)


def run_validation(corpus: Sequence[CorpusItem], engine, *, now,
                   timezone: str) -> ValidationReport:
    """Score every corpus item against the engine.

    ``now`` and ``timezone`` must match the values the corpus was
    generated with.
    """
    started = time.perf_counter()
    outcomes = tuple(score_item(item, engine, now, timezone)
                     for item in corpus)
    return ValidationReport(outcomes=outcomes,
                            elapsed_seconds=time.perf_counter() - started)


_DIGIT_RUN = re.compile(r"\d+")


def single_number_mutations(response: GroundedResponse
                            ) -> Iterator[GroundedResponse]:
    """Variants of a response with exactly one digit run nudged by one.

    The faithfulness audit is expected to reject every one of them; the
    width of the run is preserved so dates stay date-shaped.
    """
    for match in _DIGIT_RUN.finditer(response.text):
        run = match.group(0)
        bumped = str(int(run) + 1).zfill(len(run))
        if len(bumped) > len(run):
            bumped = "1".zfill(len(run))  # wrap 9 -> 1, 99 -> 01
        mutated = (response.text[:match.start()] + bumped
                   + response.text[match.end():])
        yield replace(response, text=mutated)

"""Response rendering and the number-provenance faithfulness audit."""

from dataclasses import replace
from datetime import date, datetime, timezone as dt_timezone

import pytest

from sleepql.generator import build_data_request, instantiate_query
from sleepql.pql import EvalContext, evaluate
from sleepql.responder import (AuditVerdict, GroundedResponse, NumberClaim,
                               duration_words, faithfulness_audit,
                               format_metric_value, percent100, percent_diff,
                               render, render_chat, render_clarification,
                               render_unsupported, thousands, window_phrase)
from sleepql.router import classify
from sleepql.schema import DEFAULT_LEXICON

from util import build_store, day_docs, night_docs

NOW = datetime(2025, 7, 9, 12, 0, 0, tzinfo=dt_timezone.utc)
CTX = EvalContext(NOW, "u1", "Asia/Seoul")


def respond(message: str, store) -> GroundedResponse:
    intent = classify(message)
    assert intent.kind == "data", intent
    request = build_data_request(message, intent, NOW, "Asia/Seoul", "u1")
    iq = instantiate_query(request, CTX, store)
    results = [evaluate(vplan, store, CTX) for _, vplan in iq.plans]
    return render(request, results)


@pytest.fixture(scope="module")
def week_store():
    """Nights 2025-07-02..07-08 plus today's steps and a step baseline."""
    nights = [date(2025, 7, d) for d in range(2, 9)]
    totals = [400, 410, 420, 430, 440, 450, 375]
    steps_days = [date(2025, 7, d) for d in range(2, 9)]
    return build_store(
        sleep=night_docs(nights, totals, tz="Asia/Seoul"),
        activity=day_docs(steps_days + [date(2025, 7, 9)],
                          [6000] * 7 + [4500], tz="Asia/Seoul"))


class TestTransforms:
    @pytest.mark.parametrize("minutes, words", [
        (75, "1 hour and 15 minutes"),
        (60, "1 hour"),
        (120, "2 hours"),
        (121, "2 hours and 1 minute"),
        (1, "1 minute"),
        (0, "0 minutes"),
        (45, "45 minutes"),
        (59.6, "1 hour"),            # rounds to the nearest minute
    ])
    def test_duration_words(self, minutes, words):
        assert duration_words(minutes) == words

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            duration_words(-1)

    def test_thousands(self):
        assert thousands(4500) == "4,500"
        assert thousands(6000.0) == "6,000"
        assert thousands(999) == "999"

    def test_percent100(self):
        assert percent100(0.875) == "87.5%"

    def test_percent_diff_keeps_an_explicit_sign(self):
        assert percent_diff(4500, 6000) == "-25.0%"
        assert percent_diff(8400, 6000) == "+40.0%"
        assert percent_diff(6000, 6000) == "+0.0%"

    @pytest.mark.parametrize("metric_id, value, token", [
        ("deep_sleep_minutes", 75.0, "1 hour and 15 minutes"),
        ("total_sleep_minutes", 432.0, "7 hours and 12 minutes"),
        ("sleep_efficiency", 0.875, "87.5%"),
        ("steps", 4500, "4,500"),
        ("calories", 2100.4, "2,100"),
        ("ahi", 2.04, "2.0"),
        ("hr_avg", 71.96, "72.0"),
    ])
    def test_metric_value_formatting(self, metric_id, value, token):
        metric = DEFAULT_LEXICON.by_id(metric_id)
        assert format_metric_value(metric, value)[0] == token


class TestWindowPhrase:
    def test_named_windows_are_digit_free(self, week_store):
        r = respond("How much deep sleep did I get last night?", week_store)
        phrase, claims = window_phrase(r.request.primary_window, "primary")
        assert phrase == "last night"
        assert claims == []

    def test_iso_day_carries_a_date_claim(self):
        req = build_data_request(
            "How many steps did I take on 2025-07-01?",
            classify("How many steps did I take on 2025-07-01?"),
            NOW, "Asia/Seoul", "u1")
        phrase, claims = window_phrase(req.primary_window, "primary")
        assert phrase == "on 2025-07-01"
        assert [c.token for c in claims] == ["2025-07-01"]

    def test_date_range_claims_both_ends(self):
        req = build_data_request(
            "How many steps did I take in the last 30 days?",
            classify("How many steps did I take in the last 30 days?"),
            NOW, "Asia/Seoul", "u1")
        phrase, claims = window_phrase(req.primary_window, "primary")
        assert phrase == "between 2025-06-09 and 2025-07-08"
        assert [c.token for c in claims] == ["2025-06-09", "2025-07-08"]


class TestRenderKinds:
    def test_raw_night_reading(self, week_store):
        r = respond("How much deep sleep did I get last night?", week_store)
        assert r.kind == "simple"
        assert r.text == "You got 1 hour and 15 minutes of deep sleep last night."
        assert len(r.evidence) == 1
        assert r.evidence[0].plan_text.startswith("sleep_session | where")
        assert faithfulness_audit(r).faithful

    def test_single_day_sum_reads_as_plain_value(self, week_store):
        r = respond("How many steps did I take today?", week_store)
        assert r.text == "You took 4,500 steps today."
        assert faithfulness_audit(r).faithful

    def test_multiday_average_phrasing(self, week_store):
        r = respond("What was my average sleep last week?", week_store)
        assert r.kind == "simple"
        assert r.text.startswith("On average, your sleep was ")
        assert r.text.endswith(" per night last week.")
        assert faithfulness_audit(r).faithful

    def test_count_phrasing(self, week_store):
        r = respond("How many nights did I have deep sleep in the "
                    "last 30 days?", week_store)
        assert r.text == ("You have 7 nights with records between "
                          "2025-06-09 and 2025-07-08.")
        assert faithfulness_audit(r).faithful

    def test_count_comparison_counts_on_both_sides(self, week_store):
        r = respond("How many nights did I have deep sleep this week "
                    "compared to last week?", week_store)
        assert r.kind == "comparative"
        # this week holds Mon Jul 7 .. Wed Jul 9 -> 2 recorded nights (7th,
        # 8th); last week Jun 30 .. Jul 6 holds 5 (Jul 2..6)
        assert "2 nights" in r.text and "5 nights" in r.text
        assert faithfulness_audit(r).faithful

    def test_null_data_names_the_gap(self, week_store):
        r = respond("How many steps did I take on 2025-05-01?", week_store)
        assert r.kind == "null_data"
        assert "no records exist" in r.text
        assert faithfulness_audit(r).faithful

    def test_baseline_comparison(self, week_store):
        r = respond("How does my activity today compare to my usual "
                    "weekly average?", week_store)
        assert r.kind == "comparative"
        assert r.text == ("You took 4,500 steps today, compared with your "
                          "seven-day average of 6,000 steps: -25.0%.")
        assert [c.token for c in r.number_provenance] == [
            "4,500", "6,000", "-25.0%"]
        assert faithfulness_audit(r).faithful

    def test_window_comparison(self, week_store):
        r = respond("How did my sleep this week compare to last week?",
                    week_store)
        assert r.kind == "comparative"
        assert ", compared with " in r.text
        assert r.text.rstrip(".").endswith("%")
        assert len(r.evidence) == 2
        assert faithfulness_audit(r).faithful

    def test_missing_baseline_degrades_to_simple(self):
        store = build_store(
            activity=day_docs([date(2025, 7, 9)], [4500], tz="Asia/Seoul"))
        r = respond("How does my activity today compare to my usual "
                    "weekly average?", store)
        assert r.kind == "simple"
        assert r.text.endswith("No baseline available for comparison.")
        assert faithfulness_audit(r).faithful

    def test_result_count_mismatch_is_a_defect(self, week_store):
        intent = classify("How many steps did I take today?")
        request = build_data_request("How many steps did I take today?",
                                     intent, NOW, "Asia/Seoul", "u1")
        with pytest.raises(AssertionError):
            render(request, [])


class TestNonDataRenderers:
    def test_chat_default_reply(self):
        r = render_chat("hello")
        assert r.kind == "chat"
        assert r.evidence == () and r.number_provenance == ()
        assert faithfulness_audit(r).faithful

    def test_chat_custom_reply(self):
        assert render_chat("hi", reply="Sure thing.").text == "Sure thing."

    def test_unsupported_names_topic_and_capabilities(self):
        r = render_unsupported("coffee")
        assert r.kind == "unsupported"
        assert "coffee" in r.text
        assert "deep sleep" in r.text and "steps" in r.text
        assert faithfulness_audit(r).faithful

    def test_clarification_variants(self):
        ambiguous = render_clarification("AMBIGUOUS_PERIOD")
        unparseable = render_clarification("UNPARSEABLE_TIME")
        assert ambiguous.kind == unparseable.kind == "clarification"
        assert ambiguous.text != unparseable.text
        assert faithfulness_audit(ambiguous).faithful

    def test_non_data_kinds_carry_no_digits(self):
        for r in (render_chat("x"), render_unsupported("coffee"),
                  render_clarification("AMBIGUOUS_PERIOD"),
                  render_clarification("UNPARSEABLE_TIME")):
            assert not any(ch.isdigit() for ch in r.text), r.kind


class TestResponseInvariants:
    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            GroundedResponse("essay", "text")

    def test_null_data_must_use_the_phrase(self):
        with pytest.raises(ValueError):
            GroundedResponse("null_data", "nothing found")

    def test_with_trace_appends(self):
        r = render_chat("x").with_trace("a").with_trace("b", "c")
        assert r.trace == ("a", "b", "c")

    def test_to_dict_shape(self, week_store):
        d = respond("How many steps did I take today?", week_store).to_dict()
        assert set(d) == {"kind", "text", "evidence", "number_provenance",
                          "request", "trace"}
        assert d["evidence"][0]["plan"].startswith("activity_daily")
        assert d["number_provenance"][0]["token"] == "4,500"


class TestAuditViolations:
    def test_edited_number_is_caught(self, week_store):
        r = respond("How many steps did I take today?", week_store)
        tampered = replace(r, text=r.text.replace("4,500", "4,600"))
        verdict = faithfulness_audit(tampered)
        assert not verdict.faithful
        assert any("4,600" in v for v in verdict.violations)

    def test_unclaimed_digit_is_caught(self, week_store):
        r = respond("How many steps did I take today?", week_store)
        tampered = replace(r, text=r.text + " That beats your record of 9,999.")
        verdict = faithfulness_audit(tampered)
        assert not verdict.faithful
        assert any("9,999" in v for v in verdict.violations)

    def test_claim_that_does_not_rederive_is_caught(self, week_store):
        r = respond("How many steps did I take today?", week_store)
        bad_claim = replace(r.number_provenance[0], token="4,501")
        tampered = replace(r, text=r.text.replace("4,500", "4,501"),
                           number_provenance=(bad_claim,))
        verdict = faithfulness_audit(tampered)
        assert not verdict.faithful
        assert any("does not re-derive" in v for v in verdict.violations)

    def test_unknown_transform_is_caught(self, week_store):
        r = respond("How many steps did I take today?", week_store)
        bad = replace(r.number_provenance[0], transform="mystery")
        verdict = faithfulness_audit(replace(r, number_provenance=(bad,)))
        assert any("unknown transform" in v for v in verdict.violations)

    def test_unresolvable_source_is_caught(self, week_store):
        r = respond("How many steps did I take today?", week_store)
        bad = replace(r.number_provenance[0], sources=(("cell", 0, 9, 9),))
        verdict = faithfulness_audit(replace(r, number_provenance=(bad,)))
        assert any("unresolvable" in v for v in verdict.violations)

    def test_digits_in_chat_are_caught(self):
        chatty = GroundedResponse("chat", "You slept 420 minutes.")
        verdict = faithfulness_audit(chatty)
        assert not verdict.faithful

    def test_provenance_on_chat_is_caught(self):
        claim = NumberClaim("420", "decimal1", (("value", 420.0),))
        r = GroundedResponse("chat", "all good", number_provenance=(claim,))
        assert not faithfulness_audit(r).faithful

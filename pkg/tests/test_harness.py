"""Validation harness: seeded data, corpus, oracle independence, scoring."""

import ast as pyast
import inspect
import json
from dataclasses import replace
from datetime import date

import pytest

import sleepql.harness.oracle as oracle_module
from sleepql.engine import Engine
from sleepql.generator import (DataRequest, baseline_window,
                               parse_time_expression)
from sleepql.harness import (AnomalySpec, ValidationReport, demo_now,
                             generate_corpus, generate_dataset,
                             make_demo_dataset, oracle_evaluate,
                             run_validation, single_number_mutations)
from sleepql.responder import GroundedResponse, faithfulness_audit
from sleepql.store import Store

NOW = demo_now()
TZ = "Asia/Seoul"


def store_for(dataset) -> Store:
    store = Store()
    receipt = store.ingest_sleep(dataset.sleep_docs, dataset.user_id)
    assert receipt.rows_rejected == 0, receipt.rejection_reasons
    receipt = store.ingest_activity(dataset.activity_docs, dataset.user_id)
    assert receipt.rows_rejected == 0, receipt.rejection_reasons
    return store


@pytest.fixture(scope="module")
def dataset():
    return make_demo_dataset()


@pytest.fixture(scope="module")
def engine(dataset):
    return Engine(store_for(dataset))


@pytest.fixture(scope="module")
def corpus(dataset):
    return generate_corpus(dataset=dataset, now=NOW)


@pytest.fixture(scope="module")
def report(corpus, engine):
    return run_validation(corpus, engine, now=NOW, timezone=TZ)


def item_for(corpus, question):
    matches = [item for item in corpus if item.question == question]
    assert len(matches) == 1, question
    return matches[0]


class TestDatagen:
    def test_same_seed_same_documents(self):
        first = generate_dataset(11)
        second = generate_dataset(11)
        assert first == second
        assert generate_dataset(12) != first

    def test_overrides_do_not_disturb_the_draw_stream(self):
        plain = generate_dataset(7)
        spiked = generate_dataset(
            7, anomalies=AnomalySpec(steps_set={15: 8400.0}))
        assert spiked.sleep_docs == plain.sleep_docs
        for i, (a, b) in enumerate(zip(plain.activity_docs,
                                       spiked.activity_docs)):
            if i == 15:
                assert b["steps"] == 8400
                assert {k: v for k, v in a.items() if k != "steps"} == \
                    {k: v for k, v in b.items() if k != "steps"}
            else:
                assert a == b

    def test_dropped_days_omit_documents(self):
        spec = AnomalySpec(drop_sleep_days=frozenset({3}),
                           drop_activity_days=frozenset({5}))
        data = generate_dataset(7, anomalies=spec)
        assert len(data.sleep_docs) == 29
        assert len(data.activity_docs) == 29
        assert data.day(5).isoformat() not in \
            {d["date"] for d in data.activity_docs}

    def test_duplicate_devices_add_scaled_shadows(self):
        data = generate_dataset(7, anomalies=AnomalySpec(
            duplicate_devices=True))
        assert len(data.sleep_docs) == 60
        assert len(data.activity_docs) == 60
        original, shadow = data.activity_docs[0], data.activity_docs[1]
        assert original["device_id"] == "watch-001"
        assert shadow["device_id"] == "mattress-001"
        assert shadow["steps"] == int(round(original["steps"] * 0.9))
        night, night_shadow = data.sleep_docs[0], data.sleep_docs[1]
        assert night_shadow["device_id"] == "watch-001"
        assert night_shadow["deep_seconds"] == \
            pytest.approx(night["deep_seconds"] * 0.9, abs=0.005)

    def test_demo_dataset_story(self, dataset):
        assert dataset.user_id == "demo"
        assert dataset.timezone == "Asia/Seoul"
        assert dataset.start_date == date(2025, 6, 10)
        assert dataset.days == 30
        assert dataset.end_date == date(2025, 7, 9)
        steps = {d["date"]: d["steps"] for d in dataset.activity_docs}
        assert steps["2025-06-25"] == 8400
        for offset in range(8, 15):
            assert steps[dataset.day(offset).isoformat()] == 6000
        assert steps["2025-07-09"] == 4500
        final_night = dataset.sleep_docs[29]
        assert final_night["deep_seconds"] == 4500.0
        stage_sum = sum(final_night[k] for k in
                        ("light_seconds", "deep_seconds", "rem_seconds"))
        assert stage_sum == pytest.approx(420.0 * 60.0)

    def test_every_demo_night_counts_as_main_sleep(self, dataset):
        for doc in dataset.sleep_docs:
            stage_sum = sum(doc[k] for k in
                            ("light_seconds", "deep_seconds", "rem_seconds"))
            assert stage_sum >= 180.0 * 60.0

    def test_day_indexing(self, dataset):
        assert dataset.day(0) == date(2025, 6, 10)
        assert dataset.day(29) == date(2025, 7, 9)
        with pytest.raises(IndexError):
            dataset.day(30)
        with pytest.raises(IndexError):
            dataset.day(-1)

    def test_write_jsonl_round_trip(self, dataset, tmp_path):
        sleep_path, activity_path = dataset.write_jsonl(tmp_path)
        with open(sleep_path, encoding="utf-8") as fh:
            sleep_docs = [json.loads(line) for line in fh]
        with open(activity_path, encoding="utf-8") as fh:
            activity_docs = [json.loads(line) for line in fh]
        assert tuple(sleep_docs) == dataset.sleep_docs
        assert tuple(activity_docs) == dataset.activity_docs


class TestCorpus:
    def test_ninety_items_three_even_categories(self, corpus):
        assert len(corpus) == 90
        by_cat = {}
        for item in corpus:
            by_cat[item.category] = by_cat.get(item.category, 0) + 1
        assert by_cat == {"simple": 30, "comparative": 30, "null": 30}
        assert len({item.item_id for item in corpus}) == 90
        assert len({item.question for item in corpus}) == 90

    def test_generation_is_deterministic(self, corpus, dataset):
        again = generate_corpus(dataset=dataset, now=NOW)
        assert again == corpus

    def test_known_questions_appear_verbatim(self, corpus):
        questions = {item.question for item in corpus}
        assert "How much deep sleep did I get last night?" in questions
        assert "How many steps have I taken today?" in questions
        assert "How did my sleep this week compare to last week?" in questions

    def test_expected_request_matches_the_question(self, corpus):
        item = item_for(corpus, "How much deep sleep did I get last night?")
        assert item.expected == DataRequest(
            metric="deep_sleep_minutes", aggregation="raw",
            primary_window=parse_time_expression("last night", NOW, TZ),
            comparison_window=None, comparison_mode="none", user_id="demo")
        baseline_item = item_for(
            corpus, "How was my sleep last night compared to usual?")
        assert baseline_item.expected.comparison_mode == "vs_baseline_avg"
        assert baseline_item.expected.comparison_window == \
            baseline_window(NOW, TZ)

    def test_null_items_predate_the_data(self, corpus, dataset):
        nulls = [item for item in corpus if item.category == "null"]
        for item in nulls:
            hi = item.expected.primary_window.local_dates()[-1]
            assert str(hi) < dataset.start_date.isoformat()
            assert item.oracle.primary is None
            assert item.oracle.comparison is None
            assert item.expected_kind == "null_data"

    def test_oversized_counts_are_rejected(self, dataset):
        with pytest.raises(ValueError):
            generate_corpus(counts=(31, 30, 29), dataset=dataset, now=NOW)
        with pytest.raises(ValueError):
            generate_corpus(counts=(29, 32, 29), dataset=dataset, now=NOW)

    def test_item_to_dict_shape(self, corpus):
        doc = corpus[0].to_dict()
        assert set(doc) == {"item_id", "category", "question",
                            "expected_request", "oracle"}
        assert set(doc["oracle"]) == {"primary", "comparison"}


class TestOracleIndependence:
    def test_oracle_imports_no_engine_code(self):
        """The reference answers must come from a disjoint code path."""
        tree = pyast.parse(inspect.getsource(oracle_module))
        banned = ("store", "pql", "evaluate", "responder", "router",
                  "engine", "schema", "monitor")
        package_imports = set()
        for node in pyast.walk(tree):
            if isinstance(node, pyast.ImportFrom):
                module = node.module or ""
                names = [module] + [alias.name for alias in node.names]
                if node.level or module.startswith("sleepql"):
                    package_imports.add(module.rsplit(".", 1)[-1])
            elif isinstance(node, pyast.Import):
                names = [alias.name for alias in node.names]
            else:
                continue
            for name in names:
                for fragment in banned:
                    assert fragment not in name, \
                        f"oracle imports engine code: {name}"
        # only the request IR and the raw dataset container are shared
        assert package_imports == {"generator", "datagen"}

    def test_unknown_metric_is_rejected(self, dataset):
        bogus = DataRequest(
            metric="steps", aggregation="sum",
            primary_window=parse_time_expression("yesterday", NOW, TZ),
            comparison_window=None, comparison_mode="none", user_id="demo")
        with pytest.raises(ValueError):
            oracle_evaluate(replace(bogus, metric="caffeine"), dataset)

    def test_raw_answer_is_the_newest_main_session(self, dataset):
        request = DataRequest(
            metric="deep_sleep_minutes", aggregation="raw",
            primary_window=parse_time_expression("last night", NOW, TZ),
            comparison_window=None, comparison_mode="none", user_id="demo")
        assert oracle_evaluate(request, dataset).primary == \
            pytest.approx(75.0)

    def test_count_ignores_value_nulls_but_counts_rows(self, dataset):
        request = DataRequest(
            metric="total_sleep_minutes", aggregation="count",
            primary_window=parse_time_expression("last 30 days", NOW, TZ),
            comparison_window=None, comparison_mode="none", user_id="demo")
        assert oracle_evaluate(request, dataset).primary == 29


class TestDuplicateDeviceRegression:
    METRIC_QUESTIONS = (
        ("steps", "sum", "last week",
         "How many steps did I take last week?"),
        ("total_sleep_minutes", "avg", "last 7 days",
         "What was my average sleep over the last 7 days?"),
        ("deep_sleep_minutes", "raw", "last night",
         "How much deep sleep did I get last night?"),
    )

    def request_for(self, metric, agg, phrase):
        return DataRequest(
            metric=metric, aggregation=agg,
            primary_window=parse_time_expression(phrase, NOW, TZ),
            comparison_window=None, comparison_mode="none", user_id="demo")

    def test_oracle_answers_ignore_shadow_devices(self):
        single = generate_dataset(21)
        doubled = generate_dataset(
            21, anomalies=AnomalySpec(duplicate_devices=True))
        for metric, agg, phrase, _ in self.METRIC_QUESTIONS:
            request = self.request_for(metric, agg, phrase)
            assert oracle_evaluate(request, doubled) == \
                oracle_evaluate(request, single)

    def test_engine_answers_on_doubled_store_match_single_oracle(self):
        single = generate_dataset(21)
        doubled = generate_dataset(
            21, anomalies=AnomalySpec(duplicate_devices=True))
        engine = Engine(store_for(doubled))
        for metric, agg, phrase, question in self.METRIC_QUESTIONS:
            response = engine.handle(question, user_id="demo", now=NOW,
                                     timezone=TZ)
            want = oracle_evaluate(self.request_for(metric, agg, phrase),
                                   single).primary
            got = response.evidence[0].result.scalar()
            assert got == want  # exact, not approximate


class TestValidationRun:
    def test_the_whole_corpus_passes(self, report):
        assert len(report.outcomes) == 90
        assert report.m1_rate == 1
        assert report.m2_rate == 1
        assert report.m3_rate == 1
        assert report.m4_rate == 1
        assert report.passed

    def test_runs_inside_the_time_budget(self, report):
        assert report.elapsed_seconds < 10.0

    def test_no_failures_anywhere(self, report):
        assert report.failures() == []
        assert report.taxonomy() == {"syntax": 0, "intent": 0,
                                     "retrieval": 0, "faithfulness": 0}

    def test_report_text_summary(self, report):
        text = report.to_text()
        assert "90 items" in text
        assert "M1 plan executability" in text and "90/90" in text
        assert "failures: none" in text

    def test_report_dict_shape(self, report):
        doc = report.to_dict()
        assert doc["items"] == 90
        assert doc["rates"] == {"m1": [90, 90], "m2": [90, 90],
                                "m3": [90, 90], "m4": [90, 90]}
        assert doc["passed"] is True
        assert len(doc["outcomes"]) == 90

    def test_empty_report_is_vacuously_green(self):
        empty = ValidationReport(outcomes=(), elapsed_seconds=0.0)
        assert empty.passed
        assert empty.m3_rate == 1

    def test_outcome_dict_shape(self, report):
        doc = report.outcomes[0].to_dict()
        assert set(doc) == {"item_id", "category", "question", "m1", "m2",
                            "m3", "m4", "failure", "detail",
                            "response_kind", "response_text"}


class _Tampered:
    """Delegate to a real engine, then corrupt the response somehow."""

    def __init__(self, engine):
        self.engine = engine
        self.store = engine.store
        self.lexicon = engine.lexicon


class _BreaksPlanText(_Tampered):
    def handle(self, message, **kwargs):
        response = self.engine.handle(message, **kwargs)
        broken = replace(response.evidence[0],
                         plan_text="sleep_session | frobnicate")
        return replace(response, evidence=(broken,) + response.evidence[1:])


class _LeaksFutureWindow(_Tampered):
    def handle(self, message, **kwargs):
        response = self.engine.handle(message, **kwargs)
        future = replace(
            response.evidence[0],
            plan_text='activity_daily | where local_date >= "2026-01-01"'
                      ' | count')
        return replace(response, evidence=(future,) + response.evidence[1:])


class _AnswersTheWrongQuestion(_Tampered):
    def handle(self, message, **kwargs):
        return self.engine.handle("How many steps did I take yesterday?",
                                  **kwargs)


class _NudgesTheResult(_Tampered):
    def handle(self, message, **kwargs):
        response = self.engine.handle(message, **kwargs)
        rows = response.evidence[0].result.rows
        rows[0] = (rows[0][0] + 1,) + rows[0][1:]
        return response


class _EditsTheProse(_Tampered):
    def handle(self, message, **kwargs):
        response = self.engine.handle(message, **kwargs)
        return next(single_number_mutations(response))


class TestFailureTaxonomy:
    """Injected faults must land in the bucket of the first failed metric,
    and later metrics must stay unscored once an earlier one fails."""

    QUESTION = "How many steps did I take last week?"

    def run_one(self, corpus, engine, fault):
        item = item_for(corpus, self.QUESTION)
        report = run_validation([item], fault(engine), now=NOW, timezone=TZ)
        return report.outcomes[0]

    def test_unparseable_plan_is_a_syntax_failure(self, corpus, engine):
        outcome = self.run_one(corpus, engine, _BreaksPlanText)
        assert (outcome.m1, outcome.m2, outcome.m3, outcome.m4) == \
            (False, None, None, None)
        assert outcome.failure == "syntax"
        assert "re-parse" in outcome.detail

    def test_future_touching_plan_is_a_syntax_failure(self, corpus, engine):
        outcome = self.run_one(corpus, engine, _LeaksFutureWindow)
        assert outcome.m1 is False
        assert outcome.failure == "syntax"
        assert "future" in outcome.detail

    def test_wrong_plans_are_an_intent_failure(self, corpus, engine):
        outcome = self.run_one(corpus, engine, _AnswersTheWrongQuestion)
        assert outcome.m1 is True
        assert outcome.m2 is False
        assert outcome.failure == "intent"
        assert "plans differ" in outcome.detail

    def test_wrong_scalar_is_a_retrieval_failure(self, corpus, engine):
        outcome = self.run_one(corpus, engine, _NudgesTheResult)
        assert (outcome.m1, outcome.m2, outcome.m3) == (True, True, False)
        assert outcome.failure == "retrieval"
        assert "scalars differ" in outcome.detail

    def test_edited_prose_is_a_faithfulness_failure(self, corpus, engine):
        outcome = self.run_one(corpus, engine, _EditsTheProse)
        assert (outcome.m1, outcome.m2, outcome.m3, outcome.m4) == \
            (True, True, True, False)
        assert outcome.failure == "faithfulness"

    def test_crashing_backend_is_a_syntax_failure(self, corpus, engine):
        class _Explodes(_Tampered):
            def handle(self, message, **kwargs):
                raise RuntimeError("boom")

        outcome = self.run_one(corpus, engine, _Explodes)
        assert outcome.m1 is False
        assert outcome.failure == "syntax"
        assert "boom" in outcome.detail


class TestSingleNumberMutations:
    def test_every_mutant_of_every_response_is_caught(self, report):
        """Nudging any one number in any corpus answer must fail the audit."""
        mutants = 0
        for outcome in report.outcomes:
            for mutated in single_number_mutations(outcome.response):
                mutants += 1
                verdict = faithfulness_audit(mutated)
                assert not verdict.faithful, \
                    f"{outcome.item_id}: undetected edit {mutated.text!r}"
        assert mutants >= 90  # every data answer has at least one number

    def test_mutation_preserves_digit_run_width(self):
        probe = GroundedResponse("chat", "runs 9 and 99 and 120 end")
        texts = [m.text for m in single_number_mutations(probe)]
        assert texts == ["runs 1 and 99 and 120 end",
                         "runs 9 and 01 and 120 end",
                         "runs 9 and 99 and 121 end"]

    def test_digit_free_text_has_no_mutants(self, engine):
        response = engine.handle("Any tips for falling asleep faster?",
                                 user_id="demo", now=NOW, timezone=TZ)
        assert response.kind == "chat"
        assert list(single_number_mutations(response)) == []

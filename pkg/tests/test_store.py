"""Ingestion, derived rows, scanning, and snapshot persistence."""

import json
from datetime import date, datetime, timezone as dt_timezone

import pytest
from hypothesis import given, settings, strategies as st

from sleepql.store import (SnapshotError, Store, read_jsonl, write_jsonl)

from util import activity_doc, build_store, epoch, sleep_doc


class TestSleepRowDerivation:
    def test_duration_columns_in_minutes(self):
        store = build_store(sleep=[sleep_doc()])
        (row,) = store.scan("sleep_session", "u1")
        assert row["light"] == 240.0
        assert row["deep"] == 75.0
        assert row["rem"] == 105.0
        assert row["waso"] == 50.0
        assert row["duration_total"] == 420.0  # WASO not counted as sleep

    def test_efficiency_is_sleep_over_time_in_bed(self):
        store = build_store(sleep=[sleep_doc()])
        (row,) = store.scan("sleep_session", "u1")
        assert row["sleep_efficiency"] == 420.0 / 480.0  # = 0.875

    def test_ahi_is_events_per_hour_of_sleep(self):
        store = build_store(sleep=[sleep_doc(apnea_events=14)])
        (row,) = store.scan("sleep_session", "u1")
        assert row["ahi"] == 14 / 7.0  # 420 min = 7 h

    def test_main_sleep_threshold_at_180_minutes(self):
        long_doc = sleep_doc()
        short_doc = sleep_doc(device_id="mattress-002",
                              light_seconds=100 * 60.0, deep_seconds=30 * 60.0,
                              rem_seconds=40 * 60.0, waso_seconds=0.0)
        boundary = sleep_doc(device_id="mattress-003",
                             light_seconds=110 * 60.0, deep_seconds=30 * 60.0,
                             rem_seconds=40 * 60.0, waso_seconds=0.0)
        store = build_store(sleep=[long_doc, short_doc, boundary])
        by_device = {r["device_id"]: r for r in store.scan("sleep_session", "u1")}
        assert by_device["mattress-001"]["is_main_sleep"] is True   # 420
        assert by_device["mattress-002"]["is_main_sleep"] is False  # 170
        assert by_device["mattress-003"]["is_main_sleep"] is True   # exactly 180

    def test_session_id_and_device_class(self):
        store = build_store(sleep=[sleep_doc()])
        (row,) = store.scan("sleep_session", "u1")
        assert row["device_class"] == "mattress"
        assert row["session_id"] == f"mattress-001:{int(sleep_doc()['start_epoch'])}"

    def test_wake_date_attribution_uses_document_zone(self):
        # Ends 23:30 UTC = 08:30 next day in Seoul; the wake date is local.
        doc = sleep_doc(timezone="Asia/Seoul",
                        start_epoch=epoch(2025, 3, 9, 15, 30),
                        end_epoch=epoch(2025, 3, 9, 23, 30))
        store = build_store(sleep=[doc])
        (row,) = store.scan("sleep_session", "u1")
        assert row["local_date"] == "2025-03-10"

    def test_dst_spring_forward_keeps_elapsed_time(self):
        # New York, 2025-03-09: clocks jump 02:00 -> 03:00. A session from
        # 00:30 EST to 06:30 EDT spans 5 elapsed hours, not the 6 the wall
        # clock suggests.
        doc = sleep_doc(timezone="America/New_York",
                        start_epoch=epoch(2025, 3, 9, 0, 30,
                                          tz="America/New_York"),
                        end_epoch=epoch(2025, 3, 9, 6, 30,
                                        tz="America/New_York"),
                        light_seconds=180 * 60.0, deep_seconds=60 * 60.0,
                        rem_seconds=50 * 60.0, waso_seconds=10 * 60.0)
        store = build_store(sleep=[doc])
        (row,) = store.scan("sleep_session", "u1")
        assert (row["end_utc"] - row["start_utc"]).total_seconds() == 5 * 3600
        assert row["local_date"] == "2025-03-09"


class TestActivityRowDerivation:
    def test_columns(self):
        store = build_store(activity=[activity_doc()])
        (row,) = store.scan("activity_daily", "u1")
        assert row["steps"] == 6400 and isinstance(row["steps"], int)
        assert row["calories"] == 2100.0
        assert row["device_class"] == "watch"
        assert row["local_date"] == "2025-03-10"

    def test_optional_fields_null(self):
        store = build_store(activity=[activity_doc(calories=None, hr_avg=None,
                                                   hr_min=None, hr_max=None)])
        (row,) = store.scan("activity_daily", "u1")
        assert row["calories"] is None
        assert row["hr_avg"] is None


class TestIngestValidation:
    @pytest.mark.parametrize("bad", [
        {"start_epoch": epoch(2025, 3, 10, 7), "end_epoch": epoch(2025, 3, 10, 6)},
        {"light_seconds": -1.0},
        {"waso_seconds": -0.5},
        {"apnea_events": -1},
        {"timezone": "Mars/Olympus"},
        # stage sum 481 min > 480 min in bed + 1 min tolerance
        {"light_seconds": 300 * 60.0, "deep_seconds": 100 * 60.0,
         "rem_seconds": 41.01 * 60.0, "waso_seconds": 40 * 60.0},
    ])
    def test_sleep_rejections(self, bad):
        store = Store()
        receipt = store.ingest_sleep([sleep_doc(**bad)], "u1")
        assert receipt.rows_written == 0
        assert receipt.rows_rejected == 1
        assert receipt.rejection_reasons

    def test_stage_sum_within_tolerance_accepted(self):
        # 480.5 min of stages in 480 min of bed: inside the 1-minute slack
        doc = sleep_doc(light_seconds=300 * 60.0, deep_seconds=100 * 60.0,
                        rem_seconds=40.5 * 60.0, waso_seconds=40 * 60.0)
        receipt = Store().ingest_sleep([doc], "u1")
        assert receipt.rows_rejected == 0

    @pytest.mark.parametrize("bad", [
        {"date": "2025/03/10"},
        {"steps": -5},
        {"calories": -1.0},
        {"hr_min": 90.0, "hr_avg": 72.0, "hr_max": 121.0},
        {"timezone": "Nowhere/Here"},
    ])
    def test_activity_rejections(self, bad):
        store = Store()
        receipt = store.ingest_activity([activity_doc(**bad)], "u1")
        assert receipt.rows_rejected == 1

    def test_bad_rows_do_not_block_good_rows(self):
        docs = [activity_doc(), activity_doc(date="bogus"),
                activity_doc(date="2025-03-11")]
        store = Store()
        receipt = store.ingest_activity(docs, "u1")
        assert receipt.rows_written == 2
        assert receipt.rows_rejected == 1
        assert receipt.rejection_reasons[0][0] == 1  # batch index of the bad doc


class TestUpsert:
    def test_activity_key_is_user_date_device(self):
        store = build_store(activity=[activity_doc(steps=1000)])
        store.ingest_activity([activity_doc(steps=2222)], "u1")
        (row,) = store.scan("activity_daily", "u1")
        assert row["steps"] == 2222
        store.ingest_activity([activity_doc(steps=3333)], "u2")
        assert len(store.scan("activity_daily", "u1")) == 1
        assert len(store.scan("activity_daily", "u2")) == 1

    def test_sleep_key_is_user_session(self):
        store = build_store(sleep=[sleep_doc()])
        store.ingest_sleep([sleep_doc(deep_seconds=5000.0)], "u1")
        (row,) = store.scan("sleep_session", "u1")
        assert len(store.scan("sleep_session", "u1")) == 1
        assert row["deep"] == 5000.0 / 60.0

    @given(st.lists(
        st.tuples(st.integers(1, 28), st.integers(0, 40000)), max_size=12))
    @settings(max_examples=60, deadline=None)
    def test_reingest_is_idempotent(self, day_steps):
        docs = [activity_doc(date=f"2025-03-{d:02d}", steps=s)
                for d, s in day_steps]
        store = Store()
        store.ingest_activity(docs, "u1")
        first = store.scan("activity_daily", "u1")
        store.ingest_activity(docs, "u1")
        assert store.scan("activity_daily", "u1") == first


class TestScan:
    def test_time_range_is_half_open(self):
        docs = [activity_doc(date=f"2025-03-{d:02d}") for d in (10, 11, 12)]
        store = build_store(activity=docs)
        rows = store.scan("activity_daily", "u1",
                          ("2025-03-10", "2025-03-12"))
        assert [r["local_date"] for r in rows] == ["2025-03-10", "2025-03-11"]

    def test_rows_ordered_by_date_then_device(self):
        docs = [activity_doc(date="2025-03-11", device_id="watch-001"),
                activity_doc(date="2025-03-10", device_id="watch-002"),
                activity_doc(date="2025-03-10", device_id="mattress-001")]
        store = build_store(activity=docs)
        rows = store.scan("activity_daily", "u1")
        assert [(r["local_date"], r["device_id"]) for r in rows] == [
            ("2025-03-10", "mattress-001"), ("2025-03-10", "watch-002"),
            ("2025-03-11", "watch-001")]

    def test_unknown_table_is_an_error(self):
        with pytest.raises(Exception):
            Store().scan("who_knows", "u1")


class TestSnapshot:
    def test_round_trip_preserves_all_rows(self, tmp_path):
        store = build_store(sleep=[sleep_doc()], activity=[activity_doc()])
        path = tmp_path / "s.snapshot"
        store.persist(path)
        loaded = Store.load(path)
        for table in ("sleep_session", "activity_daily"):
            assert loaded.all_rows(table) == store.all_rows(table)

    def test_round_trip_preserves_datetime_cells(self, tmp_path):
        store = build_store(sleep=[sleep_doc()])
        path = tmp_path / "s.snapshot"
        store.persist(path)
        (row,) = Store.load(path).scan("sleep_session", "u1")
        assert isinstance(row["start_utc"], datetime)
        assert row["start_utc"].tzinfo is not None
        assert row["start_utc"].timestamp() == sleep_doc()["start_epoch"]

    def test_tampered_payload_is_rejected(self, tmp_path):
        store = build_store(activity=[activity_doc()])
        path = tmp_path / "s.snapshot"
        store.persist(path)
        doc = json.loads(path.read_text())
        doc["payload"]["tables"]["activity_daily"][0]["steps"] = 99999
        path.write_text(json.dumps(doc))
        with pytest.raises(SnapshotError):
            Store.load(path)

    def test_wrong_version_is_rejected(self, tmp_path):
        store = build_store(activity=[activity_doc()])
        path = tmp_path / "s.snapshot"
        store.persist(path)
        doc = json.loads(path.read_text())
        doc["version"] = 999
        path.write_text(json.dumps(doc))
        with pytest.raises(SnapshotError):
            Store.load(path)

    def test_unreadable_file_is_rejected(self, tmp_path):
        path = tmp_path / "garbage"
        path.write_text("{not json")
        with pytest.raises(SnapshotError):
            Store.load(path)


class TestJsonl:
    def test_round_trip(self, tmp_path):
        docs = [activity_doc(date="2025-03-10"), activity_doc(date="2025-03-11")]
        path = tmp_path / "a.jsonl"
        write_jsonl(path, docs)
        assert read_jsonl(path) == docs


def test_user_ids_lists_every_user():
    store = build_store(activity=[activity_doc()], user="alpha")
    store.ingest_sleep([sleep_doc()], "beta")
    assert store.user_ids() == ["alpha", "beta"]

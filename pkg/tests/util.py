"""Small builders shared across test modules."""

from datetime import datetime, timedelta
from zoneinfo import ZoneInfo

from sleepql.store import Store

UTC = ZoneInfo("UTC")


def epoch(year, month, day, hour=0, minute=0, second=0, tz="UTC") -> float:
    return datetime(year, month, day, hour, minute, second,
                    tzinfo=ZoneInfo(tz)).timestamp()


def sleep_doc(**over) -> dict:
    doc = {
        "device_id": "mattress-001",
        "start_epoch": epoch(2025, 3, 9, 22, 30),
        "end_epoch": epoch(2025, 3, 10, 6, 30),
        "timezone": "UTC",
        "light_seconds": 14400.0,   # 240 min
        "deep_seconds": 4500.0,     # 75 min
        "rem_seconds": 6300.0,      # 105 min
        "waso_seconds": 3000.0,     # 50 min
        "apnea_events": 14,
        "snoring_seconds": 600.0,
        "hr_avg": 58.0,
    }
    doc.update(over)
    return doc


def activity_doc(**over) -> dict:
    doc = {
        "device_id": "watch-001",
        "date": "2025-03-10",
        "timezone": "UTC",
        "steps": 6400,
        "calories": 2100.0,
        "hr_avg": 72.0,
        "hr_min": 55.0,
        "hr_max": 121.0,
    }
    doc.update(over)
    return doc


def night_docs(dates, total_minutes, tz="UTC", device="mattress-001",
               deep_fraction=0.2):
    """One main sleep session waking on each date with the given total."""
    docs = []
    for d, total in zip(dates, total_minutes):
        wake = datetime(d.year, d.month, d.day, 7, 0, tzinfo=ZoneInfo(tz))
        start = wake - timedelta(minutes=total + 20.0)
        deep = total * deep_fraction
        docs.append({
            "device_id": device,
            "start_epoch": start.timestamp(),
            "end_epoch": wake.timestamp(),
            "timezone": tz,
            "light_seconds": (total - deep) * 60.0,
            "deep_seconds": deep * 60.0,
            "rem_seconds": 0.0,
            "waso_seconds": 20.0 * 60.0,
            "apnea_events": 0,
            "snoring_seconds": 0.0,
        })
    return docs


def day_docs(dates, steps, tz="UTC", device="watch-001"):
    return [{
        "device_id": device,
        "date": d.isoformat(),
        "timezone": tz,
        "steps": int(s),
        "calories": 2000.0,
    } for d, s in zip(dates, steps)]


def build_store(sleep=(), activity=(), user="u1") -> Store:
    store = Store()
    if sleep:
        receipt = store.ingest_sleep(list(sleep), user)
        assert receipt.rows_rejected == 0, receipt.rejection_reasons
    if activity:
        receipt = store.ingest_activity(list(activity), user)
        assert receipt.rows_rejected == 0, receipt.rejection_reasons
    return store


def valid_sleep_queries():
    """Hypothesis strategy for query texts that validate against the sleep
    table by construction (used by soundness and purity properties)."""
    from hypothesis import strategies as st

    num_cols = ("duration_total", "light", "deep", "rem", "waso",
                "sleep_efficiency", "ahi", "snoring")
    text_cols = ("local_date", "device_class", "session_id")

    @st.composite
    def predicates(draw):
        kind = draw(st.integers(0, 3))
        if kind == 0:
            col = draw(st.sampled_from(num_cols))
            op = draw(st.sampled_from(["==", "!=", "<", "<=", ">", ">="]))
            value = draw(st.floats(-1e3, 1e3, allow_nan=False))
            return f"{col} {op} {value!r}"
        if kind == 1:
            col = draw(st.sampled_from(text_cols))
            return f'{col} >= "2025-0{draw(st.integers(1, 9))}-01"'
        if kind == 2:
            return "is_main_sleep == " + draw(st.sampled_from(["true", "false"]))
        a, b = draw(st.sampled_from(num_cols)), draw(st.sampled_from(num_cols))
        op = draw(st.sampled_from(["+", "-", "*", "/"]))
        return f"{a} {op} {b} > {draw(st.integers(-100, 100))}"

    @st.composite
    def plans(draw):
        stages = []
        aggregated = False
        for _ in range(draw(st.integers(0, 4))):
            kind = draw(st.integers(0, 5))
            if kind == 0 and not aggregated:
                preds = draw(st.lists(predicates(), min_size=1, max_size=2))
                stages.append("where " + " and ".join(preds))
            elif kind == 1 and not aggregated:
                col = draw(st.sampled_from(num_cols))
                stages.append(f"extend extra = {col} * 2 + 1")
            elif kind == 2 and not aggregated:
                fn = draw(st.sampled_from(["sum", "avg", "min", "max"]))
                col = draw(st.sampled_from(num_cols))
                by = draw(st.sampled_from(
                    ["", " by device_class", " by local_date"]))
                stages.append(f"summarize {fn}({col}), count(){by}")
                aggregated = True
            elif kind == 3 and not aggregated:
                col = draw(st.sampled_from(num_cols + text_cols))
                stages.append(
                    f"sort by {col} {draw(st.sampled_from(['asc', 'desc']))}")
            elif kind == 4:
                stages.append(f"take {draw(st.integers(0, 5))}")
            elif kind == 5 and not aggregated:
                stages.append("count")
                aggregated = True
        return " | ".join(["sleep_session"] + stages)

    return plans()

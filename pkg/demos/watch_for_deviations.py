"""Walk a step-count spike through the proactive monitor, day by day.

A hand-built fixture keeps the arithmetic visible: a flat week of
6,000 steps, then two 8,400-step days, then back to normal. Replaying
the monitor across those days shows each rule in isolation:

* **quiet day** — within the threshold, nothing fires;
* **spike day** — 8,400 vs the 6,000 baseline is +40.0 %, strictly
  above the 30 % threshold, so a notification fires, with the baseline
  and observation queries attached as evidence;
* **repeat day** — still spiking, but yesterday's alert is on record
  and the deviation hasn't *grown* (the baseline now contains the first
  spike, so the ratio actually shrank to +32.4 %): suppressed;
* **recovery day** — back to 6,000, within threshold, quiet again.

The seeded demo dataset plants this same +40 % spike on 2025-06-25;
`sleepql monitor run --date 2025-06-25 --snapshot data/demo.snapshot`
shows it firing there.

Run from the repository root:

    python demos/watch_for_deviations.py
"""

from datetime import date, timedelta

from sleepql.monitor import Monitor, MonitorConfig, NotificationLog
from sleepql.store import Store

USER = "walkthrough"
BASELINE_START = date(2025, 6, 18)   # seven flat days: 06-18 .. 06-24


def build_store() -> Store:
    docs = []

    def day(d: date, steps: int) -> None:
        docs.append({"device_id": "watch-1", "date": d.isoformat(),
                     "timezone": "UTC", "steps": steps})

    for i in range(7):
        day(BASELINE_START + timedelta(days=i), 6000)
    day(date(2025, 6, 25), 8400)   # +40.0 % over the 6,000 baseline
    day(date(2025, 6, 26), 8400)   # same spike again
    day(date(2025, 6, 27), 6000)   # recovery

    store = Store()
    receipt = store.ingest_activity(docs, USER)
    assert receipt.rows_rejected == 0
    return store


def main() -> None:
    store = build_store()
    log = NotificationLog()
    # Defaults: fire strictly above a 30 % deviation from the trailing
    # seven-day mean, require 4+ baseline days, cap at two notifications
    # per day, and demand 10 points of ratio growth before re-alerting.
    monitor = Monitor(store, MonitorConfig(), log)

    for offset in range(4):
        as_of = date(2025, 6, 24) + timedelta(days=offset)
        fired = monitor.run_daily(as_of, USER)
        if not fired:
            print(f"{as_of}: quiet")
            continue
        for note in fired:
            print(f"{as_of}: [{note.kind}/{note.metric}] {note.message}")

            # The receipt: the observation query and the baseline query
            # the decision was computed from — the same evidence objects
            # chat answers carry.
            for ev in note.evidence:
                print(f"    plan: {ev.plan_text}")

            # The audit re-derives every number in the message from that
            # evidence; a notification that cannot account for its own
            # digits would never be worth trusting.
            verdict = note.audit()
            print("    audit:", "ok" if verdict.faithful
                  else f"VIOLATIONS {verdict.violations}")

    total = len(log.for_user(USER))
    print(f"\n{total} notification in four days: the spike fired exactly "
          "once, and the repeat stayed suppressed.")


if __name__ == "__main__":
    main()

"""Ask the seeded demo dataset some questions and inspect the receipts.

Builds the 30-day demo dataset in memory (same documents `sleepql datagen
--demo` writes to disk), ingests it, and walks four questions through the
engine: a simple lookup, a comparison against the personal baseline, a
question about a period with no data, and one about something no sensor
measures. For each answer we print the prose, then open the receipts:
the exact pipeline queries that ran, their result tables, and the
claim-by-claim mapping from printed numbers back to result cells.

Run from the repository root:

    python demos/ask_questions.py
"""

from sleepql.engine import Engine
from sleepql.harness import demo_now, make_demo_dataset
from sleepql.store import Store

QUESTIONS = [
    "How much deep sleep did I get last night?",
    "How many steps did I take today?",
    "How does my activity today compare to my usual weekly average?",
    "How many steps did I take on 2025-03-01?",   # long before the data starts
    "How much coffee did I drink yesterday?",     # nothing measures this
]


def main() -> None:
    # --- 1. Data: thirty days of two-device sleep + activity documents.
    # The generator is seeded, so everyone who runs this sees the same
    # numbers; the final day holds a short night (4 500 steps, 75 minutes
    # of deep sleep) that the questions below poke at.
    dataset = make_demo_dataset()
    store = Store()
    r1 = store.ingest_sleep(dataset.sleep_docs, dataset.user_id)
    r2 = store.ingest_activity(dataset.activity_docs, dataset.user_id)
    print(f"ingested {r1.rows_written} sleep sessions, "
          f"{r2.rows_written} activity days "
          f"({r1.rows_rejected + r2.rows_rejected} rejected)\n")

    # --- 2. The engine: translation -> validation -> evaluation -> prose.
    # `now` is pinned to the dataset's fixed clock so "today" and "last
    # night" resolve to the same dates on every run.
    engine = Engine(store)
    now = demo_now()

    for question in QUESTIONS:
        response = engine.handle(question, user_id=dataset.user_id,
                                 now=now, timezone=dataset.timezone)
        print(f"Q: {question}")
        print(f"A: [{response.kind}] {response.text}")

        # --- 3. Receipts. Data answers always carry at least one plan
        # plus its result; refusals ("unsupported") carry none, which is
        # the point — there is nothing to ground.
        for ev in response.evidence:
            print(f"   plan:   {ev.plan_text}")
            for line in ev.result.render_table().splitlines():
                print(f"           {line}")

        # --- 4. Number provenance: every digit in the prose, traced.
        for claim in response.number_provenance:
            src = ", ".join("/".join(map(str, s)) for s in claim.sources)
            print(f"   number: {claim.token!r} via {claim.transform} <- {src}")
        print()


if __name__ == "__main__":
    main()

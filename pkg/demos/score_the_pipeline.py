"""Score the whole pipeline against its own validation harness.

The harness generates a seeded 30-day dataset and a 90-question corpus
over it (simple lookups, baseline comparisons, and questions whose
correct answer is "no records exist"), then scores every answer on four
gates:

* **M1 plan executability** — every evidence plan re-parses, validates
  cleanly (no future-touching windows), and evaluates;
* **M2 intent match** — the plans are the ones the question called for;
* **M3 oracle equivalence** — the numbers agree with an independent
  brute-force recomputation from the raw documents (the oracle shares
  no code with the store or the evaluator, on purpose);
* **M4 faithfulness** — every number in the prose is derivable from the
  attached evidence.

As a self-check, the script then corrupts one digit of a real answer
and shows the faithfulness audit catching the lie.

Run from the repository root:

    python demos/score_the_pipeline.py

`sleepql validate` is the command-line equivalent of the first half.
"""

from sleepql.engine import Engine
from sleepql.harness import (demo_now, generate_corpus, make_demo_dataset,
                             run_validation, single_number_mutations)
from sleepql.harness.validation import faithfulness_audit
from sleepql.store import Store


def main() -> None:
    # --- 1. Dataset, engine, corpus — all seeded, all reproducible.
    dataset = make_demo_dataset()
    store = Store()
    store.ingest_sleep(dataset.sleep_docs, dataset.user_id)
    store.ingest_activity(dataset.activity_docs, dataset.user_id)
    engine = Engine(store)
    now = demo_now()
    corpus = generate_corpus(2025, dataset=dataset, now=now)

    # --- 2. Score everything.
    report = run_validation(corpus, engine, now=now,
                            timezone=dataset.timezone)
    print(report.to_text())

    # --- 3. Would the harness notice a wrong number? Take one genuine
    # answer, nudge a single digit of the prose, and re-audit. The
    # mutated text no longer matches the evidence, so M4 must fail.
    item = next(i for i in corpus
                if i.question == "How many steps did I take yesterday?")
    response = engine.handle(item.question, user_id=dataset.user_id,
                             now=now, timezone=dataset.timezone)
    assert faithfulness_audit(response).faithful

    mutant = next(single_number_mutations(response))
    verdict = faithfulness_audit(mutant)
    print(f"\nmutation check:")
    print(f"  honest : {response.text}")
    print(f"  mutated: {mutant.text}")
    print(f"  audit  : {'MISSED (bug!)' if verdict.faithful else 'caught — '}"
          f"{'; '.join(verdict.violations)}")


if __name__ == "__main__":
    main()

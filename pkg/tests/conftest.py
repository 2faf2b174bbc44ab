import pytest

from sleepql.engine import Engine
from sleepql.harness import (generate_corpus, demo_now, make_demo_dataset,
                             run_validation)
from sleepql.store import Store


@pytest.fixture(scope="session")
def demo_dataset():
    return make_demo_dataset()


@pytest.fixture(scope="session")
def fixed_now():
    return demo_now()


@pytest.fixture(scope="session")
def demo_store(demo_dataset):
    # Shared across the suite; treat as read-only.
    store = Store()
    store.ingest_sleep(demo_dataset.sleep_docs, demo_dataset.user_id)
    store.ingest_activity(demo_dataset.activity_docs, demo_dataset.user_id)
    return store


@pytest.fixture(scope="session")
def demo_engine(demo_store):
    return Engine(demo_store)


@pytest.fixture(scope="session")
def demo_corpus(demo_dataset, fixed_now):
    return generate_corpus(dataset=demo_dataset, now=fixed_now)


@pytest.fixture(scope="session")
def demo_report(demo_corpus, demo_engine, fixed_now, demo_dataset):
    return run_validation(demo_corpus, demo_engine, now=fixed_now,
                          timezone=demo_dataset.timezone)

"""End-to-end validation harness.

Four pieces: a seeded synthetic data generator, a seeded question corpus
generator, an independent brute-force oracle, and the validation runner
that scores the pipeline on four metrics (executable rate, intent match,
retrieval correctness, response faithfulness) with a failure taxonomy.

The oracle deliberately shares no code with the store or the query
evaluator; it recomputes every answer by direct iteration over the raw
documents.
"""

from .datagen import (AnomalySpec, Dataset, Distributions, demo_anomalies,
                      demo_now, generate_dataset, make_demo_dataset)
from .corpus import CorpusItem, generate_corpus
from .oracle import OracleAnswer, oracle_evaluate
from .validation import (ItemOutcome, ValidationReport, run_validation,
                         single_number_mutations)

__all__ = [
    "AnomalySpec", "Dataset", "Distributions", "demo_anomalies", "demo_now",
    "generate_dataset", "make_demo_dataset",
    "CorpusItem", "generate_corpus",
    "OracleAnswer", "oracle_evaluate",
    "ItemOutcome", "ValidationReport", "run_validation",
    "single_number_mutations",
]

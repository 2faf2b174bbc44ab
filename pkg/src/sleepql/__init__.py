"""Grounded sleep-care query engine.

Normalizes wearable sleep/activity records into a queryable time-series
layer, turns natural-language questions into validated pipeline queries,
renders evidence-backed answers, and watches personal baselines for
deviations worth mentioning.
"""

from .schema import (DEFAULT_LEXICON, MetricDescriptor, MetricLexicon,
                     lookup_metric)
from .store import (IngestReceipt, RawActivityDocument, RawSleepDocument,
                    SnapshotError, Store, StoreError, normalize_timestamp)

__version__ = "0.1.0"

"""Message routing: decide whether an inbound message asks for data.

Every message lands in exactly one of three buckets:

* ``data`` -- the message looks data-seeking and names a known metric;
* ``unsupported`` -- data-seeking, but the topic is outside the lexicon;
* ``chat`` -- everything else (general conversation, advice questions).

The decision is a fixed rule cascade, ordered data > unsupported > chat:
a mixed message resolves toward grounding, because failing into an explicit
null-data answer is safer than failing into free chat. The cascade is the
default backend; a pluggable translator may substitute its own judgment as
long as it returns the same Intent shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .schema import DEFAULT_LEXICON, MetricLexicon

# Surface features that mark a message as asking about the user's own data.
# Three families: measurement question forms, first-person markers, and
# temporal phrases. A message counts as data-seeking when a measurement
# form co-occurs with a personal or temporal marker.
_MEASUREMENT_PATTERNS = (
    r"how much", r"how many", r"how long", r"how often",
    r"how does", r"how did", r"how do", r"how was", r"how's", r"how is",
    r"what was", r"what is", r"what's", r"what are", r"what were",
    r"show me", r"tell me", r"give me",
    r"compare", r"compared", r"\bvs\b", r"versus",
    r"average", r"\btotal\b", r"\bcount\b",
)
_PERSONAL_PATTERNS = (r"\bmy\b", r"\bi\b", r"\bme\b", r"\bdid i\b", r"\bmine\b")
_TEMPORAL_PATTERNS = (
    r"last night", r"tonight", r"today", r"yesterday",
    r"this week", r"last week", r"this month", r"last month",
    r"(?:last|past|previous) \d+ days?", r"\d{4}-\d{2}-\d{2}",
    r"\brecently\b", r"\blately\b", r"\busual\b",
)

# Words stripped when naming the unresolved topic of an unsupported request.
_TOPIC_STOPWORDS = frozenset("""
    a an the this that these those of for on in at to from with about
    how much many long often does did do was is are were what show tell
    give me my i mine you your could would should can will please
    last night today yesterday week month past previous days day
    get got take took have had has drink drank eat ate do spend spent
    cup cups glass glasses hour hours minute minutes time and or but
    compare compared vs versus average usual total count than it
""".split())


@dataclass(frozen=True)
class Intent:
    """Routing verdict for one message.

    ``matched_metric`` is set exactly when ``kind`` is ``data``; for
    ``unsupported`` the rationale records the surface form that failed to
    resolve.
    """

    kind: str                      # "chat" | "data" | "unsupported"
    matched_metric: Optional[str]  # metric_id
    confidence: float
    rationale: str

    def __post_init__(self):
        if self.kind not in ("chat", "data", "unsupported"):
            raise ValueError(f"bad intent kind {self.kind!r}")
        if self.kind == "data" and not self.matched_metric:
            raise ValueError("data intent requires matched_metric")


def _fired(patterns: tuple[str, ...], folded: str) -> list[str]:
    hits = []
    for pat in patterns:
        m = re.search(pat, folded)
        if m:
            hits.append(m.group(0).strip())
    return hits


def extract_topic(message: str) -> str:
    """Best-effort name for what an unsupported question is about.

    Strips question scaffolding, time phrases, and measure words; whatever
    content words remain are the topic. Falls back to a generic label when
    nothing survives.
    """
    folded = re.sub(r"[^a-z0-9\s-]", " ", message.casefold())
    words = [w for w in folded.split() if w not in _TOPIC_STOPWORDS
             and not re.fullmatch(r"\d+|\d{4}-\d{2}-\d{2}", w)]
    return " ".join(words) if words else "that topic"


def classify(message: str, lexicon: MetricLexicon = DEFAULT_LEXICON) -> Intent:
    """Classify one message. Total and deterministic.

    Rule cascade: (1) collect data-seeking features; (2) if data-seeking and
    a lexicon metric appears, route to data; (3) if data-seeking without a
    resolvable metric, route to unsupported; (4) otherwise chat.
    """
    text = message.strip()
    if not text:
        raise ValueError("empty message")
    folded = " ".join(text.casefold().split())

    measurement = _fired(_MEASUREMENT_PATTERNS, folded)
    personal = _fired(_PERSONAL_PATTERNS, folded)
    temporal = _fired(_TEMPORAL_PATTERNS, folded)
    data_seeking = bool(measurement) and bool(personal or temporal)

    if data_seeking:
        metric = lexicon.find_in_text(text)
        features = (f"measurement={measurement[0]!r}"
                    f", personal={personal[0]!r}" if personal else
                    f"measurement={measurement[0]!r}")
        if temporal:
            features += f", temporal={temporal[0]!r}"
        if metric is not None:
            return Intent("data", metric.metric_id, 1.0,
                          f"{features}; metric={metric.metric_id}")
        topic = extract_topic(text)
        return Intent("unsupported", None, 1.0,
                      f"{features}; unresolved topic={topic!r}")
    return Intent("chat", None, 0.5, "no data-seeking features fired")

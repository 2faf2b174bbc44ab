"""Message routing: data vs. unsupported vs. chat."""

import string

import pytest
from hypothesis import given, settings, strategies as st

from sleepql.router import Intent, classify, extract_topic


def kind(message: str) -> str:
    return classify(message).kind


class TestDataRouting:
    @pytest.mark.parametrize("message, metric", [
        ("How much deep sleep did I get last night?", "deep_sleep_minutes"),
        ("How many steps did I take today?", "steps"),
        ("What was my total sleep time yesterday?", "total_sleep_minutes"),
        ("Show me my REM sleep this week", "rem_minutes"),
        ("How much time awake did I have last night?", "waso_minutes"),
        ("What's my average heart rate this week?", "hr_avg"),
        ("How did my sleep this week compare to last week?",
         "total_sleep_minutes"),
        ("How does my activity today compare to my usual weekly average?",
         "steps"),
        ("how many calories did i burn yesterday", "calories"),
        ("What was my sleep efficiency on 2025-07-01?", "sleep_efficiency"),
    ])
    def test_measurement_questions_with_metric(self, message, metric):
        intent = classify(message)
        assert intent.kind == "data"
        assert intent.matched_metric == metric

    def test_longest_surface_wins(self):
        # "total sleep" must not resolve via the shorter surface "sleep"
        assert classify("What was my total sleep last night?"
                        ).matched_metric == "total_sleep_minutes"
        assert classify("What was my average heart rate today?"
                        ).matched_metric == "hr_avg"

    def test_temporal_marker_alone_can_anchor(self):
        # no personal pronoun, but a measurement form plus a time phrase
        assert kind("How much deep sleep last night?") == "data"


class TestUnsupportedRouting:
    @pytest.mark.parametrize("message", [
        "How much coffee did I drink yesterday?",
        "How many glasses of water did I have today?",
        "How much screen time did I get last night?",
    ])
    def test_data_seeking_without_known_metric(self, message):
        intent = classify(message)
        assert intent.kind == "unsupported"
        assert intent.matched_metric is None

    def test_topic_is_named_in_rationale(self):
        intent = classify("How much coffee did I drink yesterday?")
        assert "coffee" in intent.rationale

    def test_extract_topic_strips_scaffolding(self):
        assert extract_topic("How much coffee did I drink yesterday?") == "coffee"
        assert extract_topic("How much did I yesterday?") == "that topic"


class TestChatRouting:
    @pytest.mark.parametrize("message", [
        "Hello!",
        "Thanks, that was helpful.",
        "Should I drink coffee before bed?",
        "Any tips for falling asleep faster?",
        "Why do people dream?",
        "Did I sleep more than usual?",  # no measurement form fired
        "I feel tired",
    ])
    def test_conversational_messages(self, message):
        assert kind(message) == "chat"

    def test_word_bounded_surfaces(self):
        # "sleeping" must not substring-match the metric surface "sleep"
        assert kind("How was the weather while I was sleeping today?") == \
            "unsupported"


class TestTotality:
    def test_empty_message_raises(self):
        with pytest.raises(ValueError):
            classify("")
        with pytest.raises(ValueError):
            classify("   ")

    def test_intent_invariants_enforced(self):
        with pytest.raises(ValueError):
            Intent("data", None, 1.0, "missing metric")
        with pytest.raises(ValueError):
            Intent("weird", None, 1.0, "bad kind")

    @given(st.text(string.ascii_letters + string.digits + " ?!.,'-:",
                   min_size=1, max_size=80))
    @settings(max_examples=500, deadline=None)
    def test_every_message_gets_exactly_one_bucket(self, message):
        if not message.strip():
            return
        intent = classify(message)
        assert intent.kind in ("chat", "data", "unsupported")
        assert (intent.matched_metric is not None) == (intent.kind == "data")
        same = classify(message)
        assert same == intent  # deterministic

    def test_classification_is_case_insensitive(self):
        a = classify("HOW MUCH DEEP SLEEP DID I GET LAST NIGHT?")
        b = classify("how much deep sleep did i get last night?")
        assert a.kind == b.kind == "data"
        assert a.matched_metric == b.matched_metric

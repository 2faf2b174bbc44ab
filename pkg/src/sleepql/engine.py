"""Message-to-response orchestration.

One entry point, ``Engine.handle``, drives the full path: translate the
message (pluggable backend with deterministic fallback), clamp whatever
windows the backend produced, instantiate validated plans, evaluate them,
and render a grounded response. Numeric content can only enter through
query results; backends supply structure and, for chat, prose.
"""

from __future__ import annotations

import concurrent.futures
from datetime import datetime, timezone as _tz
from typing import Optional

from .generator import (DeterministicBackend, GeneratorError, Translation,
                        TranslatorBackend, clamp_request, instantiate_query)
from .pql.context import EvalContext
from .pql.evaluate import evaluate
from .responder import (GroundedResponse, render, render_chat,
                        render_clarification, render_unsupported)
from .router import extract_topic
from .schema import DEFAULT_LEXICON, MetricLexicon
from .store import Store


class Engine:
    """Stateless request handler over a store and a translation backend.

    ``backend_timeout`` bounds slow backends (seconds); on timeout or any
    unexpected backend error the deterministic backend answers instead and
    the response trace records the fallback.
    """

    def __init__(self, store: Store,
                 lexicon: MetricLexicon = DEFAULT_LEXICON,
                 backend: Optional[TranslatorBackend] = None,
                 backend_timeout: Optional[float] = None):
        self.store = store
        self.lexicon = lexicon
        self.backend = backend or DeterministicBackend()
        self.fallback = DeterministicBackend()
        self.backend_timeout = backend_timeout

    def _translate(self, message: str, now: datetime, timezone: str,
                   user_id: str) -> tuple[Translation, tuple[str, ...]]:
        """Run the configured backend, falling back on failure.

        GeneratorError is a user-facing condition (unparseable or ambiguous
        period), not a backend failure; it propagates.
        """
        trace = (f"backend={self.backend.name}",)
        kwargs = dict(lexicon=self.lexicon, now=now, timezone=timezone,
                      user_id=user_id)
        try:
            if self.backend_timeout is not None:
                with concurrent.futures.ThreadPoolExecutor(1) as pool:
                    future = pool.submit(self.backend.translate, message,
                                         **kwargs)
                    translation = future.result(self.backend_timeout)
            else:
                translation = self.backend.translate(message, **kwargs)
            if translation.intent.kind == "data" and translation.request is None:
                raise RuntimeError("backend returned data intent without request")
            return translation, trace
        except GeneratorError:
            raise
        except Exception:
            if isinstance(self.backend, DeterministicBackend):
                raise
            translation = self.fallback.translate(message, **kwargs)
            return translation, trace + ("backend_fallback",)

    def handle(self, message: str, user_id: str, now: datetime,
               timezone: str = "UTC") -> GroundedResponse:
        if now.tzinfo is None:
            raise ValueError("now must be timezone-aware")
        now = now.astimezone(_tz.utc)
        if not message or not message.strip():
            raise ValueError("empty message")

        try:
            translation, trace = self._translate(message, now, timezone, user_id)
        except GeneratorError as err:
            return render_clarification(err.code, str(err))

        intent = translation.intent
        if intent.kind == "chat":
            return render_chat(message, translation.reply).with_trace(*trace)
        if intent.kind == "unsupported":
            return render_unsupported(extract_topic(message),
                                      self.lexicon).with_trace(*trace)

        try:
            request, clamped = clamp_request(translation.request, now)
        except GeneratorError as err:
            return render_clarification(err.code, str(err)).with_trace(*trace)
        if clamped:
            trace = trace + ("window_clamped",)

        ctx = EvalContext(now=now, user_id=user_id, timezone=timezone)
        instantiated = instantiate_query(request, ctx, self.store, self.lexicon)
        results = [evaluate(plan, self.store, ctx)
                   for _, plan in instantiated.plans]
        response = render(request, results, self.lexicon)
        return response.with_trace(*trace)

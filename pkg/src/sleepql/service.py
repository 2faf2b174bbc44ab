"""HTTP face of the engine: sessions, chat, ingestion, notifications.

One process owns one store. Sessions pin a user and timezone; message
handling within a session is serialized in arrival order while separate
sessions proceed concurrently. Translator trouble never surfaces as a
5xx; the engine falls back to the deterministic backend and notes it in
the response trace.

Configuration comes from an optional JSON file plus two environment
overrides, SLEEPQL_BIND and SLEEPQL_SNAPSHOT. A fixed ``now_override``
makes every response reproducible down to the byte and is refused in
production mode.
"""

from __future__ import annotations

import json
import threading
import urllib.request
import uuid
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone as dt_timezone
from os import environ
from pathlib import Path
from typing import Any, Optional
from zoneinfo import ZoneInfo

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import Engine
from .generator import Translation
from .monitor import Monitor, MonitorConfig, NotificationLog
from .schema import DEFAULT_LEXICON, MetricLexicon
from .store import Store

ENV_BIND = "SLEEPQL_BIND"
ENV_SNAPSHOT = "SLEEPQL_SNAPSHOT"
DEFAULT_BIND = "127.0.0.1:8787"


@dataclass(frozen=True)
class ServiceConfig:
    """Process-level settings; see docs/formats.md for the file schema."""

    snapshot_path: Optional[str] = None
    lexicon_path: Optional[str] = None
    backend: str = "deterministic"  # or an http(s) translator endpoint
    backend_timeout: float = 10.0
    monitor: MonitorConfig = field(default_factory=MonitorConfig)
    bind: str = DEFAULT_BIND
    default_timezone: str = "UTC"
    now_override: Optional[str] = None  # ISO instant, must carry an offset
    production: bool = False
    notifications_path: Optional[str] = None
    ui_dir: Optional[str] = None  # static files served at / when set

    def __post_init__(self):
        if self.ui_dir is not None and not Path(self.ui_dir).is_dir():
            raise ValueError(f"ui_dir is not a directory: {self.ui_dir!r}")
        if self.production and self.now_override is not None:
            raise ValueError("now_override is not honored in production mode")
        if self.now_override is not None:
            parsed = datetime.fromisoformat(self.now_override)
            if parsed.tzinfo is None:
                raise ValueError("now_override must be timezone-aware")
        ZoneInfo(self.default_timezone)
        if self.backend != "deterministic" and not (
                self.backend.startswith("http://")
                or self.backend.startswith("https://")):
            raise ValueError(
                f"backend must be 'deterministic' or an http(s) URL, "
                f"got {self.backend!r}")

    @property
    def host(self) -> str:
        return self.bind.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind.rsplit(":", 1)[1])

    def now(self) -> datetime:
        if self.now_override is not None:
            return datetime.fromisoformat(self.now_override)
        return datetime.now(dt_timezone.utc)

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config document must be a JSON object")
        monitor = MonitorConfig(**doc.pop("monitor", {}))
        known = {f for f in cls.__dataclass_fields__ if f != "monitor"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(monitor=monitor, **doc)

    @classmethod
    def load(cls, path=None) -> "ServiceConfig":
        """File config (when given) with environment overrides applied."""
        config = cls.from_file(path) if path is not None else cls()
        updates: dict[str, Any] = {}
        if environ.get(ENV_BIND):
            updates["bind"] = environ[ENV_BIND]
        if environ.get(ENV_SNAPSHOT):
            updates["snapshot_path"] = environ[ENV_SNAPSHOT]
        return replace(config, **updates) if updates else config


class HttpTranslatorBackend:
    """Forwards translation to an external service speaking the versioned
    translation document schema; any failure makes the engine fall back."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.name = f"external:{url}"
        self.url = url
        self.timeout = timeout

    def translate(self, message: str, *, lexicon, now, timezone,
                  user_id) -> Translation:
        body = json.dumps({
            "version": 1,
            "message": message,
            "now": now.isoformat(),
            "timezone": timezone,
            "user_id": user_id,
        }).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, method="POST",
            headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        return Translation.from_document(payload)


@dataclass
class Session:
    session_id: str
    user_id: str
    timezone: str
    created_at: str
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def describe(self, with_history: bool = True) -> dict:
        out = {
            "session_id": self.session_id,
            "user_id": self.user_id,
            "timezone": self.timezone,
            "created_at": self.created_at,
        }
        if with_history:
            out["history"] = list(self.history)
        return out


class _SessionBody(BaseModel):
    user_id: str
    timezone: Optional[str] = None


class _ChatBody(BaseModel):
    session_id: str
    text: str


class _IngestBody(BaseModel):
    user_id: str
    documents: list[dict]


class _MonitorRunBody(BaseModel):
    as_of_date: str
    user_id: Optional[str] = None


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def load_lexicon(path) -> MetricLexicon:
    with open(path, "r", encoding="utf-8") as fh:
        return MetricLexicon.from_document(json.load(fh))


def build_engine(config: ServiceConfig) -> Engine:
    if config.snapshot_path and Path(config.snapshot_path).exists():
        store = Store.load(config.snapshot_path)
    else:
        store = Store()
    lexicon = (load_lexicon(config.lexicon_path)
               if config.lexicon_path else DEFAULT_LEXICON)
    if config.backend == "deterministic":
        return Engine(store, lexicon)
    backend = HttpTranslatorBackend(config.backend, config.backend_timeout)
    return Engine(store, lexicon, backend=backend,
                  backend_timeout=config.backend_timeout)


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    engine = build_engine(config)
    log = NotificationLog(config.notifications_path)
    monitor = Monitor(engine.store, config.monitor, log, engine.lexicon,
                      timezone=config.default_timezone)

    app = FastAPI(title="sleepql", docs_url=None, redoc_url=None)
    app.state.config = config
    app.state.engine = engine
    app.state.store = engine.store
    app.state.monitor = monitor
    app.state.log = log
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    app.state.sessions = sessions

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        # The spec'd contract is 400 for malformed bodies, not FastAPI's 422.
        return _error(400, f"malformed request: {exc.errors()[0]['msg']}")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: _SessionBody):
        tz = body.timezone or config.default_timezone
        try:
            ZoneInfo(tz)
        except Exception:
            return _error(400, f"unknown timezone {tz!r}")
        if not body.user_id.strip():
            return _error(400, "user_id must not be empty")
        session = Session(session_id=uuid.uuid4().hex,
                          user_id=body.user_id, timezone=tz,
                          created_at=config.now().isoformat())
        with sessions_lock:
            sessions[session.session_id] = session
        return session.describe(with_history=False)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = sessions.get(session_id)
        if session is None:
            return _error(404, f"unknown session {session_id!r}")
        return session.describe()

    @app.post("/chat")
    def chat(body: _ChatBody):
        session = sessions.get(body.session_id)
        if session is None:
            return _error(404, f"unknown session {body.session_id!r}")
        text = body.text.strip()
        if not text:
            return _error(400, "text must not be empty")
        with session.lock:
            now = config.now()
            response = engine.handle(text, user_id=session.user_id, now=now,
                                     timezone=session.timezone)
            stamp = now.isoformat()
            session.history.append(
                {"role": "user", "text": text, "kind": None,
                 "timestamp": stamp})
            session.history.append(
                {"role": "agent", "text": response.text,
                 "kind": response.kind, "timestamp": stamp,
                 "response": response.to_dict()})
        return {"session_id": session.session_id,
                "response": response.to_dict()}

    def _ingest(kind: str, body: _IngestBody):
        if kind == "activity":
            receipt = engine.store.ingest_activity(body.documents, body.user_id)
        else:
            receipt = engine.store.ingest_sleep(body.documents, body.user_id)
        if config.snapshot_path:
            engine.store.persist(config.snapshot_path)
        return {"receipt": receipt.to_dict()}

    @app.post("/ingest/activity")
    def ingest_activity(body: _IngestBody):
        return _ingest("activity", body)

    @app.post("/ingest/sleep")
    def ingest_sleep(body: _IngestBody):
        return _ingest("sleep", body)

    @app.get("/notifications")
    def notifications(user_id: str, since: Optional[str] = None):
        if since is not None:
            try:
                date.fromisoformat(since)
            except ValueError:
                return _error(400, f"since must be an ISO date, got {since!r}")
        return {"notifications": log.for_user(user_id, since)}

    @app.post("/monitor/run")
    def monitor_run(body: _MonitorRunBody):
        try:
            as_of = date.fromisoformat(body.as_of_date)
        except ValueError:
            return _error(400,
                          f"as_of_date must be an ISO date, "
                          f"got {body.as_of_date!r}")
        users = ([body.user_id] if body.user_id
                 else engine.store.user_ids())
        produced = []
        for user in users:
            produced.extend(n.to_dict() for n in monitor.run_daily(as_of, user))
        return {"notifications": produced}

    if config.ui_dir:
        # Static UI at the root, registered after the API routes so those
        # always win. html=True makes "/" serve index.html — the whole
        # front end then runs same-origin with the API it talks to.
        app.mount("/", StaticFiles(directory=config.ui_dir, html=True),
                  name="ui")

    return app

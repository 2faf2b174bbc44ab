"""Command line entry points.

Subcommands: ``serve`` (HTTP service), ``ingest`` (JSONL batch into a
snapshot), ``ask`` (one question, printed with its evidence trace),
``pql`` (parse/validate/evaluate a query), ``monitor`` (daily run),
``validate`` (seeded corpus scorecard), ``datagen`` (seeded synthetic
data). Exit status is 0 on success and 1 when diagnostics or failures
were reported.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date, datetime
from pathlib import Path
from typing import Optional
from zoneinfo import ZoneInfo

from .engine import Engine
from .harness import (generate_corpus, generate_dataset, demo_anomalies,
                      demo_now, make_demo_dataset, run_validation)
from .monitor import Monitor, MonitorConfig, NotificationLog
from .pql import EvalContext, evaluate, parse, validate
from .schema import DEFAULT_LEXICON
from .service import ServiceConfig, create_app, load_lexicon
from .store import Store, read_jsonl
from .values import format_cell


def _load_config(args) -> ServiceConfig:
    config = ServiceConfig.load(getattr(args, "config", None))
    overrides = {}
    if getattr(args, "snapshot", None):
        overrides["snapshot_path"] = args.snapshot
    if getattr(args, "now", None):
        overrides["now_override"] = args.now
    if getattr(args, "timezone", None):
        overrides["default_timezone"] = args.timezone
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
    return config


def _load_store(config: ServiceConfig) -> Store:
    if config.snapshot_path and Path(config.snapshot_path).exists():
        return Store.load(config.snapshot_path)
    return Store()


def _now_of(config: ServiceConfig) -> datetime:
    return config.now()


def _print_result(result) -> None:
    names = result.column_names()
    print("  columns: " + ", ".join(names))
    for row in result.rows:
        print("    " + " | ".join(format_cell(v) for v in row))
    if not result.rows:
        print("    (no rows)")
    for note in result.warnings:
        print(f"  warning: {note}")


def cmd_serve(args) -> int:
    import uvicorn

    config = _load_config(args)
    if args.bind:
        from dataclasses import replace
        config = replace(config, bind=args.bind)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def cmd_ingest(args) -> int:
    config = _load_config(args)
    store = _load_store(config)
    path = Path(args.file)
    table = args.table
    if table is None:
        stem = path.name.casefold()
        if "sleep" in stem:
            table = "sleep"
        elif "activity" in stem:
            table = "activity"
        else:
            print("cannot infer table from filename; pass --table",
                  file=sys.stderr)
            return 1
    docs = read_jsonl(path)
    if table == "sleep":
        receipt = store.ingest_sleep(docs, args.user)
    else:
        receipt = store.ingest_activity(docs, args.user)
    if config.snapshot_path:
        store.persist(config.snapshot_path)
        print(f"snapshot written to {config.snapshot_path}")
    print(f"{receipt.table}: {receipt.rows_written} written, "
          f"{receipt.rows_rejected} rejected")
    for index, reason in receipt.rejection_reasons:
        print(f"  line {index}: {reason}", file=sys.stderr)
    return 1 if receipt.rows_rejected else 0


def cmd_ask(args) -> int:
    config = _load_config(args)
    store = _load_store(config)
    lexicon = (load_lexicon(config.lexicon_path)
               if config.lexicon_path else DEFAULT_LEXICON)
    engine = Engine(store, lexicon)
    response = engine.handle(args.question, user_id=args.user,
                             now=_now_of(config),
                             timezone=config.default_timezone)
    print(response.text)
    if response.evidence:
        print()
        print("evidence:")
        for ev in response.evidence:
            print(f"  plan: {ev.plan_text}")
            _print_result(ev.result)
    if response.trace:
        print("trace: " + ", ".join(response.trace))
    return 0


def cmd_pql(args) -> int:
    if args.query is not None:
        text = args.query
    elif args.file is not None:
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    text = text.strip()
    if not text:
        print("empty query", file=sys.stderr)
        return 1

    parsed = parse(text)
    if not parsed.ok:
        for diag in parsed.diagnostics:
            print(diag, file=sys.stderr)
        return 1

    config = _load_config(args)
    ctx = EvalContext(now=_now_of(config), user_id=args.user,
                      timezone=config.default_timezone)
    checked = validate(parsed.plan, ctx=ctx, stage_spans=parsed.stage_spans)
    for diag in checked.diagnostics:
        print(diag, file=sys.stderr)
    if not checked.ok:
        return 1

    store = _load_store(config)
    result = evaluate(checked.validated, store, ctx)
    print(result.provenance)
    _print_result(result)
    return 0


def cmd_monitor(args) -> int:
    config = _load_config(args)
    store = _load_store(config)
    log = NotificationLog(config.notifications_path)
    monitor = Monitor(store, config.monitor, log, DEFAULT_LEXICON,
                      timezone=config.default_timezone)
    as_of = date.fromisoformat(args.date)
    users = [args.user] if args.user else store.user_ids()
    total = 0
    for user in users:
        for note in monitor.run_daily(as_of, user):
            total += 1
            print(f"[{note.user_id}] {note.kind} {note.metric} "
                  f"{note.delta_percent()}: {note.message}")
    if total == 0:
        print("no notifications")
    return 0


def cmd_validate(args) -> int:
    now = demo_now()
    if args.days is None:
        dataset = make_demo_dataset(args.seed)
    else:
        # Custom lengths keep "today" anchored on the fixed clock; the
        # storyline overrides only make sense at the default length.
        from datetime import timedelta
        last_day = now.astimezone(ZoneInfo("Asia/Seoul")).date()
        dataset = generate_dataset(
            args.seed, args.days,
            start_date=last_day - timedelta(days=args.days - 1))
    store = Store()
    store.ingest_sleep(dataset.sleep_docs, dataset.user_id)
    store.ingest_activity(dataset.activity_docs, dataset.user_id)
    engine = Engine(store)
    corpus = generate_corpus(args.corpus_seed, dataset=dataset, now=now)
    report = run_validation(corpus, engine, now=now,
                            timezone=dataset.timezone)
    print(report.to_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"report written to {args.out}")
    return 0 if report.passed else 1


def cmd_datagen(args) -> int:
    anomalies = demo_anomalies() if args.demo else None
    dataset = generate_dataset(args.seed, args.days, anomalies=anomalies)
    out_dir = Path(args.out_dir)
    sleep_path, activity_path = dataset.write_jsonl(out_dir)
    print(f"wrote {sleep_path} ({len(dataset.sleep_docs)} docs)")
    print(f"wrote {activity_path} ({len(dataset.activity_docs)} docs)")
    if args.snapshot:
        store = Store()
        store.ingest_sleep(dataset.sleep_docs, dataset.user_id)
        store.ingest_activity(dataset.activity_docs, dataset.user_id)
        store.persist(args.snapshot)
        print(f"wrote snapshot {args.snapshot}")
    return 0


def _add_common(parser, *, now: bool = True) -> None:
    parser.add_argument("--config", help="service config JSON file")
    parser.add_argument("--snapshot", help="store snapshot path")
    parser.add_argument("--tz", dest="timezone",
                        help="IANA timezone for interpretation and display")
    if now:
        parser.add_argument("--now", help="fixed ISO instant (with offset)")


def build_parser() -> argparse.ArgumentParser:
    root = argparse.ArgumentParser(
        prog="sleepql",
        description="Grounded sleep-data question answering")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--bind", help="host:port (overrides config and env)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="ingest a JSONL document batch")
    _add_common(p, now=False)
    p.add_argument("file", help="JSONL file of raw documents")
    p.add_argument("--table", choices=("activity", "sleep"))
    p.add_argument("--user", default="demo")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ask", help="answer one question with evidence")
    _add_common(p)
    p.add_argument("question")
    p.add_argument("--user", default="demo")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("pql", help="run one query")
    pql_sub = p.add_subparsers(dest="pql_command", required=True)
    q = pql_sub.add_parser("eval", help="parse, validate, evaluate")
    _add_common(q)
    q.add_argument("--query", "-q", help="query text (default: stdin)")
    q.add_argument("--file", "-f", help="read query from file")
    q.add_argument("--user", default="demo")
    q.set_defaults(func=cmd_pql)

    p = sub.add_parser("monitor", help="proactive monitoring")
    mon_sub = p.add_subparsers(dest="monitor_command", required=True)
    m = mon_sub.add_parser("run", help="run the daily check")
    _add_common(m, now=False)
    m.add_argument("--date", required=True, help="as-of ISO date")
    m.add_argument("--user", help="default: every user in the store")
    m.set_defaults(func=cmd_monitor)

    p = sub.add_parser("validate",
                       help="score the seeded corpus against the engine")
    p.add_argument("--seed", type=int, default=7, help="dataset seed")
    p.add_argument("--corpus-seed", type=int, default=2025)
    p.add_argument("--days", type=int, help="dataset length in days")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("datagen", help="generate seeded synthetic data")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--out-dir", default="data")
    p.add_argument("--demo", action="store_true",
                   help="apply the demo storyline overrides")
    p.add_argument("--snapshot", help="also write a store snapshot here")
    p.set_defaults(func=cmd_datagen)

    return root


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

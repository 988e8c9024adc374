"""Command-line entry point: ingest, run, serve, report, kpi, dump.

Each verb wraps one module operation, exits 0 on success, and prints a
single machine-parsable `error: ...` line to stderr otherwise, so the
daily batch can run from cron and scripts can scrape the output.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from .config import ServiceConfig, load_service_config
from .errors import VigilError
from .filters import parse_filter
from .report import emit_report
from .results import ResultsStore
from .runner import run_daily
from .store import GeoHierarchy, StreamStore
from .triage import TriageStore


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise VigilError(f"bad date {text!r}, expected YYYY-MM-DD") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vigil", description=__doc__)
    parser.add_argument("--config", help="service config file (YAML)")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_ingest = sub.add_parser("ingest", help="load observation rows from a delimited file")
    p_ingest.add_argument("file", help="CSV file in the ingestion wire format")
    p_ingest.add_argument("--store", help="override the stream store path")

    p_run = sub.add_parser("run", help="score all streams for a date")
    p_run.add_argument("--as-of", required=True)
    p_run.add_argument("--parallel", action="store_true")

    p_serve = sub.add_parser("serve", help="start the HTTP query service")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)

    p_report = sub.add_parser("report", help="emit the static top-k HTML report")
    p_report.add_argument("--as-of", required=True)
    p_report.add_argument("--k", type=int, default=None)
    p_report.add_argument("--out", help="output file path")

    p_kpi = sub.add_parser("kpi", help="print the reviewer KPI report for a period")
    p_kpi.add_argument("--from", dest="start", required=True)
    p_kpi.add_argument("--to", dest="end", required=True)
    p_kpi.add_argument("--format", choices=["json", "csv"], default="json")

    p_dump = sub.add_parser("dump", help="write a canonical delimited dump to stdout")
    p_dump.add_argument(
        "what", choices=["streams", "results", "events", "meta-events"], default="streams"
    )
    p_dump.add_argument("--as-of", help="restrict a results dump to one run")
    p_dump.add_argument("--store", help="override the relevant store path")

    p_filter = sub.add_parser("check-filter", help="validate a filter expression")
    p_filter.add_argument("--filter", required=True)
    return parser


def _cmd_ingest(cfg: ServiceConfig, args) -> int:
    store = StreamStore(args.store or cfg.streams_db)
    report = store.ingest_csv(args.file)
    print(
        f"inserted {report.inserted} replaced {report.replaced}"
        f" unchanged {report.unchanged} rejected {report.rejected}"
    )
    for rejection in report.rejections[:50]:
        print(f"  row {rejection.row}: {rejection.reason}")
    return 0 if report.rejected == 0 else 1


def _cmd_run(cfg: ServiceConfig, args) -> int:
    streams = StreamStore(cfg.streams_db)
    results = ResultsStore(cfg.results_db)
    report = run_daily(
        streams,
        results,
        _parse_date(args.as_of),
        cfg.expectations,
        window_days=cfg.window_days,
        parallel=args.parallel,
    )
    note = " (overwrote identical)" if report.overwrote_identical else ""
    print(
        f"run {report.run_id}: scored {report.streams_scored} streams,"
        f" {report.points_scored} points, skipped {len(report.skipped)},"
        f" {report.wall_time_sec:.2f}s{note}"
    )
    for key, reason in report.skipped[:20]:
        print(f"  skipped {key}: {reason}")
    return 0


def _cmd_serve(cfg: ServiceConfig, args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(cfg)
    uvicorn.run(
        app,
        host=args.host or cfg.listen_host,
        port=args.port or cfg.listen_port,
        log_level="info",
    )
    return 0


def _cmd_report(cfg: ServiceConfig, args) -> int:
    as_of = _parse_date(args.as_of)
    k = args.k or cfg.k_default
    out = Path(args.out) if args.out else Path(cfg.report_out) / f"top{k}-{as_of.isoformat()}.html"
    path = emit_report(
        StreamStore(cfg.streams_db),
        ResultsStore(cfg.results_db),
        GeoHierarchy.from_csv(cfg.geo_file) if Path(cfg.geo_file).exists() else None,
        as_of,
        k,
        out,
        window_days=cfg.window_days,
    )
    print(path)
    return 0


def _cmd_kpi(cfg: ServiceConfig, args) -> int:
    store = TriageStore(cfg.triage_db)
    report = store.compute_kpis((_parse_date(args.start), _parse_date(args.end)))
    if args.format == "csv":
        from .triage import kpi_report_csv

        print(kpi_report_csv(report), end="")
        return 0
    print(
        json.dumps(
            {
                "period": {
                    "from": report.period[0].isoformat(),
                    "to": report.period[1].isoformat(),
                },
                "time_per_row_sec": {
                    "mean": report.time_per_row.mean,
                    "ci_low": report.time_per_row.ci_low,
                    "ci_high": report.time_per_row.ci_high,
                },
                "events_per_session": {
                    "mean": report.events_per_session.mean,
                    "ci_low": report.events_per_session.ci_low,
                    "ci_high": report.events_per_session.ci_high,
                },
                "events_per_minute": report.events_per_minute,
                "edits": report.edits,
                "meta_events": report.meta_events,
                "pct_not_source": report.pct_not_source,
                "filter_uses_per_day": {
                    "mean": report.filter_uses_per_day.mean,
                    "sd": report.filter_uses_per_day.sd,
                },
                "predicates_per_filter": report.predicates_per_filter,
                "characterization": [
                    {"event_type": et, "severity": sev, "count": n}
                    for (et, sev), n in sorted(report.characterization.items())
                ],
            },
            indent=2,
        )
    )
    return 0


def _cmd_dump(cfg: ServiceConfig, args) -> int:
    if args.what == "streams":
        StreamStore(args.store or cfg.streams_db).dump(sys.stdout)
    elif args.what == "results":
        as_of = _parse_date(args.as_of) if args.as_of else None
        ResultsStore(args.store or cfg.results_db).dump(as_of, sys.stdout)
    elif args.what == "events":
        TriageStore(args.store or cfg.triage_db).dump_events(sys.stdout)
    else:
        TriageStore(args.store or cfg.triage_db).dump_meta_events(sys.stdout)
    return 0


def _cmd_check_filter(_cfg: ServiceConfig, args) -> int:
    spec = parse_filter(args.filter)
    print(f"ok: {len(spec.predicates)} predicates")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_service_config(args.config)
        handler = {
            "ingest": _cmd_ingest,
            "run": _cmd_run,
            "serve": _cmd_serve,
            "report": _cmd_report,
            "kpi": _cmd_kpi,
            "dump": _cmd_dump,
            "check-filter": _cmd_check_filter,
        }[args.verb]
        return handler(cfg, args)
    except VigilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

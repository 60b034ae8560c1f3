"""Command line entry point.

::

    livinglab ingest validate RUN --candidates FILE
    livinglab app serve --config FILE
    livinglab app replay --log FILE [--out FILE] [--scorecards]
    livinglab server serve --config FILE
    livinglab server report --out FILE (--url URL | --config FILE)
    livinglab sim run [--config FILE] --seed N --sessions N --mode wire|inproc --out FILE
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import RunFormatError


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_ingest_validate(args) -> int:
    from .runs import load_candidates, read_run_file, validate_against_candidates

    try:
        candidates = load_candidates(args.candidates) if args.candidates else {}
        rs = read_run_file(args.run_file)
    except RunFormatError as exc:
        print(f"status: rejected\nerror: {type(exc).__name__}: {exc}")
        return 2
    report = validate_against_candidates(rs, candidates)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        sys.stdout.write(report.to_text())
    return 0 if report.accepted else 1


def cmd_app_serve(args) -> int:
    from .app import AppConfig, SiteApp
    from .app.http import AppService
    from .server import ServerClient

    config = AppConfig.load(args.config)
    app = SiteApp.from_config(config)
    server = None
    if config.server_url:
        server = ServerClient(config.server_url, config.server_token)
        if config.server_sync:
            app.sync_from_server(server)
    svc = AppService(app, server, config.host, config.port, push_interval_s=config.push_interval_s)
    logging.getLogger(__name__).info("site app listening on %s", svc.url)
    try:
        svc.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_app_replay(args) -> int:
    from .eventlog import read_log
    from .metrics import build_scorecards, derive_outcomes
    from .model import record_from_dict

    raw = read_log(args.log)
    records = [record_from_dict(d) for d in raw]
    outcomes = derive_outcomes(records)
    doc = {"records": raw, "outcomes": [o.to_dict() for o in outcomes]}
    if args.scorecards:
        doc["scorecards"] = [c.to_dict() for c in build_scorecards(records, outcomes)]
    _write(json.dumps(doc, sort_keys=True, indent=1) + "\n", args.out)
    return 0


def cmd_server_serve(args) -> int:
    from .server import CentralServer, ServerConfig
    from .server.http import ServerService

    config = ServerConfig.load(args.config)
    svc = ServerService(CentralServer(config), config.host, config.port)
    logging.getLogger(__name__).info("central server listening on %s", svc.url)
    try:
        svc.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_server_report(args) -> int:
    from .server import CentralServer, ServerClient, ServerConfig, format_report_text

    if args.url:
        text = ServerClient(args.url).report_json()
    elif args.config:
        text = CentralServer(ServerConfig.load(args.config)).report_json()
    else:
        print("server report needs --url or --config", file=sys.stderr)
        return 2
    if args.text:
        text = format_report_text(json.loads(text))
    _write(text, args.out)
    return 0


def cmd_sim_run(args) -> int:
    from .sim.harness import CampaignConfig, run_campaign

    d = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    for key in ("seed", "sessions", "mode"):
        value = getattr(args, key)
        if value is not None:
            d[key] = value
    summary = run_campaign(CampaignConfig.from_dict(d), log_path=args.log)
    _write(json.dumps(summary, sort_keys=True, indent=2) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="livinglab", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="component", required=True)

    ingest = sub.add_parser("ingest", help="run-file ingestion").add_subparsers(dest="cmd", required=True)
    p = ingest.add_parser("validate", help="validate a run file against candidate lists")
    p.add_argument("run_file")
    p.add_argument("--candidates")
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.set_defaults(func=cmd_ingest_validate)

    app = sub.add_parser("app", help="site app").add_subparsers(dest="cmd", required=True)
    p = app.add_parser("serve")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_app_serve)
    p = app.add_parser("replay", help="re-emit a log as metrics input")
    p.add_argument("--log", required=True)
    p.add_argument("--out")
    p.add_argument("--scorecards", action="store_true")
    p.set_defaults(func=cmd_app_replay)

    server = sub.add_parser("server", help="central server").add_subparsers(dest="cmd", required=True)
    p = server.add_parser("serve")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_server_serve)
    p = server.add_parser("report")
    p.add_argument("--out", required=True)
    p.add_argument("--url")
    p.add_argument("--config")
    p.add_argument("--text", action="store_true", help="write the plain-text summary")
    p.set_defaults(func=cmd_server_report)

    sim = sub.add_parser("sim", help="simulated users").add_subparsers(dest="cmd", required=True)
    p = sim.add_parser("run")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--sessions", type=int)
    p.add_argument("--mode", choices=("wire", "inproc"))
    p.add_argument("--out")
    p.add_argument("--log", help="also write the app event log here")
    p.set_defaults(func=cmd_sim_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

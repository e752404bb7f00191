"""Operator entry point.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or network failure.
Machine output (JSON/CSV) goes to stdout untouched; diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import api
from .errors import (
    BindFailure,
    CampaignError,
    CorruptLog,
    ScenarioInvalid,
    ServiceUnreachable,
)
from .service import Service
from .simulator import run as run_scenario
from .simulator import validate_scenario


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="campaignd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--bind", default="127.0.0.1:8080",
                       help="host:port to listen on")
    serve.add_argument("--data", default=None,
                       help="data directory (default $CAMPAIGND_DATA; "
                            "omit both for in-memory state)")

    simulate = sub.add_parser("simulate",
                              help="run a scenario and print the run report")
    simulate.add_argument("--scenario", required=True, help="scenario JSON file")
    simulate.add_argument("--target", default=None,
                          help="base URL of a running service; omit to "
                               "simulate against an in-process instance")
    simulate.add_argument("--seed", type=int, default=None,
                          help="override the scenario's seed")
    simulate.add_argument("--data", default=None,
                          help="data directory for the in-process instance")

    stats = sub.add_parser("stats", help="print campaign statistics")
    stats.add_argument("--campaign", action="append", required=True,
                       help="campaign id (repeatable, or comma-separated)")
    stats.add_argument("--target", default=None, help="base URL of a service")
    stats.add_argument("--data", default=None, help="data directory to load")

    export = sub.add_parser("export", help="write measurement data to stdout")
    export.add_argument("--campaign", required=True, help="campaign id")
    export.add_argument("--format", required=True, choices=("json", "csv"))
    export.add_argument("--cell-deg", type=float, default=None,
                        help="emit the heatmap grid at this cell size "
                             "instead of raw readings (JSON only)")
    export.add_argument("--target", default=None, help="base URL of a service")
    export.add_argument("--data", default=None, help="data directory to load")

    validate = sub.add_parser("validate", help="check a scenario file")
    validate.add_argument("--scenario", required=True, help="scenario JSON file")

    return parser


def _data_dir(flag_value):
    return flag_value if flag_value is not None else os.environ.get("CAMPAIGND_DATA")


def _local_service(data_flag) -> Service:
    return Service(_data_dir(data_flag))


def _cmd_serve(args) -> int:
    data = _data_dir(args.data)
    if data is None:
        print("serve: no --data and no CAMPAIGND_DATA; state is in-memory",
              file=sys.stderr)
    try:
        api.serve(args.bind, data)
    except BindFailure as exc:
        print(f"serve: {exc}", file=sys.stderr)
        return 2
    except CorruptLog as exc:
        print(f"serve: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_simulate(args) -> int:
    try:
        scenario = validate_scenario(args.scenario)
        if args.seed is not None:
            scenario = validate_scenario({**scenario.raw, "seed": args.seed})
    except ScenarioInvalid as exc:
        print(f"simulate: invalid scenario: {exc}", file=sys.stderr)
        return 1

    try:
        if args.target:
            import httpx

            with httpx.Client(base_url=args.target, timeout=30.0) as client:
                report = run_scenario(scenario, client)
        else:
            from fastapi.testclient import TestClient

            svc = Service(_data_dir(args.data))
            with TestClient(api.create_app(svc)) as client:
                report = run_scenario(scenario, client)
    except ServiceUnreachable as exc:
        print(f"simulate: service unreachable: {exc}", file=sys.stderr)
        return 2
    except CorruptLog as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 2

    print(json.dumps(report, indent=2))
    return 0


def _campaign_ids(values) -> list:
    ids = []
    for value in values:
        ids.extend(c for c in value.split(",") if c)
    return ids


class _RemoteError(Exception):
    def __init__(self, status: int, body):
        self.status = status
        err = body.get("error", {}) if isinstance(body, dict) else {}
        super().__init__(f"{err.get('code', status)}: {err.get('message', body)}")


def _remote_json(target: str, path: str, params: dict):
    import httpx

    try:
        resp = httpx.get(target.rstrip("/") + path, params=params, timeout=30.0)
    except httpx.HTTPError as exc:
        raise ServiceUnreachable(str(exc)) from exc
    if resp.status_code != 200:
        raise _RemoteError(resp.status_code, resp.json())
    return resp


def _cmd_stats(args) -> int:
    ids = _campaign_ids(args.campaign)
    try:
        if args.target:
            resp = _remote_json(args.target, "/v1/stats",
                                {"campaigns": ",".join(ids)})
            doc = resp.json()
        else:
            doc = _local_service(args.data).stats(ids)
    except (_RemoteError, CampaignError) as exc:
        print(f"stats: {exc}", file=sys.stderr)
        return 1
    except ServiceUnreachable as exc:
        print(f"stats: {exc}", file=sys.stderr)
        return 2
    except CorruptLog as exc:
        print(f"stats: {exc}", file=sys.stderr)
        return 2

    rows = [
        ("Cities", str(doc["cities"])),
        ("Participants", str(doc["participants"])),
        ("Regions", str(doc["regions"])),
        ("Experimentation Days", str(doc["experimentation_days"])),
        ("Measurements", str(doc["measurements"])),
        ("Avg Completion Rate", f"{doc['avg_completion'] * 100:.1f}%"),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value}")
    return 0


def _cmd_export(args) -> int:
    if args.cell_deg is not None and args.format != "json":
        print("export: --cell-deg output is JSON only", file=sys.stderr)
        return 1
    try:
        if args.target:
            if args.cell_deg is not None:
                resp = _remote_json(args.target,
                                    f"/v1/campaigns/{args.campaign}/heatmap",
                                    {"cell_deg": args.cell_deg})
                data = resp.content
            else:
                resp = _remote_json(args.target,
                                    f"/v1/campaigns/{args.campaign}/export",
                                    {"format": args.format})
                data = resp.content
        else:
            svc = _local_service(args.data)
            if args.cell_deg is not None:
                data = json.dumps(svc.heatmap(args.campaign, args.cell_deg),
                                  separators=(",", ":")).encode("utf-8")
            else:
                data = svc.export(args.campaign, args.format)
    except (_RemoteError, CampaignError) as exc:
        print(f"export: {exc}", file=sys.stderr)
        return 1
    except ServiceUnreachable as exc:
        print(f"export: {exc}", file=sys.stderr)
        return 2
    except CorruptLog as exc:
        print(f"export: {exc}", file=sys.stderr)
        return 2

    sys.stdout.buffer.write(data)
    sys.stdout.buffer.flush()
    return 0


def _cmd_validate(args) -> int:
    try:
        scenario = validate_scenario(args.scenario)
    except ScenarioInvalid as exc:
        print(f"validate: {exc}", file=sys.stderr)
        return 1
    print(f"scenario ok: {len(scenario.campaigns)} campaigns, "
          f"{len(scenario.volunteers)} volunteers, "
          f"{scenario.duration_days} days, seed {scenario.seed}")
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "simulate": _cmd_simulate,
    "stats": _cmd_stats,
    "export": _cmd_export,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

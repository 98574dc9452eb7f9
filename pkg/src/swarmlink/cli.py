"""Command-line interface: run, replay, export, list-scenarios."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import run_scenario
from .errors import ConfigError, CorruptLog
from .metrics import compute_metrics, export_metrics, read_log, write_log
from .scenario import bundled_scenario_names, load_scenario, load_scenario_dict


def _add_override_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--latency-ms", type=float, default=None, help="one-way link latency")
    p.add_argument("--jitter-ms", type=float, default=None, help="uniform jitter half-width")
    p.add_argument("--loss", type=float, default=None, help="packet loss rate in [0, 1)")
    p.add_argument("--duration-s", type=float, default=None, help="override run duration")


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "latency_ms": args.latency_ms,
        "jitter_ms": args.jitter_ms,
        "loss": args.loss,
        "duration_s": args.duration_s,
    }


def cmd_run(args) -> int:
    if args.bridge_port is not None:
        from .bridge import serve_bridge

        spec = load_scenario(args.scenario, _overrides(args))
        serve_bridge(
            spec,
            host=args.bridge_host,
            port=args.bridge_port,
            paced=not args.bridge_lockstep,
        )
        return 0
    if args.live:
        from .transport import run_live

        spec = load_scenario(args.scenario, _overrides(args))
        run_live(
            spec,
            role=args.live_role,
            listen_port=args.listen_port,
            peer_host=args.peer_host,
            peer_port=args.peer_port,
        )
        return 0
    records, metrics = run_scenario(args.scenario, _overrides(args))
    if args.out:
        write_log(records, args.out)
        print(f"log: {args.out} ({len(records)} records)")
    print(export_metrics(metrics, "json").decode(), end="")
    return 0


def cmd_replay(args) -> int:
    records = read_log(args.log)
    metrics = compute_metrics(records)
    print(export_metrics(metrics, "json").decode(), end="")
    return 0


def cmd_export(args) -> int:
    records = read_log(args.log)
    metrics = compute_metrics(records)
    data = export_metrics(metrics, args.format)
    if args.out:
        Path(args.out).write_bytes(data)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(data.decode())
    return 0


def cmd_list_scenarios(args) -> int:
    for name in bundled_scenario_names():
        cfg = load_scenario_dict(name)
        print(f"{name:10s} {cfg.get('description', '')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmlink",
        description="Two-room tabletop robot synchronization simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario (bundled name or JSON path)")
    run_p.add_argument("scenario")
    _add_override_flags(run_p)
    run_p.add_argument("--out", default=None, help="write the JSONL log here")
    run_p.add_argument("--live", action="store_true", help="real UDP sockets instead of the simulated link")
    run_p.add_argument("--live-role", choices=("local", "remote"), default="local")
    run_p.add_argument("--listen-port", type=int, default=47800)
    run_p.add_argument("--peer-host", default="127.0.0.1")
    run_p.add_argument("--peer-port", type=int, default=47801)
    run_p.add_argument("--bridge-port", type=int, default=None, help="serve the UI websocket bridge on this port")
    run_p.add_argument("--bridge-host", default="127.0.0.1")
    run_p.add_argument("--bridge-lockstep", action="store_true",
                       help="advance only on client 'advance' messages (testing)")
    run_p.set_defaults(func=cmd_run)

    replay_p = sub.add_parser("replay", help="recompute metrics from a JSONL log")
    replay_p.add_argument("log")
    replay_p.set_defaults(func=cmd_replay)

    export_p = sub.add_parser("export", help="export metrics from a log as CSV/JSON")
    export_p.add_argument("log")
    export_p.add_argument("--format", choices=("csv", "json"), default="csv")
    export_p.add_argument("--out", default=None)
    export_p.set_defaults(func=cmd_export)

    list_p = sub.add_parser("list-scenarios", help="list bundled scenarios")
    list_p.set_defaults(func=cmd_list_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CorruptLog as exc:
        print(f"corrupt log: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

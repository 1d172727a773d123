"""Operator entry point: run experiments, self-verify, replay logs, serve.

Exit codes: 0 success; 1 verification fixture failed; 2 configuration or
log error (the diagnostic names the offending field or line).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .errors import ConfigError, HemsError
from .profiles import Mode, run_experiment
from .replay import CorruptLogLine, replay_file

MODES = [m.value for m in Mode]


def _load_config(path: str | None):
    if path is None:
        return config_mod.default_config()
    return config_mod.load(path)


def _write_report(report, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    machine = out_dir / "report.json"
    human = out_dir / "report.txt"
    machine.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    human.write_text(report.to_table() + "\n")
    return machine, human


def cmd_run(args) -> int:
    try:
        config = _load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        if args.tick_seconds is not None:
            config = replace(config, tick_seconds=args.tick_seconds)
        mode = Mode(args.mode)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / ("offline.log.jsonl" if mode is Mode.OFFLINE
                              else "online.log.jsonl")
        offline_log = None if mode is Mode.OFFLINE else out_dir / "offline.log.jsonl"
        report = run_experiment(config, mode, log_path=log_path,
                                offline_log_path=offline_log)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    machine, human = _write_report(report, out_dir)
    print(report.to_table())
    print(f"\nreport written to {machine} and {human}")
    print(f"record log: {log_path}")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_verification

    results = run_verification(quick=args.quick)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        if not ok:
            failed += 1
    print(f"\n{len(results) - failed}/{len(results)} fixtures passed")
    return 0 if failed == 0 else 1


def cmd_replay(args) -> int:
    try:
        summary = replay_file(args.log)
    except FileNotFoundError:
        print(f"log error: cannot read {args.log}", file=sys.stderr)
        return 2
    except CorruptLogLine as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return 2
    print(f"run: {summary.header.get('config_name', '?')} "
          f"mode={summary.header.get('mode', '?')} seed={summary.header.get('seed', '?')}")
    print(f"replayed {summary.reading_lines} readings, {summary.command_lines} commands\n")
    print(f"{'appliance':20s} {'state':8s} {'kWh cumulative':>15s}")
    for name, kwh in summary.final_kwh.items():
        print(f"{name:20s} {summary.switch_states.get(name, 'unknown'):8s} {kwh:15.6f}")
    print(f"{'TOTAL':20s} {'':8s} {summary.total_kwh:15.6f}")
    if args.csv_dir:
        csv_dir = Path(args.csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        for name in summary.final_kwh:
            path = csv_dir / f"{name}.csv"
            path.write_text(summary.center.export_csv(name))
        print(f"\nper-appliance CSV written to {csv_dir}/")
    return 0


def cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError:  # pragma: no cover
        print("serve needs uvicorn installed", file=sys.stderr)
        return 2
    from .engine import LiveRunner, Simulation
    from .gateway import create_app

    try:
        config = _load_config(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
        if args.tick_seconds is not None:
            config = replace(config, tick_seconds=args.tick_seconds)
        mode = Mode(args.mode)
        if mode is Mode.ONLINE_CALIBRATED:
            config = config.with_trimmed_usage()
        host, _, port = args.listen.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError("--listen", f"expected HOST:PORT, got {args.listen!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    log_file = open(args.log, "w") if args.log else None
    sim = Simulation(config, policies_active=(mode is Mode.ONLINE_EMERGENT),
                     log_file=log_file, mode_label=mode.value)
    runner = LiveRunner(sim, speedup=args.speedup)
    app = create_app(sim, runner)
    runner.start()
    print(f"simulated home on http://{args.listen} "
          f"(mode={mode.value}, speedup=x{args.speedup:g})")
    print(f"read token: {config.gateway.read_token}  "
          f"control token: {config.gateway.control_token}")
    try:
        uvicorn.run(app, host=host, port=int(port), log_level="warning")
    finally:
        runner.stop()
        if log_file:
            log_file.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hems",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the weekly experiment and write reports")
    run_p.add_argument("--config", help="experiment YAML (default: the shipped bench fixture)")
    run_p.add_argument("--mode", choices=MODES, default=Mode.OFFLINE.value)
    run_p.add_argument("--seed", type=int, help="override the config seed")
    run_p.add_argument("--tick-seconds", type=float, help="override the virtual tick length")
    run_p.add_argument("--out", default="hems-out", help="output directory (default: hems-out)")
    run_p.set_defaults(func=cmd_run)

    verify_p = sub.add_parser("verify", help="run the built-in acceptance fixtures")
    verify_p.add_argument("--quick", action="store_true",
                          help="skip the full-week reproduction fixtures")
    verify_p.set_defaults(func=cmd_verify)

    replay_p = sub.add_parser("replay", help="rebuild final state from a record log")
    replay_p.add_argument("log", help="path to a run's .log.jsonl")
    replay_p.add_argument("--csv-dir", help="also export per-appliance CSV here")
    replay_p.set_defaults(func=cmd_replay)

    serve_p = sub.add_parser("serve", help="run the live home with the HTTP gateway")
    serve_p.add_argument("--config", help="experiment YAML (default: the shipped bench fixture)")
    serve_p.add_argument("--listen", default="127.0.0.1:8776", help="HOST:PORT to bind")
    serve_p.add_argument("--mode", choices=MODES, default=Mode.OFFLINE.value)
    serve_p.add_argument("--seed", type=int)
    serve_p.add_argument("--tick-seconds", type=float)
    serve_p.add_argument("--speedup", type=float, default=1.0,
                         help="simulated seconds per wall second")
    serve_p.add_argument("--log", help="persist the live record log to this path")
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HemsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

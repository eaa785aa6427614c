"""
cli.py – Command-line entry point.

  simulate     truth CSV + sensor JSONL from a run configuration
  estimate     one estimator over a sensor log → trajectory CSV
  evaluate     truth + trajectories → report CSV/JSON and per-timestep errors
  run-all      the full multi-run protocol with every estimator
  experiment   amplification | convergence | clutter

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from config import REFERENCE_RUNS, RunConfig, config_hash, load_run_config
from error_handling import EXIT_OK, ConfigError, handle_error
from estimators import ESTIMATORS, run_estimator
from evaluation import build_report, canonical_name, error_table, format_report, order_estimators, position_errors
from experiments import (
    ALL_ESTIMATORS,
    amplification_sweep,
    clutter_comparison,
    convergence_trials,
    run_protocol,
)
from logger import get_logger, setup_logger
from records import (
    Header,
    read_sensors,
    read_trajectory,
    read_truth,
    write_errors_csv,
    write_json,
    write_report_csv,
    write_report_json,
    write_sensors,
    write_trajectory,
    write_truth,
)
from sim import generate_truth, simulate_sensors

log = get_logger("cli")

DEFAULT_CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "reference.json")


def _header(cfg: RunConfig, kind: str) -> Header:
    return Header(config_hash(cfg), cfg.seed, kind)


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir)


# ── Subcommands ──────────────────────────────────────────────────────────────

def cmd_simulate(cfg: RunConfig) -> List[Path]:
    out = _out_dir(cfg)
    truth = generate_truth(cfg.trajectory, cfg.vehicle, cfg.timing.tick)
    frames = simulate_sensors(truth, cfg.map, cfg.vehicle, cfg.noise, cfg.seed, cfg.timing)
    paths = [out / "truth.csv", out / "sensors.jsonl"]
    write_truth(paths[0], truth, _header(cfg, "truth"))
    write_sensors(paths[1], frames, _header(cfg, "sensors"))
    print(f"simulated {truth[-1].t:.2f} s: {len(truth)} truth samples, {len(frames)} sensor frames")
    return paths


def cmd_estimate(cfg: RunConfig, sensors: str, estimator: str) -> Path:
    frames = read_sensors(sensors)
    rows = run_estimator(estimator, frames, cfg)
    path = _out_dir(cfg) / f"trajectory_{estimator}.csv"
    write_trajectory(path, rows, _header(cfg, f"trajectory_{estimator}"))
    print(f"{estimator}: {len(rows)} estimates")
    return path


def _parse_named(items: Sequence[str]) -> Dict[str, str]:
    named: Dict[str, str] = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"--trajectory expects NAME=PATH, got {item!r}", "trajectory")
        named[canonical_name(name)] = path
    return named


def cmd_evaluate(cfg: RunConfig, truth_path: str, trajectories: Sequence[str]) -> List[Path]:
    truth = read_truth(truth_path)
    named = _parse_named(trajectories)
    errors = {}
    timed = {}
    for name, path in named.items():
        rows = read_trajectory(path)
        errs = position_errors(rows, truth)
        errors[name] = errs
        timed[name] = ([r.t for r in rows], list(errs))
    report = build_report([errors])
    out = _out_dir(cfg)
    paths = [out / "report.csv", out / "report.json", out / "errors.csv"]
    write_report_csv(paths[0], report, _header(cfg, "report"))
    write_report_json(paths[1], report, _header(cfg, "report"))
    names, rows = error_table(timed)
    write_errors_csv(paths[2], names, rows, _header(cfg, "errors"))
    print(format_report(report))
    return paths


def cmd_run_all(cfg: RunConfig, runs: int) -> List[Path]:
    result = run_protocol(cfg, runs, ALL_ESTIMATORS)
    out = _out_dir(cfg)
    paths = []
    for k, outcome in enumerate(result.outcomes, start=1):
        run_cfg = cfg.with_seed(outcome.seed)
        run_dir = out / f"run_{k}"
        write_truth(run_dir / "truth.csv", outcome.truth, _header(run_cfg, "truth"))
        write_sensors(run_dir / "sensors.jsonl", outcome.frames, _header(run_cfg, "sensors"))
        for name, rows in outcome.trajectories.items():
            write_trajectory(run_dir / f"trajectory_{name}.csv", rows,
                             _header(run_cfg, f"trajectory_{name}"))
        names, error_rows = error_table({
            name: ([r.t for r in outcome.trajectories[name]], list(outcome.errors[name]))
            for name in order_estimators(list(outcome.errors))
        })
        write_errors_csv(run_dir / "errors.csv", names, error_rows, _header(run_cfg, "errors"))
    paths += [out / "report.csv", out / "report.json"]
    write_report_csv(paths[0], result.report, _header(cfg, "report"))
    write_report_json(paths[1], result.report, _header(cfg, "report"))
    print(format_report(result.report))
    return paths


EXPERIMENTS = {
    "amplification": amplification_sweep,
    "convergence": convergence_trials,
    "clutter": clutter_comparison,
}


def cmd_experiment(cfg: RunConfig, name: str) -> Path:
    result = EXPERIMENTS[name](cfg)
    path = _out_dir(cfg) / f"experiment_{name}.json"
    write_json(path, result.to_dict(), _header(cfg, f"experiment_{name}"))
    print(result.summary())
    return path


# ── Argument parsing ─────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG, help="run configuration JSON")
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--out", default=None, help="output directory")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")

    parser = argparse.ArgumentParser(
        prog="lgv_localization",
        description="Reflector particle-filter localization for laser-guided vehicles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="write truth.csv and sensors.jsonl")

    p = sub.add_parser("estimate", parents=[common], help="run one estimator over a sensor log")
    p.add_argument("--sensors", required=True, help="sensor JSONL log")
    p.add_argument("--estimator", required=True, choices=sorted(ESTIMATORS))

    p = sub.add_parser("evaluate", parents=[common], help="score trajectories against truth")
    p.add_argument("--truth", required=True, help="truth CSV")
    p.add_argument("--trajectory", action="append", required=True, metavar="NAME=PATH",
                   help="estimated trajectory CSV; repeat per estimator")

    p = sub.add_parser("run-all", parents=[common], help="full multi-run protocol")
    p.add_argument("--runs", type=int, default=REFERENCE_RUNS, help="number of seeded runs")

    p = sub.add_parser("experiment", parents=[common], help="acceptance experiments")
    p.add_argument("name", choices=sorted(EXPERIMENTS))

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logger(level=level)

    try:
        cfg = load_run_config(args.config, seed=args.seed, output_dir=args.out)
        log.info("loaded %s (config_hash=%s, seed=%d)", args.config, config_hash(cfg), cfg.seed)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "estimate":
            cmd_estimate(cfg, args.sensors, args.estimator)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.truth, args.trajectory)
        elif args.command == "run-all":
            cmd_run_all(cfg, args.runs)
        else:
            cmd_experiment(cfg, args.name)
    except Exception as exc:  # noqa: BLE001
        return handle_error(exc, args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    parkmpc run <scenario.json | dir> [--out DIR] [--plots] [--override key=value ...]
    parkmpc validate <scenario.json>

Exit codes: 0 ok, 2 configuration error, 3 simulation failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .output import write_metrics_json, write_trace_csv
from .plotting import path_figure, speed_figure, steering_figure
from .scenario import load_scenario
from .sim import compute_metrics, run_closed_loop

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIM = 3
EXIT_IO = 4

log = logging.getLogger("parkmpc")


@dataclass
class RunConfig:
    scenario_path: Path
    output_dir: Path = Path("out")
    emit_plots: bool = False
    seed_overrides: list = field(default_factory=list)


def _fail(code, reason):
    print(f"error: {reason}", file=sys.stderr)
    return code


def run(config: RunConfig) -> int:
    try:
        scenario, _ = load_scenario(config.scenario_path, config.seed_overrides)
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except ConfigurationError as exc:
        return _fail(EXIT_CONFIG, f"invalid scenario: {exc}")
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read scenario: {exc}")

    result = run_closed_loop(scenario)
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(result, out / "trace.csv")
        if result.samples:
            metrics = compute_metrics(result, scenario.trajectory)
            write_metrics_json(metrics, result, out / "metrics.json")
            if config.emit_plots:
                (out / "path.svg").write_text(path_figure(result, scenario.trajectory))
                (out / "steering.svg").write_text(steering_figure(result))
                (out / "speed.svg").write_text(speed_figure(result))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write outputs to {out}: {exc}")

    if result.failed:
        return _fail(EXIT_SIM, f"simulation failed at {result.error}")
    log.info("%s: %d samples, goal %s", config.scenario_path, len(result.samples),
             "reached" if result.reached_goal else "not reached")
    return EXIT_OK


def validate(config: RunConfig) -> int:
    try:
        _, echo = load_scenario(config.scenario_path, config.seed_overrides)
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except ConfigurationError as exc:
        print("error: invalid scenario", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read scenario: {exc}")
    print(json.dumps(echo, indent=2, sort_keys=True))
    return EXIT_OK


def _run_one(args):
    return run(RunConfig(*args))


def run_directory(config: RunConfig, workers=None) -> int:
    files = sorted(Path(config.scenario_path).glob("*.json"))
    if not files:
        return _fail(EXIT_CONFIG, f"scenario not found: no *.json in {config.scenario_path}")
    jobs = [(f, Path(config.output_dir) / f.stem, config.emit_plots, list(config.seed_overrides)) for f in files]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(_run_one, jobs))
    return max(codes)


def build_parser():
    parser = argparse.ArgumentParser(prog="parkmpc", description="Kinematic MPC path-tracking simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write trace/metrics/plots")
    p_run.add_argument("scenario", type=Path, help="scenario JSON file, or a directory of them")
    p_run.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p_run.add_argument("--plots", action="store_true", help="also write path/steering/speed SVGs")
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-path override, e.g. mpc.r_w=5.0 (repeatable)")
    p_run.add_argument("--workers", type=int, default=None, help="parallel workers for a scenario directory")

    p_val = sub.add_parser("validate", help="check a scenario without running it")
    p_val.add_argument("scenario", type=Path)
    p_val.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "validate":
        return validate(RunConfig(args.scenario, seed_overrides=args.override))
    config = RunConfig(args.scenario, args.out, args.plots, args.override)
    if args.scenario.is_dir():
        return run_directory(config, args.workers)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())

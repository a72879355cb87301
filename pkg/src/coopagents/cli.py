"""Command line entry point: one run, or a named suite of runs."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .blackboard import SyncMode
from .generators import generate_level
from .nav import Exploration
from .runner import InvariantViolation, RunConfig, run
from .suites import SUITES, ExperimentSpec, parse_agents, run_suite
from .world import LevelError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_INTERNAL = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coopagents",
        description="Simulate cooperating test agents on button/door levels.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--level", metavar="FILE", help="LEVEL v1 text file")
    src.add_argument("--gen", metavar="SPEC",
                     help="generated level, e.g. basic:3 or basic:3+chained:2")
    p.add_argument("--agents", default="random",
                   help="team, e.g. high:5,low:5 or eager*3 or explorer@budget:50")
    p.add_argument("--sync", choices=[m.value for m in SyncMode], default="basic")
    p.add_argument("--view", type=int, default=6, help="view radius in cells")
    p.add_argument("--budget", type=int, default=20_000, help="global tick budget")
    p.add_argument("--task-budget", type=int, default=None,
                   help="ticks per task attempt (default 400 x scale)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--explore", default=None,
                   help="exploration policy for every agent: gradual, aggressive, budget:N")
    p.add_argument("--sync-every", type=int, default=1)
    p.add_argument("--sync-tax", type=int, default=0)
    p.add_argument("--suite", choices=sorted(SUITES), default=None)
    p.add_argument("--axis", default=None,
                   help="axis values, comma separated (';' when values contain commas)")
    p.add_argument("--seeds", default=None, help="base seeds for a suite, e.g. 0,1,2")
    p.add_argument("--reps", type=int, default=3, help="repetitions per seed in a suite")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    return p


def split_axis(text: str) -> tuple[str, ...]:
    sep = ";" if ";" in text else ","
    return tuple(v.strip() for v in text.split(sep) if v.strip())


def _config(args: argparse.Namespace, level: str) -> RunConfig:
    team = parse_agents(args.agents)
    if args.explore is not None:
        policy = Exploration.parse(args.explore)
        team = tuple(replace(a, explore=policy) for a in team)
    return RunConfig(
        level=level, agents=team, sync_mode=SyncMode(args.sync),
        view_distance=args.view, global_budget=args.budget,
        per_task_budget=args.task_budget, seed=args.seed,
        sync_every=args.sync_every, sync_tax=args.sync_tax)


def _single(args: argparse.Namespace, level: str) -> int:
    config = _config(args, level)
    config.resolve_level()  # surface level errors before simulating
    report = run(config)
    sys.stdout.write(report.summary())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "run.csv").write_text(report.csv_text())
        (args.out / "audit.log").write_text(report.audit)
    return EXIT_OK


def _suite(args: argparse.Namespace, level: str | None) -> int:
    suite = SUITES[args.suite]
    level = level or suite.default_level or "basic:1"
    seeds = tuple(int(s) for s in args.seeds.split(",")) if args.seeds else (args.seed,)
    spec = ExperimentSpec(args.suite, _config(args, level),
                          split_axis(args.axis) if args.axis else (), args.reps, seeds)
    result = run_suite(spec, args.out,
                       progress=lambda line: print(line, file=sys.stderr))
    sys.stdout.write(result.table())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    level = args.gen or args.level
    if args.suite is None and level is None:
        parser.print_usage(sys.stderr)
        print("coopagents: error: one of --level or --gen is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.gen is not None:
            generate_level(args.gen, args.seed)  # reject bad specs early
        if args.suite is None:
            return _single(args, level)
        return _suite(args, level)
    except InvariantViolation as e:
        print(f"coopagents: internal error: {e}", file=sys.stderr)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "audit.log").write_text(e.audit)
            print(f"audit log written to {args.out / 'audit.log'}", file=sys.stderr)
        else:
            sys.stderr.write(e.audit)
        return EXIT_INTERNAL
    except (LevelError, ValueError, OSError) as e:
        print(f"coopagents: error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

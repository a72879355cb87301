"""Named experiment suites: sweeps of one axis over a few team configurations.

Every axis point and configuration runs on the same list of run seeds, so
columns of the aggregate table are compared on identical levels.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .agent import SelectHeuristic
from .blackboard import SyncMode
from .nav import Exploration
from .runner import AgentSpec, MetricsReport, RunConfig, run

SEED_STRIDE = 1000


def parse_agents(text: str) -> tuple[AgentSpec, ...]:
    """Parse a team such as ``high:5,low:5``, ``eager*3`` or ``explorer@budget:50``."""
    team: list[AgentSpec] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise ValueError(f"empty agent in {text!r}")
        count = 1
        if "*" in item:
            item, _, n = item.rpartition("*")
            if not n.isdigit() or int(n) < 1:
                raise ValueError(f"bad agent count in {text!r}")
            count = int(n)
        explore = Exploration()
        if "@" in item:
            item, _, pol = item.partition("@")
            explore = Exploration.parse(pol)
        team += [AgentSpec(SelectHeuristic.parse(item), explore=explore)] * count
    return tuple(team)


def format_agents(team: Sequence[AgentSpec]) -> str:
    return ",".join(str(a) for a in team)


CONFIGS: dict[str, tuple[str, SyncMode]] = {
    "Single": ("random", SyncMode.BASIC),
    "MA-Basic": ("high:5,low:5", SyncMode.BASIC),
    "MA-Extended": ("high:5,low:5", SyncMode.EXTENDED),
    "MA-Eager": ("eager*2", SyncMode.EXTENDED),
}
STANDARD = ("Single", "MA-Basic", "MA-Extended")


def with_config(base: RunConfig, name: str) -> RunConfig:
    agents, mode = CONFIGS[name]
    return replace(base, agents=parse_agents(agents), sync_mode=mode)


def _variant(kind: str) -> Callable[[RunConfig, str, str], RunConfig]:
    def build(base: RunConfig, value: str, config: str) -> RunConfig:
        level = base.level if int(value) == 0 else f"{base.level}+{kind}:{int(value)}"
        return with_config(replace(base, level=level), config)
    return build


def _size(base: RunConfig, value: str, config: str) -> RunConfig:
    return with_config(replace(base, level=f"basic:{int(value)}"), config)


def _view(base: RunConfig, value: str, config: str) -> RunConfig:
    return with_config(replace(base, view_distance=int(value)), config)


def _team(base: RunConfig, value: str, config: str) -> RunConfig:
    return replace(base, agents=parse_agents(value))


def _count(base: RunConfig, value: str, config: str) -> RunConfig:
    return replace(base, agents=parse_agents(f"eager*{int(value)}"), sync_mode=SyncMode.EXTENDED)


def _as_is(base: RunConfig, value: str, config: str) -> RunConfig:
    return base


@dataclass(frozen=True)
class Suite:
    name: str
    axis_name: str
    default_axis: tuple[str, ...]
    configs: tuple[str, ...]
    build: Callable[[RunConfig, str, str], RunConfig]
    default_level: str | None


SUITES: dict[str, Suite] = {s.name: s for s in [
    Suite("size-sweep", "scale", tuple(str(i) for i in range(1, 11)), STANDARD, _size, None),
    Suite("sync-compare", "scale", ("2", "4", "6", "8", "10"), ("MA-Basic", "MA-Extended"),
          _size, None),
    Suite("team-compose", "team", ("high:5,low:5", "explorer,low:5,high:5", "eager*2"),
          ("team",), _team, "basic:10"),
    Suite("view-distance", "view", ("4", "6", "8", "10", "12"), STANDARD, _view, "basic:10"),
    Suite("distant", "dc", ("0", "2", "4", "6", "8", "10"), STANDARD, _variant("distant"),
          "basic:3"),
    Suite("chained", "hb", ("0", "1", "2", "3"), STANDARD, _variant("chained"), "basic:3"),
    Suite("multi-connection", "mc", ("0", "2", "4", "6", "8", "10"), STANDARD,
          _variant("multi"), "basic:3"),
    Suite("agents-count", "agents", ("1", "2", "3", "4", "5"), ("MA-Eager",), _count,
          "basic:10"),
    Suite("single-run", "-", ("-",), ("run",), _as_is, None),
]}


@dataclass(frozen=True)
class ExperimentSpec:
    suite: str
    base: RunConfig
    axis: tuple[str, ...] = ()
    repetitions: int = 3
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}")
        if not self.axis:
            object.__setattr__(self, "axis", SUITES[self.suite].default_axis)
        if not self.axis:
            raise ValueError("axis must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def run_seeds(self) -> list[int]:
        return [s * SEED_STRIDE + r for s in self.seeds for r in range(self.repetitions)]

    def configs(self) -> tuple[str, ...]:
        return SUITES[self.suite].configs

    def config_for(self, value: str, config: str, seed: int) -> RunConfig:
        return replace(SUITES[self.suite].build(self.base, value, config), seed=seed)


def half_points(report: MetricsReport) -> int:
    return math.ceil(report.total_points / 2)


def ticks_to_half(report: MetricsReport) -> int:
    t = report.ticks_to_points(half_points(report))
    return report.budget if t is None else t


@dataclass
class RunRecord:
    axis: str
    config: str
    seed: int
    makespan: int
    ticks_to_half: int
    final_points: int
    accidental: int
    finished: bool


AGG_HEADER = ["axis", "config", "runs", "makespan", "ticks_to_half", "final_points",
              "accidental", "dnf"]


@dataclass
class SuiteResult:
    spec: ExperimentSpec
    records: list[RunRecord] = field(default_factory=list)
    complete: bool = False

    def cell(self, axis: str, config: str) -> list[RunRecord]:
        return [r for r in self.records if r.axis == axis and r.config == config]

    def mean(self, axis: str, config: str, attr: str = "makespan", seed: int | None = None) -> float:
        """Mean of ``attr`` over the runs of one cell, optionally restricted
        to the repetitions of one base ``seed``."""
        rows = self.cell(axis, config)
        if seed is not None:
            rows = [r for r in rows if r.seed // SEED_STRIDE == seed]
        if not rows:
            raise KeyError((axis, config, seed))
        return sum(getattr(r, attr) for r in rows) / len(rows)

    def aggregate_rows(self) -> list[list[str]]:
        out = []
        for axis in self.spec.axis:
            for config in self.spec.configs():
                rows = self.cell(axis, config)
                if not rows:
                    continue
                n = len(rows)
                out.append([axis, config, str(n)] + [
                    f"{sum(getattr(r, a) for r in rows) / n:.3f}"
                    for a in ("makespan", "ticks_to_half", "final_points", "accidental")
                ] + [str(sum(not r.finished for r in rows))])
        return out

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGG_HEADER)
        w.writerows(self.aggregate_rows())
        return buf.getvalue()

    def table(self) -> str:
        """Mean makespan per axis point (rows) and configuration (columns)."""
        configs = self.spec.configs()
        head = [SUITES[self.spec.suite].axis_name] + list(configs)
        lines = [head]
        for axis in self.spec.axis:
            row = [axis]
            for c in configs:
                row.append(f"{self.mean(axis, c):.1f}" if self.cell(axis, c) else "-")
            lines.append(row)
        widths = [max(len(r[i]) for r in lines) for i in range(len(head))]
        return "".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) + "\n" for r in lines)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.:" else "_" for c in name).replace(":", "-")


def run_suite(spec: ExperimentSpec, out: Path | None = None,
              progress: Callable[[str], None] | None = None) -> SuiteResult:
    """Run every (axis value, configuration, seed) combination.

    With ``out`` set, writes ``<out>/<suite>/<axis>/<config>/run<k>.csv`` per
    run and ``<out>/<suite>/aggregate.csv``.  A failing run stops the suite;
    the aggregate of the runs finished so far is still written.
    """
    result = SuiteResult(spec)
    root = out / spec.suite if out is not None else None
    try:
        for axis in spec.axis:
            for config in spec.configs():
                for k, seed in enumerate(spec.run_seeds()):
                    cfg = spec.config_for(axis, config, seed)
                    report = run(cfg)
                    result.records.append(RunRecord(
                        axis, config, seed, report.makespan, ticks_to_half(report),
                        report.final_points, report.accidental_count, report.finished))
                    if root is not None:
                        path = root / _safe(axis) / _safe(config) / f"run{k}.csv"
                        path.parent.mkdir(parents=True, exist_ok=True)
                        path.write_text(report.csv_text())
                    if progress is not None:
                        progress(f"{spec.suite} {axis} {config} seed={seed} "
                                 f"makespan={report.makespan}")
        result.complete = True
    finally:
        if root is not None:
            root.mkdir(parents=True, exist_ok=True)
            (root / "aggregate.csv").write_text(result.aggregate_csv())
    return result

"""Deterministic tick loop driving N agents against one world.

Per tick each agent, in id order, observes, updates its belief, and applies
one primitive action.  Synchronisation runs after all agents have acted.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from pathlib import Path

from .agent import (
    AgentProgram,
    FindHeuristic,
    Interact,
    Move,
    Phase,
    SelectHeuristic,
)
from .blackboard import Blackboard, BlackboardError, SyncMode, sync
from .generators import generate_level
from .nav import AgentBelief, Exploration
from .tasks import make_tasks
from .world import Direction, InteractResult, Level, WorldState, load_level


class InvariantViolation(RuntimeError):
    """Internal consistency failure; carries the audit log for diagnosis."""

    def __init__(self, message: str, audit: str = ""):
        super().__init__(message)
        self.audit = audit


@dataclass(frozen=True)
class AgentSpec:
    select: SelectHeuristic = SelectHeuristic()
    find: FindHeuristic = FindHeuristic()
    explore: Exploration = Exploration()

    def __str__(self) -> str:
        s = str(self.select)
        if self.explore != Exploration():
            s += f"@{self.explore}"
        return s


@dataclass(frozen=True)
class RunConfig:
    level: str  # generator spec like "basic:3+distant:2", or a level file path
    agents: tuple[AgentSpec, ...] = (AgentSpec(),)
    sync_mode: SyncMode = SyncMode.BASIC
    view_distance: int = 6
    global_budget: int = 20_000
    per_task_budget: int | None = None
    seed: int = 0
    sync_every: int = 1
    sync_tax: int = 0

    def __post_init__(self):
        if not self.agents:
            raise ValueError("at least one agent is required")
        if self.global_budget <= 0 or (self.per_task_budget is not None and self.per_task_budget <= 0):
            raise ValueError("budgets must be positive")
        if self.view_distance < 1:
            raise ValueError("view distance must be >= 1")
        if self.sync_every < 1 or self.sync_tax < 0:
            raise ValueError("bad sync cadence")

    def resolve_level(self) -> Level:
        if self.level.startswith("basic:"):
            return generate_level(self.level, self.seed)
        return load_level(Path(self.level).read_text())

    def task_budget(self, level: Level) -> int:
        if self.per_task_budget is not None:
            return self.per_task_budget
        scale = max(1, round(max(level.width, level.height) / 10) - 1)
        if self.level.startswith("basic:"):
            scale = int(self.level.split("+")[0].split(":")[1])
        return 400 * scale


@dataclass
class MetricsReport:
    total_ticks_to_all_done: int | None
    points_timeline: list[tuple[int, int]] = field(default_factory=list)
    per_task: dict[str, tuple[int, str, bool]] = field(default_factory=dict)
    exploration_coverage: float = 0.0
    interactions: int = 0
    accidental_count: int = 0
    ticks: int = 0
    budget: int = 0
    termination: str = ""
    total_tasks: int = 0
    total_points: int = 0
    unfinished: list[str] = field(default_factory=list)
    soundness_violations: int = 0
    rows: list[tuple] = field(default_factory=list)
    audit: str = ""
    final_world: WorldState | None = field(default=None, repr=False, compare=False)

    @property
    def finished(self) -> bool:
        return self.total_ticks_to_all_done is not None

    @property
    def makespan(self) -> int:
        """Ticks to finish every task; the whole budget for unfinished runs."""
        return self.total_ticks_to_all_done if self.finished else self.budget

    @property
    def final_points(self) -> int:
        return self.points_timeline[-1][1] if self.points_timeline else 0

    def ticks_to_points(self, points: int) -> int | None:
        for t, p in self.points_timeline:
            if p >= points:
                return t
        return None

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tick", "event", "agent", "task", "points_cum", "detail"])
        w.writerows(self.rows)
        return buf.getvalue()

    def summary(self) -> str:
        done = self.total_ticks_to_all_done
        fields = [
            ("total_ticks_to_all_done", "dnf" if done is None else done),
            ("points_timeline", " ".join(f"{t}:{p}" for t, p in self.points_timeline)),
            ("per_task", " ".join(f"{k}@{t}/{a}{'/acc' if acc else ''}"
                                  for k, (t, a, acc) in self.per_task.items())),
            ("exploration_coverage", f"{self.exploration_coverage:.4f}"),
            ("interactions", self.interactions),
            ("accidental_count", self.accidental_count),
            ("ticks", self.ticks),
            ("termination", self.termination),
            ("final_points", self.final_points),
            ("unfinished", " ".join(self.unfinished)),
        ]
        return "".join(f"{k}: {v}\n" for k, v in fields)


def record_points(report: MetricsReport, tick: int, value: int) -> MetricsReport:
    """Credit ``value`` points at ``tick``; same-tick credits share one entry."""
    tl = report.points_timeline
    cum = (tl[-1][1] if tl else 0) + value
    if tl and tl[-1][0] == tick:
        tl[-1] = (tick, cum)
    elif tl and tl[-1][0] > tick:
        raise ValueError("points timeline must be non-decreasing in time")
    else:
        tl.append((tick, cum))
    return report


def agent_ids(n: int) -> list[str]:
    return [f"a{i}" for i in range(n)]


def run(config: RunConfig, level: Level | None = None) -> MetricsReport:
    """Simulate one run.  Raises InvariantViolation, with the audit log so
    far, when the agents or the blackboard reach an inconsistent state."""
    level = level or config.resolve_level()
    tasks = make_tasks(level, config.task_budget(level))
    bb = Blackboard(tasks, config.sync_mode)
    try:
        return _simulate(config, level, tasks, bb)
    except BlackboardError as e:
        raise InvariantViolation(str(e), bb.export_audit()) from e


def _simulate(config: RunConfig, level: Level, tasks: dict, bb: Blackboard) -> MetricsReport:
    ids = agent_ids(len(config.agents))
    state = WorldState.initial(level, ids)
    beliefs = {a: AgentBelief.empty(a, level.width, level.height) for a in ids}
    programs = {
        a: AgentProgram(a, spec.select, spec.find, spec.explore, beliefs[a], bb,
                        random.Random(f"{config.seed}:{a}"))
        for a, spec in zip(ids, config.agents)
    }
    report = MetricsReport(None, budget=config.global_budget, total_tasks=len(tasks),
                           total_points=sum(t.value for t in tasks.values()))
    done_seen: set[str] = set()

    def credit(tick: int) -> None:
        for tid, rec in bb.done.items():
            if tid in done_seen:
                continue
            done_seen.add(tid)
            task = tasks[tid]
            if not state.door_open[task.target]:
                report.soundness_violations += 1
            record_points(report, tick, task.value)
            report.per_task[tid] = (rec.tick, rec.agent, rec.accidental)
            report.accidental_count += rec.accidental
            report.rows.append((tick, "complete", rec.agent, tid, report.final_points,
                                "accidental" if rec.accidental else ""))

    claims_seen: dict[str, str] = {}

    def note_claims(tick: int) -> None:
        cur = {t: c.agent for t, c in bb.claims.items()}
        for t, a in claims_seen.items():
            if cur.get(t) != a and t not in bb.done:
                report.rows.append((tick, "release", a, t, report.final_points, ""))
        for t, a in cur.items():
            if claims_seen.get(t) != a:
                report.rows.append((tick, "claim", a, t, report.final_points, ""))
        claims_seen.clear()
        claims_seen.update(cur)

    termination = "budget"
    tick = 0
    for tick in range(config.global_budget):
        state.tick = tick
        bb.tick = tick
        for a in ids:
            prog = programs[a]
            obs = state.observe(a, config.view_distance)
            prog.perceive(obs)
            credit(tick)
            if bb.all_done:
                break
            act = prog.step(state.agent_pos[a], obs, tick)
            if isinstance(act, Move):
                moved = state.move(a, act.direction)
                bb.log("move", a, "", f"{act.direction.name}{'' if moved else '!'}")
                prog.on_move(moved)
            elif isinstance(act, Interact):
                res = state.interact(a, act.obj)
                bb.log("interact", a, act.obj, res.value)
                if res is InteractResult.OK:
                    report.interactions += 1
                    bb.note_doors(state.door_vector())
                prog.on_interact(res)
            note_claims(tick)
        note_claims(tick)
        if bb.all_done:
            report.total_ticks_to_all_done = tick + 1
            termination = "all-done"
            break
        if (tick + 1) % config.sync_every == 0 and config.sync_mode is SyncMode.EXTENDED \
                and len(ids) > 1:
            sync(beliefs, config.sync_mode)
            if config.sync_tax:
                for p in programs.values():
                    p.stall += config.sync_tax
        if all(p.phase is Phase.DONE for p in programs.values()):
            termination = "agents-done"
            break
        bb.check_partition()

    report.ticks = tick + 1
    for p in programs.values():
        p.shutdown()
    note_claims(tick)
    if bb.locks:
        raise InvariantViolation(f"leaked locks {bb.locks}", bb.export_audit())
    report.termination = termination
    report.unfinished = [t for t in tasks if t not in bb.done]
    known = None
    for b in beliefs.values():
        known = b.known != 0 if known is None else known | (b.known != 0)
    open_cells = ~level.wall_grid
    report.exploration_coverage = float((known & open_cells).sum() / open_cells.sum())
    report.rows.append((report.ticks, "end", "", "", report.final_points,
                        f"termination={termination};makespan={report.makespan};"
                        f"total_points={report.total_points}"))
    report.audit = bb.export_audit()
    report.final_world = state
    return report


def replay(level: Level, n_agents: int, audit: str) -> WorldState:
    """Re-apply the world actions of an audit log to a fresh world."""
    ids = agent_ids(n_agents)
    state = WorldState.initial(level, ids)
    for line in audit.splitlines():
        tick, event, agent, subject, extra = line.split(",", 4)
        state.tick = int(tick)
        if event == "move":
            state.move(agent, Direction[extra.rstrip("!")])
        elif event == "interact":
            state.interact(agent, subject)
    return state


def write_run(report: MetricsReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.csv_text())

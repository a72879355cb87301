"""Per-agent testing logic.

The solver, its dynamic-goal sub-procedure and task finding are written as a
resumable state machine: :meth:`AgentProgram.step` is called once per tick
and returns exactly one primitive action.  Phase changes that need no action
are chained within the same call.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable, Mapping

from .blackboard import Blackboard, BlackboardError
from .nav import (
    AgentBelief,
    Exploration,
    ExplorePolicy,
    approach_path,
    distances_from,
    explore_path,
    find_path,
    has_reachable_frontier,
    update_belief,
)
from .tasks import TestingTask
from .world import CODE_DOOR, Direction, InteractResult, Observation, Pos, natural_key

__all__ = [
    "SelectHeuristic", "FindHeuristic", "AgentProgram", "Phase", "Move", "Interact",
    "NoOp", "select_task", "choose_enabler", "TestingTask",
]


@dataclass(frozen=True)
class Move:
    direction: Direction


@dataclass(frozen=True)
class Interact:
    obj: str


@dataclass(frozen=True)
class NoOp:
    pass


Action = Move | Interact | NoOp

_VARIANTS = ("random", "high", "low", "eager", "explorer")


@dataclass(frozen=True)
class SelectHeuristic:
    variant: str = "random"
    threshold: float = 5

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown select heuristic {self.variant!r}")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")

    @classmethod
    def parse(cls, text: str) -> "SelectHeuristic":
        name, _, t = text.partition(":")
        if t:
            return cls(name, float(t))
        return cls(name)

    def __str__(self) -> str:
        if self.variant in ("high", "low"):
            t = int(self.threshold) if float(self.threshold).is_integer() else self.threshold
            return f"{self.variant}:{t}"
        return self.variant

    def candidates(self, tasks: Iterable[TestingTask]) -> list[TestingTask]:
        tasks = sorted(tasks, key=lambda t: natural_key(t.id))
        if self.variant == "explorer":
            return []
        if self.variant == "high":
            return [t for t in tasks if t.value > self.threshold]
        if self.variant == "low":
            return [t for t in tasks if t.value < self.threshold]
        return tasks


@dataclass(frozen=True)
class FindHeuristic:
    variant: str = "closest"

    def __post_init__(self):
        if self.variant != "closest":
            raise ValueError(f"unknown find heuristic {self.variant!r}")


def select_task(h: SelectHeuristic, todo: Iterable[TestingTask], belief: AgentBelief,
                rng: random.Random, pos: Pos | None = None,
                targets: Mapping[str, Pos] | None = None) -> TestingTask | None:
    """Pick a task from ``todo`` according to the selection heuristic.

    ``targets`` maps task ids to known target positions (needed by the eager
    heuristic, which takes the task whose target is nearest).
    """
    cands = h.candidates(todo)
    if not cands:
        return None
    if h.variant != "eager":
        return rng.choice(cands)
    targets = targets or {}
    located = {t.id: targets[t.id] for t in cands if t.id in targets}
    if pos is None or not located:
        return cands[0]
    dist = distances_from(belief, pos, set(located.values()))

    def key(t: TestingTask):
        p = located.get(t.id)
        if p is None:
            return (1, float("inf"), natural_key(t.id))
        d = dist.get(p)
        manhattan = abs(p[0] - pos[0]) + abs(p[1] - pos[1])
        return (0, d if d is not None else float("inf"), manhattan, natural_key(t.id))

    return min(cands, key=key)


def rank_enablers(delta: Iterable[str], agent_pos: Pos, belief: AgentBelief) -> list[tuple[float, str]]:
    """Candidates ordered by believed path length (unreachable last), then id."""
    pos = {i: belief.last_seen[i].pos for i in delta}
    dist = distances_from(belief, agent_pos, set(pos.values()))
    ranked = [(dist.get(p, float("inf")), i) for i, p in pos.items()]
    ranked.sort(key=lambda di: (di[0], natural_key(di[1])))
    return ranked


def choose_enabler(h: FindHeuristic, delta: Iterable[str], agent_pos: Pos,
                   belief: AgentBelief) -> str:
    ranked = rank_enablers(delta, agent_pos, belief)
    if not ranked:
        raise ValueError("no candidate enablers")
    return ranked[0][1]


class Phase(enum.Enum):
    IDLE = "idle"
    TRAVEL = "travel"
    DYNGOAL = "dyngoal"
    FINDING = "finding"
    DONE = "done"


class Sub(enum.Enum):
    CHECK = "check"
    CHOOSE = "choose"
    TO_ENABLER = "to-enabler"
    EXPLORE = "explore"
    RECHECK = "recheck"
    PEEK = "peek"


def _chebyshev(a: Pos, b: Pos) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


class AgentProgram:
    MAX_OBSTRUCTED = 8

    def __init__(self, agent: str, select_h: SelectHeuristic, find_h: FindHeuristic,
                 explore: Exploration, belief: AgentBelief, blackboard: Blackboard,
                 rng: random.Random):
        self.agent = agent
        self.select_h = select_h
        self.find_h = find_h
        self.explore = explore
        self.belief = belief
        self.bb = blackboard
        self.rng = rng
        self.by_target = {t.target: t for t in blackboard.all_tasks.values()}
        self.phase = Phase.IDLE
        self.sub: Sub | None = None
        self.task: TestingTask | None = None
        self.attempt = 0
        self.attempt_started = 0
        self.enabler: str | None = None
        self.path: list[Pos] = []
        self.path_key: tuple | None = None
        self.explore_ticks = 0
        self.obstructed = 0
        self.stall = 0
        self.teammates: tuple[Pos, ...] = ()
        # tick of this agent's latest successful interaction, and the doors
        # re-observed since then
        self.last_press = -1
        self.rechecked: set[str] = set()
        self.recheck: str | None = None
        # door states just before our latest press, to spot what it opened
        self.doors_before: dict[str, bool | None] | None = None
        self.peek: Pos | None = None
        # failed attempts per task; retries vary the enabler order
        self.failures: dict[str, int] = {}

    # -- perception ----------------------------------------------------------

    def perceive(self, obs: Observation) -> None:
        """Fold ``obs`` into the belief and report what it reveals about tasks."""
        update_belief(self.belief, obs)
        self.teammates = tuple(
            s.pos for a, s in sorted(self.belief.last_seen.items(), key=lambda kv: natural_key(kv[0]))
            if s.kind == "agent" and a != self.agent and s.tick >= obs.tick - 1)
        new, opened, positions = [], [], {}
        for snap in obs.visible_objects:
            if snap.kind != "door":
                continue
            task = self.by_target.get(snap.id)
            if task is None:
                continue
            status = self.bb.status(task.id)
            if status == "undiscovered":
                new.append(task.id)
                positions[task.id] = snap.pos
                if snap.is_open:
                    opened.append(task.id)
            elif status == "todo" and snap.is_open:
                self.bb.complete(task.id, self.agent, obs.tick, accidental=True)
            elif status == "claimed" and snap.is_open and self.task is task:
                self.bb.complete(task.id, self.agent, obs.tick)
        if new:
            self.bb.publish_discovered(new, self.agent, opened, positions)

    # -- helpers -------------------------------------------------------------

    def _claimable(self) -> list[TestingTask]:
        return self.bb.claimable(self.agent)

    def _target_pos(self) -> Pos:
        return self.bb.target_pos[self.task.id]

    def _follow(self, pos: Pos, key: tuple, plan, valid=None) -> Move | None:
        """Step along the cached path for ``key``, replanning with ``plan()``
        when the path is missing, finished or no longer ``valid``.  None
        means there is nowhere to go."""
        p = self.path
        if (self.path_key != key or len(p) < 2 or p[0] != pos
                or (valid is not None and not valid(p))):
            p = plan()
            self.path_key = key
            self.path = p or []
            if not p or len(p) < 2:
                return None
        self.path = p[1:]
        return Move(Direction.between(pos, p[1]))

    def _unblocked(self, path: list[Pos]) -> bool:
        ok, w = self.belief.open_bytes(), self.belief.width
        return all(ok[y * w + x] for x, y in path[1:])

    def _go_near(self, pos: Pos, target: Pos, purpose: str) -> Move | NoOp | None:
        """One step toward a non-door cell within Chebyshev 1 of ``target``.

        NoOp means already there; None means the target is walled off in
        belief.
        """
        if _chebyshev(pos, target) <= 1 and self.belief.known[pos[1], pos[0]] != CODE_DOOR:
            return NoOp()
        return self._follow(pos, (purpose, target),
                            lambda: approach_path(self.belief, pos, target), self._unblocked)

    def _is_frontier(self, p: Pos) -> bool:
        return bool(self.belief.frontier_bytes()[p[1] * self.belief.width + p[0]])

    def _explore_step(self, pos: Pos) -> Move | None:
        return self._follow(pos, ("explore",),
                            lambda: explore_path(self.belief, pos, self.teammates),
                            lambda p: self._unblocked(p) and self._is_frontier(p[-1]))

    def _drop_task(self) -> None:
        if self.enabler is not None:
            if self.bb.locks.get(self.enabler) == self.agent:
                self.bb.unlock(self.enabler, self.agent)
            self.enabler = None
        self.task = None
        self.sub = None
        self.path_key = None
        self.obstructed = 0
        self.recheck = None
        self.doors_before = None
        self.peek = None
        self.phase = Phase.IDLE

    def _give_up(self, exhausted: bool) -> None:
        if exhausted and self.task is not None:
            self.failures[self.task.id] = self.failures.get(self.task.id, 0) + 1
        if self.task is not None and self.bb.status(self.task.id) == "claimed":
            self.bb.release(self.task.id, self.agent, exhausted=exhausted)
        self._drop_task()

    def _task_finished(self) -> bool:
        return self.task is not None and self.bb.status(self.task.id) == "done"

    def _out_of_time(self, tick: int) -> bool:
        return tick - self.attempt_started >= self.task.stop_budget

    def _target_visible(self, obs: Observation) -> bool:
        return self._target_pos() in obs.visible_cells

    def _delta(self) -> list[str]:
        """Seen enablers of the task's kind not yet tried this attempt and not
        locked by another agent."""
        tried = self.belief.marked(self.task.target, self.attempt)
        out = []
        for oid, s in self.belief.last_seen.items():
            if s.kind != self.task.enabler_kind or oid in tried:
                continue
            holder = self.bb.locks.get(oid)
            if holder is not None and holder != self.agent:
                continue
            out.append(oid)
        return out

    def _opened_frontier(self) -> Pos | None:
        """A frontier cell next to a door our latest press was seen to open,
        i.e. unexplored space the press just gave access to."""
        before = self.doors_before
        w, h = self.belief.width, self.belief.height
        for d, s in sorted(self.belief.last_seen.items(), key=lambda kv: natural_key(kv[0])):
            if s.kind != "door" or not s.is_open or before.get(d) is not False:
                continue
            x0, y0 = s.pos
            for y in range(max(0, y0 - 2), min(h, y0 + 3)):
                for x in range(max(0, x0 - 2), min(w, x0 + 3)):
                    if self._is_frontier((x, y)):
                        return (x, y)
        return None

    def _stale_door(self, pos: Pos) -> str | None:
        """A door last seen closed before our latest press that stands
        between us and an untried enabler.

        Any press may toggle doors out of sight, so such a door could be
        open by now; it is worth walking over to look before giving up.
        """
        stale = {s.pos: d for d, s in self.belief.last_seen.items()
                 if s.kind == "door" and s.is_open is False and s.tick < self.last_press
                 and d not in self.rechecked}
        if not stale:
            return None
        for _, i in rank_enablers(self._delta(), pos, self.belief):
            path = approach_path(self.belief, pos, self.belief.last_seen[i].pos, stale)
            for p in path or ():
                if p in stale:
                    return stale[p]
        return None

    def selectable(self) -> bool:
        return bool(self.select_h.candidates(self._claimable()))

    # -- the state machine -----------------------------------------------------

    def step(self, pos: Pos, obs: Observation, tick: int) -> Action:
        if self.stall > 0:
            self.stall -= 1
            return NoOp()
        for _ in range(16):
            handler = {
                Phase.IDLE: self._idle,
                Phase.TRAVEL: self._travel,
                Phase.DYNGOAL: self._dyngoal,
                Phase.FINDING: self._finding,
                Phase.DONE: self._done,
            }[self.phase]
            act = handler(pos, obs, tick)
            if act is not None:
                return act
        return NoOp()

    def _idle(self, pos: Pos, obs: Observation, tick: int) -> Action | None:
        if self.task is not None:
            raise BlackboardError(f"{self.agent} idle while holding {self.task.id}")
        task = select_task(self.select_h, self._claimable(), self.belief, self.rng,
                           pos, self.bb.target_pos)
        if task is not None:
            if not self.bb.claim(task.id, self.agent):
                raise BlackboardError(f"claim of claimable {task.id} denied")
            self.task = task
            self.attempt = self.bb.claims[task.id].attempt
            self.attempt_started = tick
            self.phase = Phase.TRAVEL
            self.path_key = None
            return None
        if has_reachable_frontier(self.belief, pos):
            self.phase = Phase.FINDING
            self.explore_ticks = 0
            return None
        self.phase = Phase.DONE
        return NoOp()

    def _done(self, pos: Pos, obs: Observation, tick: int) -> Action | None:
        if self.selectable():
            self.phase = Phase.IDLE
            return None
        if self.belief.frontier_bytes().count(1) and has_reachable_frontier(self.belief, pos):
            self.phase = Phase.IDLE
            return None
        return NoOp()

    def _travel(self, pos: Pos, obs: Observation, tick: int) -> Action | None:
        if self._task_finished():
            self._drop_task()
            return None
        if self._out_of_time(tick):
            self._give_up(exhausted=False)
            return None
        target = self._target_pos()
        if _chebyshev(pos, target) <= 1 and self._target_visible(obs):
            self.phase = Phase.DYNGOAL
            self.sub = Sub.CHOOSE
            self.path_key = None
            return None
        act = self._go_near(pos, target, "target")
        if act is None or isinstance(act, NoOp):
            # Walled off in belief, or next to the target without seeing it:
            # either way the enablers are what can change that.
            self.phase = Phase.DYNGOAL
            self.sub = Sub.CHOOSE
            return None
        return act

    def _dyngoal(self, pos: Pos, obs: Observation, tick: int) -> Action | None:
        if self._task_finished():
            self._drop_task()
            return None
        target = self._target_pos()

        if self.sub is Sub.CHECK:
            if self.doors_before is not None:
                peek = self._opened_frontier()
                self.doors_before = None
                if peek is not None:
                    self.peek = peek
                    self.sub = Sub.PEEK
                    return None
            if _chebyshev(pos, target) <= 1 and self._target_visible(obs):
                # psi was evaluated in perceive(); still closed.
                if self.enabler is not None:
                    self.bb.unlock(self.enabler, self.agent)
                    self.enabler = None
                self.sub = Sub.CHOOSE
                return None
            act = self._go_near(pos, target, "target")
            if act is None or isinstance(act, NoOp):
                if self.enabler is not None:
                    self.bb.unlock(self.enabler, self.agent)
                    self.enabler = None
                self.sub = Sub.CHOOSE
                return None
            return act

        if self.sub is Sub.CHOOSE:
            if self._out_of_time(tick):
                self._give_up(exhausted=False)
                return None
            order = [i for d, i in rank_enablers(self._delta(), pos, self.belief)
                     if d < float("inf")]
            if self.failures.get(self.task.id):
                # Closest-first already failed from here once and would
                # replay the same presses; try another order.
                self.rng.shuffle(order)
            for i in order:
                if self.bb.lock(i, self.agent):
                    self.enabler = i
                    self.sub = Sub.TO_ENABLER
                    self.obstructed = 0
                    return None
            if has_reachable_frontier(self.belief, pos):
                self.sub = Sub.EXPLORE
                return None
            door = self._stale_door(pos)
            if door is not None:
                self.recheck = door
                self.rechecked.add(door)
                self.sub = Sub.RECHECK
                return None
            self._give_up(exhausted=True)
            return None

        if self.sub is Sub.PEEK:
            act = None
            if self._is_frontier(self.peek):
                act = self._follow(pos, ("peek", self.peek),
                                   lambda: find_path(self.belief, pos, self.peek))
            if act is None:
                self.peek = None
                self.sub = Sub.CHECK
                return None
            return act

        if self.sub is Sub.RECHECK:
            if self._out_of_time(tick):
                self._give_up(exhausted=False)
                return None
            act = self._go_near(pos, self.belief.last_seen[self.recheck].pos, "recheck")
            if act is None or isinstance(act, NoOp):
                self.recheck = None
                self.sub = Sub.CHOOSE
                return None
            return act

        if self.sub is Sub.TO_ENABLER:
            bpos = self.belief.last_seen[self.enabler].pos
            if _chebyshev(pos, bpos) <= 1:
                return Interact(self.enabler)
            act = self._go_near(pos, bpos, "enabler")
            if act is None or isinstance(act, NoOp):
                self.bb.unlock(self.enabler, self.agent)
                self.enabler = None
                self.sub = Sub.CHECK
                return None
            return act

        if self.sub is Sub.EXPLORE:
            if self._out_of_time(tick):
                self._give_up(exhausted=False)
                return None
            if any(d < float("inf") for d, _ in rank_enablers(self._delta(), pos, self.belief)):
                self.sub = Sub.CHECK
                self.path_key = None
                return None
            act = self._explore_step(pos)
            if act is None:
                self._give_up(exhausted=True)
                return None
            return act
        raise BlackboardError(f"bad dynamic-goal state {self.sub}")

    def _finding(self, pos: Pos, obs: Observation, tick: int) -> Action | None:
        pol = self.explore.policy
        if pol is ExplorePolicy.GRADUAL and self.selectable():
            self.phase = Phase.IDLE
            return None
        if pol is ExplorePolicy.BUDGET and self.explore_ticks >= self.explore.budget:
            self.phase = Phase.IDLE
            if self.selectable():
                return None
            self.phase = Phase.FINDING
            self.explore_ticks = 0
        act = self._explore_step(pos)
        if act is None:
            self.phase = Phase.IDLE if self.selectable() else Phase.DONE
            if self.phase is Phase.DONE:
                return NoOp()
            return None
        self.explore_ticks += 1
        return act

    # -- feedback from the runner ---------------------------------------------

    def on_move(self, moved: bool) -> None:
        if not moved:
            self.path_key = None

    def on_interact(self, result: InteractResult) -> None:
        if self.phase is not Phase.DYNGOAL or self.sub is not Sub.TO_ENABLER:
            return
        if result is InteractResult.OK:
            self.doors_before = {d: s.is_open for d, s in self.belief.last_seen.items()
                                 if s.kind == "door"}
            self.last_press = self.bb.tick
            self.rechecked.clear()
            self.belief.mark(self.task.target, self.enabler, self.attempt)
            self.sub = Sub.CHECK
            self.path_key = None
        elif result is InteractResult.OBSTRUCTED:
            self.obstructed += 1
            if self.obstructed >= self.MAX_OBSTRUCTED:
                self.bb.unlock(self.enabler, self.agent)
                self.enabler = None
                self.sub = Sub.CHECK

    def shutdown(self) -> None:
        """Release any claim and lock at run termination."""
        if self.task is not None and self.bb.status(self.task.id) == "claimed":
            self.bb.release(self.task.id, self.agent)
        self._drop_task()

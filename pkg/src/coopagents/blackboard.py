"""Shared coordination state: task sets, exclusive claims, enabler locks,
information synchronisation, and an append-only audit log."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .nav import AgentBelief, absorb
from .tasks import TestingTask
from .world import Pos

# Failed attempts an agent may make on one task from one door state.  Fresh
# door states normally lift exhaustion, but an agent toggling between two
# states on its own would otherwise retry forever.
RETRIES_PER_STATE = 3


class BlackboardError(RuntimeError):
    """An operation that only a buggy caller can trigger."""


class SyncMode(enum.Enum):
    BASIC = "basic"
    EXTENDED = "extended"


@dataclass(frozen=True)
class DoneRecord:
    tick: int
    agent: str
    accidental: bool


@dataclass(frozen=True)
class Claim:
    agent: str
    attempt: int
    door_vector: int
    tick: int
    door_epoch: int = 0


@dataclass(frozen=True)
class AuditEvent:
    tick: int
    event: str
    agent: str
    subject: str = ""
    extra: str = ""

    def line(self) -> str:
        return f"{self.tick},{self.event},{self.agent},{self.subject},{self.extra}"


@dataclass
class Blackboard:
    all_tasks: Mapping[str, TestingTask]
    sync_mode: SyncMode = SyncMode.BASIC
    tick: int = 0
    door_vector: int = 0
    # dicts used as insertion-ordered sets for deterministic iteration
    todo: dict[str, None] = field(default_factory=dict)
    done: dict[str, DoneRecord] = field(default_factory=dict)
    claims: dict[str, Claim] = field(default_factory=dict)
    locks: dict[str, str] = field(default_factory=dict)
    target_pos: dict[str, Pos] = field(default_factory=dict)
    # bumped whenever the global door state changes
    door_epoch: int = 0
    # (agent, task) -> door epoch at the start of the attempt the agent gave
    # up on; doors changing since then makes the task worth another try
    exhausted: dict[tuple[str, str], int] = field(default_factory=dict)
    # (agent, task) -> door vectors at the start of failed attempts
    failed_from: dict[tuple[str, str], Counter] = field(default_factory=dict)
    audit_log: list[AuditEvent] = field(default_factory=list)
    _attempts: int = 0

    def log(self, event: str, agent: str, subject: str = "", extra: str = "") -> None:
        self.audit_log.append(AuditEvent(self.tick, event, agent, subject, extra))

    # -- queries -----------------------------------------------------------

    def status(self, task_id: str) -> str:
        if task_id in self.done:
            return "done"
        if task_id in self.claims:
            return "claimed"
        if task_id in self.todo:
            return "todo"
        return "undiscovered"

    @property
    def all_done(self) -> bool:
        return len(self.done) == len(self.all_tasks)

    def claimable(self, agent: str) -> list[TestingTask]:
        """toDo minus tasks this agent exhausted since the last door change,
        or has already failed too often from the current door state."""
        out = []
        for tid in self.todo:
            if self.exhausted.get((agent, tid)) == self.door_epoch:
                continue
            tried = self.failed_from.get((agent, tid))
            if tried and tried[self.door_vector] >= RETRIES_PER_STATE:
                continue
            out.append(self.all_tasks[tid])
        return out

    def claim_of(self, agent: str) -> str | None:
        for tid, c in self.claims.items():
            if c.agent == agent:
                return tid
        return None

    # -- task operations ---------------------------------------------------

    def publish_discovered(self, tasks: Iterable[str], by: str,
                           observed_open: Iterable[str] = (),
                           positions: Mapping[str, Pos] | None = None) -> list[str]:
        """Add newly seen tasks to toDo; those seen already satisfied go
        straight to done as accidental completions.  Returns the ids added."""
        observed_open = set(observed_open)
        added = []
        for tid in tasks:
            if tid not in self.all_tasks:
                raise BlackboardError(f"unknown task {tid}")
            if positions and tid in positions:
                self.target_pos.setdefault(tid, positions[tid])
            if self.status(tid) != "undiscovered":
                continue
            added.append(tid)
            if tid in observed_open:
                self.done[tid] = DoneRecord(self.tick, by, True)
                self.log("publish", by, tid, "open")
                self.log("complete", by, tid, "accidental")
            else:
                self.todo[tid] = None
                self.log("publish", by, tid)
        return added

    def claim(self, task_id: str, by: str) -> bool:
        if task_id not in self.todo:
            self.log("claim-denied", by, task_id)
            return False
        if self.claim_of(by) is not None:
            raise BlackboardError(f"{by} already holds a claim")
        del self.todo[task_id]
        self._attempts += 1
        self.claims[task_id] = Claim(by, self._attempts, self.door_vector, self.tick,
                                     self.door_epoch)
        self.log("claim", by, task_id, str(self._attempts))
        return True

    def complete(self, task_id: str, by: str, tick: int | None = None,
                 accidental: bool = False) -> bool:
        """Move a task to done; a second completion is a no-op (False)."""
        tick = self.tick if tick is None else tick
        if task_id in self.done:
            return False
        claim = self.claims.get(task_id)
        if accidental:
            if claim is not None and claim.agent != by:
                raise BlackboardError(f"{task_id} is claimed by {claim.agent}")
        elif claim is None or claim.agent != by:
            raise BlackboardError(f"{by} completes {task_id} without holding its claim")
        self.todo.pop(task_id, None)
        self.claims.pop(task_id, None)
        self.done[task_id] = DoneRecord(tick, by, accidental)
        self.log("complete", by, task_id, "accidental" if accidental else "")
        return True

    def release(self, task_id: str, by: str, exhausted: bool = False) -> None:
        claim = self.claims.get(task_id)
        if claim is None or claim.agent != by:
            raise BlackboardError(f"{by} releases {task_id} without holding its claim")
        del self.claims[task_id]
        self.todo[task_id] = None
        if exhausted:
            self.exhausted[(by, task_id)] = claim.door_epoch
            self.failed_from.setdefault((by, task_id), Counter())[claim.door_vector] += 1
        self.log("release", by, task_id, "exhausted" if exhausted else "")

    # -- locks -------------------------------------------------------------

    def lock(self, obj: str, by: str) -> bool:
        holder = self.locks.get(obj)
        if holder is not None and holder != by:
            self.log("lock-denied", by, obj)
            return False
        self.locks[obj] = by
        self.log("lock", by, obj)
        return True

    def unlock(self, obj: str, by: str) -> None:
        if self.locks.get(obj) != by:
            raise BlackboardError(f"{by} unlocks {obj} held by {self.locks.get(obj)}")
        del self.locks[obj]
        self.log("unlock", by, obj)

    def note_doors(self, vector: int) -> None:
        """Record the door state after an interaction; any change lifts all
        exhaustion records."""
        if vector != self.door_vector:
            self.door_epoch += 1
        self.door_vector = vector

    def export_audit(self) -> str:
        return "".join(e.line() + "\n" for e in self.audit_log)

    def check_partition(self) -> None:
        t, c, d = set(self.todo), set(self.claims), set(self.done)
        if t & c or t & d or c & d:
            raise BlackboardError("toDo/claims/done overlap")
        if not (t | c | d) <= set(self.all_tasks):
            raise BlackboardError("unknown task in blackboard")


def sync(beliefs: Mapping[str, AgentBelief], mode: SyncMode) -> Mapping[str, AgentBelief]:
    """Share information between agents, in place.

    Basic mode shares only what already lives on the blackboard (task sets and
    target locations), so beliefs are untouched.  Extended mode joins every
    belief: explored cells, freshest object states and tried marks.
    """
    if mode is SyncMode.BASIC or len(beliefs) < 2:
        return beliefs
    agents = sorted(beliefs)
    joined = beliefs[agents[0]].copy()
    for a in agents[1:]:
        absorb(joined, beliefs[a])
    for a in agents:
        absorb(beliefs[a], joined)
    return beliefs

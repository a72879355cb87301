"""Agent beliefs, path planning over believed-traversable cells, and frontier
exploration.

Beliefs store the known map as an ``int8`` grid (0 unknown, then the cell
codes from :mod:`coopagents.world`) so that merges are a single array join.
Planning runs on flat cell indices over a ``bytes`` snapshot of the
traversable mask, cached per belief version.
"""

from __future__ import annotations

import enum
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .world import CODE_DOOR, CODE_FLOOR, CODE_WALL, Observation, Pos

UNKNOWN = 0


class UnknownCellError(LookupError):
    """The requested goal cell is not in the belief at all."""


@dataclass(frozen=True)
class Sighting:
    kind: str
    pos: Pos
    is_open: bool | None
    tick: int
    seq: int

    @property
    def stamp(self) -> tuple[int, int]:
        return (self.tick, self.seq)


class ExplorePolicy(enum.Enum):
    GRADUAL = "gradual"
    AGGRESSIVE = "aggressive"
    BUDGET = "budget"


@dataclass(frozen=True)
class Exploration:
    policy: ExplorePolicy = ExplorePolicy.GRADUAL
    budget: int = 0

    @classmethod
    def parse(cls, text: str) -> "Exploration":
        name, _, n = text.partition(":")
        policy = ExplorePolicy(name)
        if policy is ExplorePolicy.BUDGET:
            if not n.isdigit() or int(n) < 1:
                raise ValueError("budget exploration needs a positive tick count")
            return cls(policy, int(n))
        return cls(policy)

    def __str__(self) -> str:
        if self.policy is ExplorePolicy.BUDGET:
            return f"budget:{self.budget}"
        return self.policy.value


@dataclass
class AgentBelief:
    agent: str
    width: int
    height: int
    known: np.ndarray = None
    last_seen: dict[str, Sighting] = field(default_factory=dict)
    # (target, enabler, attempt) triples; the attempt number scopes a mark
    # to one claim of the target task.
    tried_marks: set[tuple[str, str, int]] = field(default_factory=set)
    version: int = 0

    def __post_init__(self):
        if self.known is None:
            self.known = np.zeros((self.height, self.width), dtype=np.int8)
        self._cache: dict[str, tuple[int, object]] = {}

    @classmethod
    def empty(cls, agent: str, width: int, height: int) -> "AgentBelief":
        return cls(agent, width, height)

    def copy(self, agent: str | None = None) -> "AgentBelief":
        return AgentBelief(agent or self.agent, self.width, self.height, self.known.copy(),
                           dict(self.last_seen), set(self.tried_marks), self.version)

    # -- views -------------------------------------------------------------

    @property
    def known_cells(self) -> dict[Pos, object]:
        """Position -> ``"wall"``, ``"floor"`` or ``("door", id)``."""
        door_ids = {s.pos: oid for oid, s in self.last_seen.items() if s.kind == "door"}
        out: dict[Pos, object] = {}
        ys, xs = np.nonzero(self.known)
        for x, y in zip(xs.tolist(), ys.tolist()):
            c = self.known[y, x]
            if c == CODE_WALL:
                out[(x, y)] = "wall"
            elif c == CODE_FLOOR:
                out[(x, y)] = "floor"
            else:
                out[(x, y)] = ("door", door_ids.get((x, y)))
        return out

    def is_known(self, p: Pos) -> bool:
        x, y = p
        return 0 <= x < self.width and 0 <= y < self.height and self.known[y, x] != UNKNOWN

    def seen_objects(self, kind: str | None = None) -> dict[str, Sighting]:
        return {k: s for k, s in self.last_seen.items() if kind is None or s.kind == kind}

    def door_seen_open(self, door_id: str) -> bool | None:
        s = self.last_seen.get(door_id)
        return None if s is None else s.is_open

    def marked(self, target: str, attempt: int) -> set[str]:
        return {i for (o, i, a) in self.tried_marks if o == target and a == attempt}

    def mark(self, target: str, enabler: str, attempt: int) -> None:
        self.tried_marks.add((target, enabler, attempt))

    def _cached(self, name: str, build: Callable[[], object]):
        hit = self._cache.get(name)
        if hit is not None and hit[0] == self.version:
            return hit[1]
        val = build()
        self._cache[name] = (self.version, val)
        return val

    def passable_grid(self) -> np.ndarray:
        def build():
            g = self.known == CODE_FLOOR
            for s in self.last_seen.values():
                if s.kind == "door" and s.is_open:
                    g[s.pos[1], s.pos[0]] = True
            return g
        return self._cached("passable", build)

    def passable_bytes(self) -> bytes:
        return self._cached("passable_b", lambda: self.passable_grid().tobytes())

    def open_bytes(self) -> bytes:
        """Cells not known to block: believed traversable or still unknown."""
        return self._cached(
            "open_b", lambda: (self.passable_grid() | (self.known == UNKNOWN)).tobytes())

    def frontier_grid(self) -> np.ndarray:
        """Believed-traversable cells with at least one unknown 4-neighbour."""
        def build():
            unk = np.zeros((self.height + 2, self.width + 2), dtype=bool)
            unk[1:-1, 1:-1] = self.known == UNKNOWN
            near = unk[:-2, 1:-1] | unk[2:, 1:-1] | unk[1:-1, :-2] | unk[1:-1, 2:]
            return self.passable_grid() & near
        return self._cached("frontier", build)

    def frontier_bytes(self) -> bytes:
        return self._cached("frontier_b", lambda: self.frontier_grid().tobytes())

    @property
    def frontier_cache(self) -> set[Pos]:
        ys, xs = np.nonzero(self.frontier_grid())
        return set(zip(xs.tolist(), ys.tolist()))

    def passable(self, p: Pos) -> bool:
        x, y = p
        return 0 <= x < self.width and 0 <= y < self.height and bool(self.passable_grid()[y, x])


def update_belief(belief: AgentBelief, obs: Observation) -> AgentBelief:
    """Fold an observation into ``belief`` in place and return it.

    Agents are recorded as ``"agent"`` sightings: the observer itself plus
    every agent in view.  Their moves do not bump the belief version, which
    only tracks changes that affect planning.
    """
    bump = False
    cur = belief.known[obs.ys, obs.xs]
    if (cur == UNKNOWN).any():
        belief.known[obs.ys, obs.xs] = obs.codes
        bump = True
    stamp = (obs.tick, obs.seq)
    seen = [(o.id, o.kind, o.pos, o.is_open) for o in obs.visible_objects]
    seen += [(a, "agent", p, None) for a, p in obs.visible_agents]
    if obs.origin is not None:
        seen.append((obs.observer, "agent", obs.origin, None))
    for oid, kind, pos, is_open in seen:
        old = belief.last_seen.get(oid)
        if old is not None and old.stamp > stamp:
            continue
        if old is None or old.is_open != is_open:
            bump = True
        belief.last_seen[oid] = Sighting(kind, pos, is_open, obs.tick, obs.seq)
    if bump:
        belief.version += 1
    return belief


def merge_beliefs(mine: AgentBelief, theirs: AgentBelief) -> AgentBelief:
    """Join of two beliefs: union of cells and marks, freshest sightings."""
    out = mine.copy()
    absorb(out, theirs)
    return out


def absorb(belief: AgentBelief, other: AgentBelief) -> bool:
    """In-place join of ``other`` into ``belief``; True if anything changed."""
    changed = bump = False
    if not np.array_equal(belief.known, other.known):
        joined = np.maximum(belief.known, other.known)
        if not np.array_equal(joined, belief.known):
            belief.known = joined
            bump = True
    for oid, s in other.last_seen.items():
        old = belief.last_seen.get(oid)
        if old is None or s.stamp > old.stamp:
            if old is None or old.is_open != s.is_open:
                bump = True
            belief.last_seen[oid] = s
            changed = True
    if not other.tried_marks <= belief.tried_marks:
        belief.tried_marks |= other.tried_marks
        changed = True
    if bump:
        belief.version += 1
    return changed or bump


# ---------------------------------------------------------------------------
# Planning

_INF = float("inf")


def _neighbours(i: int, w: int, n: int) -> tuple[int, ...]:
    # (y, x) lexicographic: north, west, east, south.
    x = i % w
    out = []
    if i - w >= 0:
        out.append(i - w)
    if x > 0:
        out.append(i - 1)
    if x < w - 1:
        out.append(i + 1)
    if i + w < n:
        out.append(i + w)
    return tuple(out)


def _unwind(parent: dict[int, int], end: int, w: int) -> list[Pos]:
    path = []
    i = end
    while i != -1:
        path.append((i % w, i // w))
        i = parent[i]
    path.reverse()
    return path


def find_path(belief: AgentBelief, start: Pos, goal: Pos) -> list[Pos] | None:
    """Shortest 4-connected path over believed-traversable cells (A*).

    Returns the positions from ``start`` to ``goal`` inclusive, or None when
    the goal is known but unreachable in belief.  Raises
    :class:`UnknownCellError` when ``goal`` is not known at all.
    """
    if not belief.is_known(goal):
        raise UnknownCellError(goal)
    w, n = belief.width, belief.width * belief.height
    pas = belief.passable_bytes()
    s = start[1] * w + start[0]
    g = goal[1] * w + goal[0]
    if not pas[g] and s != g:
        return None
    gx, gy = goal
    parent = {s: -1}
    cost = {s: 0}
    heap = [(abs(start[0] - gx) + abs(start[1] - gy), start[1], start[0], s)]
    while heap:
        f, _, _, i = heapq.heappop(heap)
        if i == g:
            return _unwind(parent, i, w)
        ci = cost[i]
        if f > ci + abs(i % w - gx) + abs(i // w - gy):
            continue
        for j in _neighbours(i, w, n):
            if not pas[j]:
                continue
            cj = ci + 1
            if cj < cost.get(j, _INF):
                cost[j] = cj
                parent[j] = i
                jx, jy = j % w, j // w
                heapq.heappush(heap, (cj + abs(jx - gx) + abs(jy - gy), jy, jx, j))
    return None


def bfs_to(belief: AgentBelief, start: Pos, is_goal: Callable[[int], bool],
           limit: int | None = None) -> list[Pos] | None:
    """Breadth-first search to the nearest goal index, ties by (y, x)."""
    w, n = belief.width, belief.width * belief.height
    pas = belief.passable_bytes()
    s = start[1] * w + start[0]
    if is_goal(s):
        return [start]
    parent = {s: -1}
    layer = [s]
    depth = 0
    while layer:
        depth += 1
        if limit is not None and depth > limit:
            return None
        nxt = []
        for i in layer:
            for j in _neighbours(i, w, n):
                if j in parent or not pas[j]:
                    continue
                parent[j] = i
                nxt.append(j)
        hits = [j for j in nxt if is_goal(j)]
        if hits:
            return _unwind(parent, min(hits), w)
        nxt.sort()
        layer = nxt
    return None


def distances_from(belief: AgentBelief, start: Pos, goals: Iterable[Pos]) -> dict[Pos, int]:
    """Path lengths from ``start`` to each reachable goal (unreachable omitted)."""
    w, n = belief.width, belief.width * belief.height
    pas = belief.passable_bytes()
    want = {p[1] * w + p[0]: p for p in goals}
    s = start[1] * w + start[0]
    out: dict[Pos, int] = {}
    if s in want:
        out[want[s]] = 0
    if len(out) == len(want):
        return out
    seen = {s}
    layer = [s]
    d = 0
    while layer:
        d += 1
        nxt = []
        for i in layer:
            for j in _neighbours(i, w, n):
                if j in seen:
                    continue
                seen.add(j)
                if j in want:
                    out[want[j]] = d
                if pas[j]:
                    nxt.append(j)
        if len(out) == len(want):
            break
        layer = nxt
    return out


def vicinity(belief: AgentBelief, p: Pos, avoid: set[Pos] = frozenset()) -> set[int]:
    """Flat indices of cells within Chebyshev distance 1 of ``p``."""
    w = belief.width
    out = set()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            x, y = p[0] + dx, p[1] + dy
            if 0 <= x < belief.width and 0 <= y < belief.height and (x, y) not in avoid:
                out.add(y * w + x)
    return out


def next_exploration_target(belief: AgentBelief, start: Pos,
                            policy: Exploration | None = None) -> Pos | None:
    """Nearest reachable frontier cell, ties by (y, x).

    The policy only decides when the caller stops exploring, so it does not
    influence the choice of target.
    """
    path = explore_path(belief, start)
    return None if path is None else path[-1]


def explore_path(belief: AgentBelief, start: Pos,
                 others: Sequence[Pos] = ()) -> list[Pos] | None:
    """Path to the nearest reachable frontier cell.

    Frontier cells that some position in ``others`` is strictly closer to (by
    Manhattan distance) are skipped while any other frontier remains, which
    spreads teammates over different parts of the unknown.
    """
    fr = belief.frontier_bytes()
    if not fr.count(1):
        return None
    if others:
        w = belief.width
        sx, sy = start

        def mine(i: int) -> bool:
            if not fr[i]:
                return False
            x, y = i % w, i // w
            d = abs(x - sx) + abs(y - sy)
            return all(abs(x - ox) + abs(y - oy) >= d for ox, oy in others)

        path = bfs_to(belief, start, mine)
        if path is not None:
            return path
    return bfs_to(belief, start, lambda i: fr[i] == 1)


def approach_path(belief: AgentBelief, start: Pos, target: Pos,
                  assume_open: Iterable[Pos] = ()) -> list[Pos] | None:
    """Shortest path to a non-door cell within Chebyshev distance 1 of
    ``target``, planning through unknown cells as if they were free.

    Only cells known to block (walls, doors not last seen open) are avoided,
    so following the path explores toward the target.  Door cells listed in
    ``assume_open`` are treated as open.  None means the target is enclosed
    by known blockers.
    """
    w, h = belief.width, belief.height
    n = w * h
    ok = belief.open_bytes()
    if assume_open:
        buf = bytearray(ok)
        for x, y in assume_open:
            buf[y * w + x] = 1
        ok = bytes(buf)
    known = belief.known
    tx, ty = target
    goals = set()
    for y in range(max(0, ty - 1), min(h, ty + 2)):
        for x in range(max(0, tx - 1), min(w, tx + 2)):
            if ok[y * w + x] and known[y, x] != CODE_DOOR:
                goals.add(y * w + x)
    if not goals:
        return None

    def est(i: int) -> int:
        return max(0, abs(i % w - tx) - 1) + max(0, abs(i // w - ty) - 1)

    s = start[1] * w + start[0]
    parent = {s: -1}
    cost = {s: 0}
    heap = [(est(s), start[1], start[0], s)]
    while heap:
        f, _, _, i = heapq.heappop(heap)
        if i in goals:
            return _unwind(parent, i, w)
        ci = cost[i]
        if f > ci + est(i):
            continue
        for j in _neighbours(i, w, n):
            if not ok[j]:
                continue
            cj = ci + 1
            if cj < cost.get(j, _INF):
                cost[j] = cj
                parent[j] = i
                heapq.heappush(heap, (cj + est(j), j // w, j % w, j))
    return None


def has_reachable_frontier(belief: AgentBelief, start: Pos) -> bool:
    return belief._cached(f"has_frontier:{start}", lambda: explore_path(belief, start) is not None)

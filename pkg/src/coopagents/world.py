"""Game structure, level text format and truth-state transitions.

A level is an immutable grid of walls and floor with doors (blockers) and
buttons (toggling enablers) placed on floor cells.  ``WorldState`` holds the
mutable truth: which doors are open and where the agents stand.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

import numpy as np

Pos = tuple[int, int]

WALL = "#"
FLOOR = "."

# Cell codes shared with agent beliefs (0 is reserved for "unknown").
CODE_FLOOR = 1
CODE_WALL = 2
CODE_DOOR = 3


class Direction(enum.Enum):
    N = (0, -1)
    S = (0, 1)
    E = (1, 0)
    W = (-1, 0)

    @property
    def delta(self) -> Pos:
        return self.value

    @classmethod
    def between(cls, a: Pos, b: Pos) -> "Direction":
        return cls((b[0] - a[0], b[1] - a[1]))


@dataclass(frozen=True)
class Door:
    id: str
    pos: Pos
    points: int = 1

    kind = "door"


@dataclass(frozen=True)
class Button:
    id: str
    pos: Pos

    kind = "button"


GameObject = Door | Button


class LevelError(ValueError):
    """Base class for level parse and validation failures."""


class LevelSyntaxError(LevelError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class LevelSemanticError(LevelError):
    """A structurally parsed level that violates a level invariant.

    ``code`` is one of: ``unknown-door``, ``unknown-button``, ``duplicate-id``,
    ``out-of-bounds``, ``object-on-wall``, ``overlap``, ``spawn-on-door``,
    ``spawn-on-wall``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class GenerationError(LevelError):
    pass


class NotInteractableError(LevelError):
    pass


class UnknownAgentError(KeyError):
    pass


def natural_key(s: str) -> tuple:
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s))


@dataclass(frozen=True)
class Level:
    width: int
    height: int
    cells: tuple[str, ...]
    objects: Mapping[str, GameObject]
    connections: Mapping[str, frozenset[str]]
    spawn_points: tuple[Pos, ...] = ()

    def __post_init__(self):
        validate_level(self)

    def in_bounds(self, p: Pos) -> bool:
        return 0 <= p[0] < self.width and 0 <= p[1] < self.height

    def is_wall(self, p: Pos) -> bool:
        return self.cells[p[1]][p[0]] == WALL

    @cached_property
    def doors(self) -> dict[str, Door]:
        return {k: o for k, o in sorted(self.objects.items(), key=lambda kv: natural_key(kv[0]))
                if isinstance(o, Door)}

    @cached_property
    def buttons(self) -> dict[str, Button]:
        return {k: o for k, o in sorted(self.objects.items(), key=lambda kv: natural_key(kv[0]))
                if isinstance(o, Button)}

    @cached_property
    def object_at(self) -> dict[Pos, GameObject]:
        return {o.pos: o for o in self.objects.values()}

    @cached_property
    def door_index(self) -> dict[str, int]:
        """Stable bit position of each door in a door-state bitmask."""
        return {d: i for i, d in enumerate(self.doors)}

    @cached_property
    def wall_grid(self) -> np.ndarray:
        return np.array([[c == WALL for c in row] for row in self.cells], dtype=bool)

    @cached_property
    def code_grid(self) -> np.ndarray:
        """Static cell codes: walls, floor, and door cells."""
        g = np.where(self.wall_grid, CODE_WALL, CODE_FLOOR).astype(np.int8)
        for d in self.doors.values():
            g[d.pos[1], d.pos[0]] = CODE_DOOR
        return g

    @property
    def total_points(self) -> int:
        return sum(d.points for d in self.doors.values())


def validate_level(level: Level) -> None:
    if level.width <= 0 or level.height <= 0:
        raise LevelSemanticError("out-of-bounds", "level must have positive size")
    if len(level.cells) != level.height or any(len(r) != level.width for r in level.cells):
        raise LevelSemanticError("out-of-bounds", "grid does not match declared size")
    seen: dict[Pos, str] = {}
    for oid, obj in level.objects.items():
        if oid != obj.id:
            raise LevelSemanticError("duplicate-id", f"object key {oid!r} != id {obj.id!r}")
        if not level.in_bounds(obj.pos):
            raise LevelSemanticError("out-of-bounds", f"{oid} at {obj.pos}")
        if level.is_wall(obj.pos):
            raise LevelSemanticError("object-on-wall", f"{oid} at {obj.pos}")
        if obj.pos in seen:
            raise LevelSemanticError("overlap", f"{oid} and {seen[obj.pos]} share {obj.pos}")
        seen[obj.pos] = oid
    for bid, doors in level.connections.items():
        if not isinstance(level.objects.get(bid), Button):
            raise LevelSemanticError("unknown-button", f"unknown button id {bid!r}")
        for did in doors:
            if not isinstance(level.objects.get(did), Door):
                raise LevelSemanticError("unknown-door", f"unknown door id {did!r}")
    for p in level.spawn_points:
        if not level.in_bounds(p):
            raise LevelSemanticError("out-of-bounds", f"spawn at {p}")
        if level.is_wall(p):
            raise LevelSemanticError("spawn-on-wall", f"spawn at {p}")
        if isinstance(level.object_at.get(p), Door):
            raise LevelSemanticError("spawn-on-door", f"spawn at {p}")


# ---------------------------------------------------------------------------
# LEVEL v1 text format

def load_level(text: str) -> Level:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    def line(i: int) -> str:
        if i >= len(lines):
            raise LevelSyntaxError(i + 1, 1, "unexpected end of file")
        return lines[i]

    if line(0).rstrip() != "LEVEL v1":
        raise LevelSyntaxError(1, 1, "expected header 'LEVEL v1'")
    m = re.fullmatch(r"size: (\d+) (\d+)\s*", line(1))
    if not m:
        raise LevelSyntaxError(2, 1, "expected 'size: <W> <H>'")
    w, h = int(m.group(1)), int(m.group(2))
    if w == 0 or h == 0:
        raise LevelSyntaxError(2, 7, "size must be positive")
    if line(2).rstrip() != "grid:":
        raise LevelSyntaxError(3, 1, "expected 'grid:'")
    rows = []
    for y in range(h):
        row = line(3 + y)
        if len(row) != w:
            raise LevelSyntaxError(4 + y, min(len(row), w) + 1, f"grid row must have {w} chars")
        for x, c in enumerate(row):
            if c not in (WALL, FLOOR):
                raise LevelSyntaxError(4 + y, x + 1, f"bad grid char {c!r}")
        rows.append(row)

    objects: dict[str, GameObject] = {}
    connections: dict[str, set[str]] = {}
    spawns: list[Pos] = []

    def add(obj: GameObject) -> None:
        if obj.id in objects:
            raise LevelSemanticError("duplicate-id", f"duplicate id {obj.id!r}")
        objects[obj.id] = obj

    ident = r"[A-Za-z_][A-Za-z0-9_\-]*"
    for i in range(3 + h, len(lines)):
        ln = lines[i]
        if not ln.strip():
            continue
        word = ln.split(" ", 1)[0]
        lineno = i + 1
        if word == "door":
            m = re.fullmatch(rf"door ({ident}) (\d+) (\d+) (\d+)\s*", ln)
            if not m:
                raise LevelSyntaxError(lineno, 1, "expected 'door <id> <x> <y> <points>'")
            add(Door(m.group(1), (int(m.group(2)), int(m.group(3))), int(m.group(4))))
        elif word == "button":
            m = re.fullmatch(rf"button ({ident}) (\d+) (\d+)\s*", ln)
            if not m:
                raise LevelSyntaxError(lineno, 1, "expected 'button <id> <x> <y>'")
            add(Button(m.group(1), (int(m.group(2)), int(m.group(3)))))
        elif word == "connect":
            m = re.fullmatch(rf"connect ({ident}) ({ident}(?:,{ident})*)\s*", ln)
            if not m:
                raise LevelSyntaxError(lineno, 1, "expected 'connect <button-id> <door-id>[,...]'")
            connections.setdefault(m.group(1), set()).update(m.group(2).split(","))
        elif word == "agent":
            m = re.fullmatch(r"agent (\d+) (\d+)\s*", ln)
            if not m:
                raise LevelSyntaxError(lineno, 1, "expected 'agent <x> <y>'")
            spawns.append((int(m.group(1)), int(m.group(2))))
        else:
            raise LevelSyntaxError(lineno, 1, f"unknown directive {word!r}")

    return Level(
        width=w,
        height=h,
        cells=tuple(rows),
        objects=objects,
        connections={b: frozenset(ds) for b, ds in connections.items()},
        spawn_points=tuple(spawns),
    )


def serialize_level(level: Level) -> str:
    out = ["LEVEL v1", f"size: {level.width} {level.height}", "grid:"]
    out.extend(level.cells)
    for d in level.doors.values():
        out.append(f"door {d.id} {d.pos[0]} {d.pos[1]} {d.points}")
    for b in level.buttons.values():
        out.append(f"button {b.id} {b.pos[0]} {b.pos[1]}")
    for bid in sorted(level.connections, key=natural_key):
        doors = sorted(level.connections[bid], key=natural_key)
        if doors:
            out.append(f"connect {bid} {','.join(doors)}")
    for x, y in level.spawn_points:
        out.append(f"agent {x} {y}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Truth state

class InteractResult(enum.Enum):
    OK = "ok"
    OUT_OF_RANGE = "out-of-range"
    # A door that would close has an agent standing in it.
    OBSTRUCTED = "obstructed"


@dataclass(frozen=True)
class ObjectSnapshot:
    id: str
    kind: str
    pos: Pos
    is_open: bool | None = None


@dataclass
class Observation:
    observer: str
    tick: int
    seq: int
    xs: np.ndarray
    ys: np.ndarray
    codes: np.ndarray
    visible_objects: tuple[ObjectSnapshot, ...]
    visible_agents: tuple[tuple[str, Pos], ...]
    origin: Pos | None = None

    @cached_property
    def visible_cells(self) -> frozenset[Pos]:
        return frozenset(zip(self.xs.tolist(), self.ys.tolist()))


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[Pos]:
    """Integer line from (x0, y0) to (x1, y1), endpoints included."""
    pts = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        pts.append((x, y))
        if x == x1 and y == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


@lru_cache(maxsize=None)
def _ray_table(radius: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Disc offsets and, per offset, the intermediate cells of its sight line.

    Intermediate cells are padded with (0, 0), the observer's own cell, which
    is never opaque.
    """
    offs = [(dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
            if dx * dx + dy * dy <= radius * radius]
    mids = [bresenham(0, 0, dx, dy)[1:-1] for dx, dy in offs]
    width = max(1, max(len(m) for m in mids))
    mx = np.zeros((len(offs), width), dtype=np.int64)
    my = np.zeros((len(offs), width), dtype=np.int64)
    for i, m in enumerate(mids):
        for j, (x, y) in enumerate(m):
            mx[i, j] = x
            my[i, j] = y
    o = np.array(offs, dtype=np.int64)
    return o[:, 0], o[:, 1], mx, my


class WorldState:
    """Mutable truth: door states, agent positions and the tick counter."""

    def __init__(self, level: Level, agent_pos: Mapping[str, Pos] | None = None):
        self.level = level
        self.door_open: dict[str, bool] = {d: False for d in level.doors}
        self.agent_pos: dict[str, Pos] = dict(agent_pos or {})
        self.tick = 0
        self._seq = 0
        self._opaque = level.wall_grid.copy()
        for d in level.doors.values():
            self._opaque[d.pos[1], d.pos[0]] = True
        for a, p in self.agent_pos.items():
            if not self.passable(p):
                raise ValueError(f"agent {a} placed on blocked cell {p}")

    @classmethod
    def initial(cls, level: Level, agents: Iterable[str]) -> "WorldState":
        spawns = level.spawn_points or ()
        if not spawns:
            raise LevelError("level has no spawn points")
        agents = list(agents)
        return cls(level, {a: spawns[i % len(spawns)] for i, a in enumerate(agents)})

    def copy(self) -> "WorldState":
        other = WorldState.__new__(WorldState)
        other.level = self.level
        other.door_open = dict(self.door_open)
        other.agent_pos = dict(self.agent_pos)
        other.tick = self.tick
        other._seq = self._seq
        other._opaque = self._opaque.copy()
        return other

    def door_vector(self) -> int:
        idx = self.level.door_index
        return sum(1 << idx[d] for d, o in self.door_open.items() if o)

    def passable(self, p: Pos) -> bool:
        if not self.level.in_bounds(p) or self.level.is_wall(p):
            return False
        obj = self.level.object_at.get(p)
        return not (isinstance(obj, Door) and not self.door_open[obj.id])

    def _pos(self, agent: str) -> Pos:
        try:
            return self.agent_pos[agent]
        except KeyError:
            raise UnknownAgentError(agent) from None

    def move(self, agent: str, d: Direction) -> bool:
        """Advance one cell; False (blocked) leaves the state unchanged."""
        x, y = self._pos(agent)
        nxt = (x + d.delta[0], y + d.delta[1])
        if not self.passable(nxt):
            return False
        self.agent_pos[agent] = nxt
        return True

    def interact(self, agent: str, obj_id: str) -> InteractResult:
        obj = self.level.objects.get(obj_id)
        if obj is None:
            raise KeyError(obj_id)
        if isinstance(obj, Door):
            raise NotInteractableError(f"doors are not directly interactable: {obj_id}")
        ax, ay = self._pos(agent)
        if max(abs(ax - obj.pos[0]), abs(ay - obj.pos[1])) > 1:
            return InteractResult.OUT_OF_RANGE
        doors = self.level.connections.get(obj_id, frozenset())
        occupied = set(self.agent_pos.values())
        for did in doors:
            if self.door_open[did] and self.level.objects[did].pos in occupied:
                return InteractResult.OBSTRUCTED
        for did in doors:
            self._set_door(did, not self.door_open[did])
        return InteractResult.OK

    def _set_door(self, did: str, is_open: bool) -> None:
        self.door_open[did] = is_open
        x, y = self.level.objects[did].pos
        self._opaque[y, x] = not is_open

    def observe(self, agent: str, view_distance: int) -> Observation:
        if view_distance < 1:
            raise ValueError("view_distance must be >= 1")
        ax, ay = self._pos(agent)
        ox, oy, mx, my = _ray_table(view_distance)
        lv = self.level
        r = view_distance
        # Pad with opaque cells so sight lines leaving the map are blocked.
        padded = np.ones((lv.height + 2 * r, lv.width + 2 * r), dtype=bool)
        padded[r:r + lv.height, r:r + lv.width] = self._opaque
        blocked = padded[my + (ay + r), mx + (ax + r)].any(axis=1)
        tx = ox + ax
        ty = oy + ay
        ok = ~blocked & (tx >= 0) & (tx < lv.width) & (ty >= 0) & (ty < lv.height)
        xs, ys = tx[ok], ty[ok]
        codes = lv.code_grid[ys, xs]
        self._seq += 1
        vis = set(zip(xs.tolist(), ys.tolist()))
        objs = []
        for o in lv.objects.values():
            if o.pos in vis:
                is_open = self.door_open[o.id] if isinstance(o, Door) else None
                objs.append(ObjectSnapshot(o.id, o.kind, o.pos, is_open))
        agents = tuple((a, p) for a, p in sorted(self.agent_pos.items())
                       if a != agent and p in vis)
        obs = Observation(agent, self.tick, self._seq, xs, ys, codes, tuple(objs), agents,
                          (ax, ay))
        obs.__dict__["visible_cells"] = frozenset(vis)
        return obs


def step_move(state: WorldState, agent: str, d: Direction) -> bool:
    return state.move(agent, d)


def interact(state: WorldState, agent: str, obj_id: str) -> InteractResult:
    return state.interact(agent, obj_id)


def observe(state: WorldState, agent: str, view_distance: int) -> Observation:
    return state.observe(agent, view_distance)

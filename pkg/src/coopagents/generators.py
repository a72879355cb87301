"""Procedural generators for the Basic-Level family and its logic variants.

Layout of a basic level of scale ``k``: an open ``10k x 10k`` hall enclosed
by a one-cell wall ring.  Ten doors sit in the ring, each guarding a dead-end
side room one cell wide and ``ROOM_DEPTH`` cells deep, with its button on the
hall cell directly in front of it.
"""

from __future__ import annotations

import math
import random
from dataclasses import replace

from .world import (
    Button,
    Door,
    GenerationError,
    Level,
    Pos,
    WALL,
    FLOOR,
)

ROOM_DEPTH = 3
MARGIN = ROOM_DEPTH + 2
N_DOORS = 10
HIGH_VALUE_DOORS = ("d2", "d3", "d6", "d9")


def hall_side(level: Level) -> int:
    side = level.width - 2 * MARGIN
    if side <= 0 or level.width != level.height:
        raise GenerationError("level is not a basic-level layout")
    return side


def hall_cells(level: Level) -> list[Pos]:
    s = hall_side(level)
    return [(x, y) for y in range(MARGIN, MARGIN + s) for x in range(MARGIN, MARGIN + s)]


def _in_hall(level: Level, p: Pos) -> bool:
    s = hall_side(level)
    return MARGIN <= p[0] < MARGIN + s and MARGIN <= p[1] < MARGIN + s


def _outward(level: Level, door: Door) -> Pos:
    """Unit step from the hall through the door into its side room."""
    s = hall_side(level)
    x, y = door.pos
    if y == MARGIN - 1:
        return (0, -1)
    if y == MARGIN + s:
        return (0, 1)
    if x == MARGIN - 1:
        return (-1, 0)
    if x == MARGIN + s:
        return (1, 0)
    raise GenerationError(f"{door.id} is not on the hall ring")


def room_cells(level: Level, door_id: str) -> list[Pos]:
    """Side-room cells behind a door, nearest first."""
    door = level.doors[door_id]
    dx, dy = _outward(level, door)
    return [(door.pos[0] + dx * i, door.pos[1] + dy * i) for i in range(1, ROOM_DEPTH + 1)]


def front_cell(level: Level, door_id: str) -> Pos:
    door = level.doors[door_id]
    dx, dy = _outward(level, door)
    return (door.pos[0] - dx, door.pos[1] - dy)


def _door_slots(s: int) -> list[tuple[int, int, Pos]]:
    """(side, offset, ring position) clockwise from the top-left corner."""
    lo, hi = MARGIN, MARGIN + s - 1
    slots = []
    slots += [(0, i, (lo + i, lo - 1)) for i in range(s)]            # top, left->right
    slots += [(1, i, (hi + 1, lo + i)) for i in range(s)]            # right, top->bottom
    slots += [(2, i, (hi - i, hi + 1)) for i in range(s)]            # bottom, right->left
    slots += [(3, i, (lo - 1, hi - i)) for i in range(s)]            # left, bottom->top
    return slots


def generate_basic_level(scale: int, seed: int) -> Level:
    if scale < 1:
        raise ValueError("scale must be >= 1")
    rng = random.Random(f"basic:{scale}:{seed}")
    s = 10 * scale
    size = s + 2 * MARGIN
    grid = [[WALL] * size for _ in range(size)]
    for y in range(MARGIN, MARGIN + s):
        for x in range(MARGIN, MARGIN + s):
            grid[y][x] = FLOOR

    # Spread the ten doors over the four sides (3/2/3/2, rotated by seed),
    # never on adjacent ring cells of the same side.  End offsets are skipped
    # so two doors around a corner cannot share a front cell.
    per_side = [3, 2, 3, 2]
    rot = rng.randrange(4)
    per_side = per_side[rot:] + per_side[:rot]
    slots = _door_slots(s)
    chosen: list[tuple[int, int, Pos]] = []
    for side in range(4):
        offs: list[int] = []
        candidates = list(range(1, s - 1))
        rng.shuffle(candidates)
        for off in candidates:
            if len(offs) == per_side[side]:
                break
            if all(abs(off - o) >= 2 for o in offs):
                offs.append(off)
        if len(offs) < per_side[side]:
            raise GenerationError("could not place doors")
        chosen += [sl for sl in slots if sl[0] == side and sl[1] in offs]
    chosen.sort(key=lambda sl: (sl[0], sl[1]))

    objects: dict = {}
    connections: dict = {}
    for i, (side, _, pos) in enumerate(chosen):
        did, bid = f"d{i}", f"b{i}"
        pts = 10 if did in HIGH_VALUE_DOORS else 1
        door = Door(did, pos, pts)
        objects[did] = door
        grid[pos[1]][pos[0]] = FLOOR
        dx, dy = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}[side]
        for k in range(1, ROOM_DEPTH + 1):
            grid[pos[1] + dy * k][pos[0] + dx * k] = FLOOR
        bpos = (pos[0] - dx, pos[1] - dy)
        objects[bid] = Button(bid, bpos)
        connections[bid] = frozenset({did})

    c = MARGIN + s // 2
    q1, q3 = MARGIN + s // 4, MARGIN + (3 * s) // 4
    spawns = [(c, c), (q1, q1), (q3, q3), (q3, q1), (q1, q3)]
    occupied = {o.pos for o in objects.values()}
    spawns = [p for p in dict.fromkeys(spawns) if p not in occupied]

    return Level(
        width=size,
        height=size,
        cells=tuple("".join(r) for r in grid),
        objects=objects,
        connections=connections,
        spawn_points=tuple(spawns),
    )


def _move_button(level: Level, objects: dict, bid: str, pos: Pos) -> None:
    objects[bid] = Button(bid, pos)


def apply_distant_connections(level: Level, count: int, seed: int) -> Level:
    """Relocate the buttons of ``count`` doors far away into the hall."""
    doors = list(level.doors)
    if not 0 <= count <= len(doors):
        raise GenerationError(f"count must be in 0..{len(doors)}")
    if count == 0:
        return level
    # One shuffled order per seed; taking a prefix keeps variants nested.
    rng = random.Random(f"distant:{seed}")
    order = rng.sample(doors, len(doors))
    far = hall_side(level) / 2
    hall = hall_cells(level)
    objects = dict(level.objects)
    taken = {o.pos for o in objects.values()} | set(level.spawn_points)
    owner = {d: b for b, ds in level.connections.items() for d in ds}
    for did in order[:count]:
        bid = owner.get(did)
        if bid is None:
            raise GenerationError(f"{did} has no button")
        dp = level.doors[did].pos
        eligible = [p for p in hall
                    if p not in taken and math.dist(p, dp) >= far]
        if not eligible:
            raise GenerationError(f"no far cell for {did}")
        pos = rng.choice(eligible)
        taken.discard(objects[bid].pos)
        taken.add(pos)
        _move_button(level, objects, bid, pos)
    return replace(level, objects=objects)


def apply_chained_connections(level: Level, count: int, seed: int) -> Level:
    """Hide the buttons of ``count`` target doors inside other doors' rooms."""
    doors = list(level.doors)
    if not 0 <= count <= 3:
        raise GenerationError("chain count must be in 0..3")
    if 2 * count > len(doors):
        raise GenerationError("not enough doors for disjoint pairs")
    if count == 0:
        return level
    rng = random.Random(f"chained:{seed}")
    picked = rng.sample(doors, min(6, len(doors)))[:2 * count]
    objects = dict(level.objects)
    owner = {d: b for b, ds in level.connections.items() for d in ds}
    for k in range(count):
        guard, target = picked[2 * k], picked[2 * k + 1]
        bid = owner[target]
        _move_button(level, objects, bid, room_cells(level, guard)[-1])
    return replace(level, objects=objects)


def chain_pairs(level: Level) -> list[tuple[str, str]]:
    """(guard, target) pairs whose target button sits in the guard's room."""
    pairs = []
    for bid, ds in level.connections.items():
        bp = level.objects[bid].pos
        for guard in level.doors:
            try:
                cells = room_cells(level, guard)
            except GenerationError:
                continue
            if bp in cells:
                pairs.extend((guard, t) for t in sorted(ds) if t != guard)
    return sorted(pairs)


def apply_multi_connections(level: Level, count: int, seed: int) -> Level:
    """Wire ``count`` buttons to one or two extra doors each."""
    buttons = list(level.buttons)
    if not 0 <= count <= len(buttons):
        raise GenerationError(f"count must be in 0..{len(buttons)}")
    if count == 0:
        return level
    rng = random.Random(f"multi:{seed}")
    conns = dict(level.connections)
    for bid in rng.sample(buttons, len(buttons))[:count]:
        have = conns.get(bid, frozenset())
        extra = [d for d in level.doors if d not in have]
        k = min(len(extra), rng.randint(1, 2))
        conns[bid] = have | frozenset(rng.sample(extra, k))
    return replace(level, connections=conns)


def generate_level(spec: str, seed: int) -> Level:
    """Build a level from a generator spec such as ``basic:3`` or
    ``basic:3+distant:4+chained:1``."""
    parts = spec.split("+")
    kind, _, arg = parts[0].partition(":")
    if kind != "basic" or not arg.isdigit():
        raise ValueError(f"bad generator spec {spec!r}")
    level = generate_basic_level(int(arg), seed)
    ops = {
        "distant": apply_distant_connections,
        "chained": apply_chained_connections,
        "multi": apply_multi_connections,
    }
    for p in parts[1:]:
        name, _, n = p.partition(":")
        if name not in ops or not n.isdigit():
            raise ValueError(f"bad generator spec {spec!r}")
        level = ops[name](level, int(n), seed)
    return level

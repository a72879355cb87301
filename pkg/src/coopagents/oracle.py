"""Brute-force reachability over (agent position, door-state vector).

The search is single-agent.  With toggling switches only, anything a team can
reach one agent can reach too: every interleaving of team actions can be
replayed by one agent walking between the interaction points in order, since
moves change no object state and toggles do not depend on who presses.

Positions are kept as one bitmask per door vector, so closing a set of
positions under movement is a handful of big-integer shift/and operations.
The predicate "target open and visible" is taken as "target open and the
agent within Chebyshev distance 1 of it", from where a door is always in view.
"""

from __future__ import annotations

from collections import deque

from .world import Door, Level, Pos


class OracleCapExceeded(RuntimeError):
    pass


DEFAULT_CAP = 1 << 22


class _Masks:
    def __init__(self, level: Level, blocked: frozenset[str] = frozenset()):
        w, h = level.width, level.height
        self.w = w
        self.full = (1 << (w * h)) - 1
        floor = 0
        for y, row in enumerate(level.cells):
            for x, c in enumerate(row):
                if c != "#":
                    floor |= 1 << (y * w + x)
        self.doors = list(level.doors)
        self.door_bit = {d: 1 << (level.doors[d].pos[1] * w + level.doors[d].pos[0])
                         for d in self.doors}
        for b in self.door_bit.values():
            floor &= ~b
        self.floor = floor
        col0 = 0
        col_last = 0
        for y in range(h):
            col0 |= 1 << (y * w)
            col_last |= 1 << (y * w + w - 1)
        self.not_col0 = self.full & ~col0
        self.not_col_last = self.full & ~col_last
        self.index = {d: i for i, d in enumerate(self.doors)}
        self.buttons = []
        for bid, b in level.buttons.items():
            if bid in blocked:
                continue
            doors = sorted(level.connections.get(bid, ()))
            vec = 0
            for d in doors:
                vec |= 1 << self.index[d]
            self.buttons.append((self._near(b.pos, w, h), vec, doors))
        self.near_door = {d: self._near(level.doors[d].pos, w, h) for d in self.doors}

    @staticmethod
    def _near(p: Pos, w: int, h: int) -> int:
        m = 0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                x, y = p[0] + dx, p[1] + dy
                if 0 <= x < w and 0 <= y < h:
                    m |= 1 << (y * w + x)
        return m

    def passable(self, vec: int) -> int:
        m = self.floor
        for d, i in self.index.items():
            if vec >> i & 1:
                m |= self.door_bit[d]
        return m

    def closure(self, seed: int, passable: int) -> int:
        w = self.w
        cur = seed & passable
        while True:
            nxt = cur | (((cur << 1) & self.not_col0) | ((cur >> 1) & self.not_col_last)
                         | (cur << w) | (cur >> w)) & passable
            if nxt == cur:
                return cur
            cur = nxt


def reachable_states(level: Level, start: Pos | None = None, cap: int = DEFAULT_CAP,
                     blocked_buttons: frozenset[str] = frozenset()) -> dict[int, int]:
    """Door vector -> bitmask of agent positions reachable with it."""
    n_cells = level.width * level.height
    if n_cells * (1 << len(level.doors)) > cap:
        raise OracleCapExceeded(f"{n_cells} cells x 2^{len(level.doors)} door states > {cap}")
    if start is None:
        if not level.spawn_points:
            raise ValueError("level has no spawn point")
        start = level.spawn_points[0]
    m = _Masks(level, blocked_buttons)
    reached: dict[int, int] = {0: 1 << (start[1] * level.width + start[0])}
    queue = deque([0])
    queued = {0}
    while queue:
        vec = queue.popleft()
        queued.discard(vec)
        pas = m.passable(vec)
        region = m.closure(reached[vec], pas)
        reached[vec] = region
        for near, bvec, doors in m.buttons:
            at = region & near
            if not at:
                continue
            # A door closing on the agent's own cell refuses the interaction.
            for d in doors:
                if vec >> m.index[d] & 1:
                    at &= ~m.door_bit[d]
            if not at:
                continue
            nvec = vec ^ bvec
            old = reached.get(nvec, 0)
            if at & ~old:
                reached[nvec] = old | at
                if nvec not in queued:
                    queued.add(nvec)
                    queue.append(nvec)
    return reached


def reachable_doors(level: Level, **kw) -> set[str]:
    """Doors whose open-and-visible state is reachable from the initial state."""
    m = _Masks(level, kw.get("blocked_buttons", frozenset()))
    states = reachable_states(level, **kw)
    out = set()
    for vec, region in states.items():
        for d, i in m.index.items():
            if vec >> i & 1 and region & m.near_door[d]:
                out.add(d)
    return out


def oracle_reachable(level: Level, target: str, **kw) -> bool:
    if not isinstance(level.objects.get(target), Door):
        raise KeyError(target)
    return target in reachable_doors(level, **kw)

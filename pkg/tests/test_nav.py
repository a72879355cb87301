from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopagents.generators import generate_level
from coopagents.nav import (
    AgentBelief,
    Exploration,
    ExplorePolicy,
    UnknownCellError,
    approach_path,
    explore_path,
    find_path,
    merge_beliefs,
    next_exploration_target,
    update_belief,
)
from coopagents.world import CODE_DOOR, CODE_FLOOR, CODE_WALL, Direction, WorldState


def bfs_dist(passable: np.ndarray, start, goal_mask: np.ndarray):
    """Reference breadth-first distance to the nearest goal cell, or None."""
    h, w = passable.shape
    seen = {start}
    q = deque([(start, 0)])
    while q:
        (x, y), d = q.popleft()
        if goal_mask[y, x]:
            return d
        for dx, dy in ((0, -1), (-1, 0), (1, 0), (0, 1)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and (nx, ny) not in seen and passable[ny, nx]:
                seen.add((nx, ny))
                q.append(((nx, ny), d + 1))
    return None


def random_belief(seed: int, density: float, w: int = 12, h: int = 9) -> AgentBelief:
    rng = np.random.default_rng(seed)
    b = AgentBelief.empty("a0", w, h)
    b.known = rng.choice([0, CODE_FLOOR, CODE_WALL], size=(h, w),
                         p=[0.2, 0.8 - density, density]).astype(np.int8)
    b.known[0, 0] = CODE_FLOOR
    b.version += 1
    return b


def walk_beliefs(seed: int, steps: int, n_agents: int = 2):
    """Beliefs of agents taking random walks through a generated level."""
    level = generate_level("basic:1", seed % 5)
    ids = [f"a{i}" for i in range(n_agents)]
    world = WorldState.initial(level, ids)
    beliefs = {a: AgentBelief.empty(a, level.width, level.height) for a in ids}
    rng = np.random.default_rng(seed)
    dirs = list(Direction)
    for t in range(steps):
        world.tick = t
        for a in ids:
            update_belief(beliefs[a], world.observe(a, 4))
            world.move(a, dirs[rng.integers(4)])
            if rng.random() < 0.1:
                world.interact(a, f"b{rng.integers(10)}")
    return beliefs


def valid_path(belief: AgentBelief, path, start, goal):
    assert path[0] == start and path[-1] == goal
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        assert abs(ax - bx) + abs(ay - by) == 1
        assert belief.passable((bx, by))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.45), st.integers(0, 11), st.integers(0, 8))
def test_find_path_agrees_with_bfs(seed, density, gx, gy):
    b = random_belief(seed, density)
    goal = (gx, gy)
    if not b.is_known(goal):
        with pytest.raises(UnknownCellError):
            find_path(b, (0, 0), goal)
        return
    mask = np.zeros_like(b.known, dtype=bool)
    mask[gy, gx] = True
    ref = bfs_dist(b.passable_grid(), (0, 0), mask) if b.passable(goal) or goal == (0, 0) else None
    path = find_path(b, (0, 0), goal)
    if ref is None:
        assert path is None
    else:
        valid_path(b, path, (0, 0), goal)
        assert len(path) - 1 == ref


def test_find_path_is_deterministic_on_ties():
    b = AgentBelief.empty("a0", 4, 4)
    b.known[:] = CODE_FLOOR
    p1 = find_path(b, (0, 0), (3, 3))
    assert p1 == find_path(b, (0, 0), (3, 3))
    assert len(p1) == 7


def test_closed_doors_block_and_open_doors_pass(two_rooms):
    w = WorldState(two_rooms, {"a0": (3, 2)})
    b = AgentBelief.empty("a0", two_rooms.width, two_rooms.height)
    b.known[:] = two_rooms.code_grid
    update_belief(b, w.observe("a0", 6))
    assert b.known[2, 4] == CODE_DOOR
    assert find_path(b, (3, 2), (5, 2)) is None
    w.interact("a0", "b0")
    w.tick = 1
    update_belief(b, w.observe("a0", 6))
    assert find_path(b, (3, 2), (5, 2)) == [(3, 2), (4, 2), (5, 2)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.45))
def test_frontier_matches_definition(seed, density):
    b = random_belief(seed, density)
    h, w = b.known.shape
    fr = b.frontier_grid()
    for y in range(h):
        for x in range(w):
            unknown_nb = any(0 <= x + dx < w and 0 <= y + dy < h and b.known[y + dy, x + dx] == 0
                             for dx, dy in ((0, 1), (1, 0), (0, -1), (-1, 0)))
            assert fr[y, x] == (b.passable((x, y)) and unknown_nb)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.45))
def test_explore_path_reaches_nearest_frontier(seed, density):
    b = random_belief(seed, density)
    ref = bfs_dist(b.passable_grid(), (0, 0), b.frontier_grid())
    path = explore_path(b, (0, 0))
    if ref is None:
        assert path is None
        assert next_exploration_target(b, (0, 0)) is None
    else:
        valid_path(b, path, (0, 0), path[-1])
        assert b.frontier_grid()[path[-1][1], path[-1][0]]
        assert len(path) - 1 == ref
        assert next_exploration_target(b, (0, 0), Exploration(ExplorePolicy.AGGRESSIVE)) == path[-1]


def test_teammate_closer_frontier_is_left_to_the_teammate():
    b = AgentBelief.empty("a0", 11, 3)
    b.known[1, 1:10] = CODE_FLOOR
    b.known[0, :] = b.known[2, :] = CODE_WALL
    # frontiers at both ends of the corridor; we stand left of centre
    assert explore_path(b, (4, 1))[-1] == (1, 1)
    assert explore_path(b, (4, 1), others=[(2, 1)])[-1] == (9, 1)
    # the only frontier left is the teammate's: take it anyway
    b.known[1, 10] = CODE_WALL
    b.version += 1
    assert explore_path(b, (4, 1), others=[(8, 1)])[-1] == (1, 1)


def test_approach_path_plans_through_unknown():
    b = AgentBelief.empty("a0", 8, 3)
    b.known[1, 0:2] = CODE_FLOOR
    path = approach_path(b, (0, 1), (7, 1))
    assert path[0] == (0, 1)
    assert max(abs(path[-1][0] - 7), abs(path[-1][1] - 1)) <= 1
    b.known[:, 4] = CODE_WALL
    b.version += 1
    assert approach_path(b, (0, 1), (7, 1)) is None


def test_approach_path_never_ends_in_a_doorway(two_rooms):
    b = AgentBelief.empty("a0", two_rooms.width, two_rooms.height)
    b.known[:] = two_rooms.code_grid
    path = approach_path(b, (1, 2), (4, 2))
    assert path[-1] == (3, 2)
    assert approach_path(b, (1, 2), (4, 2), assume_open=[(4, 2)])[-1] == (3, 2)
    assert approach_path(b, (1, 2), (7, 2)) is None
    assert approach_path(b, (1, 2), (7, 2), assume_open=[(4, 2)])[-1] == (6, 2)


def test_update_belief_records_cells_objects_and_agents(two_rooms):
    w = WorldState(two_rooms, {"a0": (1, 2), "a1": (2, 3)})
    b = AgentBelief.empty("a0", two_rooms.width, two_rooms.height)
    update_belief(b, w.observe("a0", 6))
    assert b.known[2, 1] == CODE_FLOOR and b.known[0, 1] == CODE_WALL
    assert b.last_seen["b0"].kind == "button"
    assert b.last_seen["a0"].pos == (1, 2)
    assert b.last_seen["a1"].pos == (2, 3)
    assert b.door_seen_open("d0") is False
    assert b.known_cells[(4, 2)] == ("door", "d0")


def test_agent_moves_do_not_invalidate_plans(two_rooms):
    w = WorldState(two_rooms, {"a0": (1, 2)})
    b = AgentBelief.empty("a0", two_rooms.width, two_rooms.height)
    b.known[:] = two_rooms.code_grid
    update_belief(b, w.observe("a0", 10))
    v = b.version
    w.move("a0", Direction.S)
    w.tick = 1
    update_belief(b, w.observe("a0", 10))
    assert b.version == v
    assert b.last_seen["a0"].pos == (1, 3)


def test_stale_observations_do_not_overwrite(two_rooms):
    w = WorldState(two_rooms, {"a0": (3, 2)})
    w.tick = 1
    old = w.observe("a0", 6)
    w.interact("a0", "b0")
    w.tick = 2
    new = w.observe("a0", 6)
    b = AgentBelief.empty("a0", two_rooms.width, two_rooms.height)
    update_belief(b, new)
    update_belief(b, old)
    assert b.door_seen_open("d0") is True


def same(a: AgentBelief, b: AgentBelief) -> bool:
    return (np.array_equal(a.known, b.known) and a.last_seen == b.last_seen
            and a.tried_marks == b.tried_marks)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40))
def test_merge_is_commutative_idempotent_associative(seed, steps):
    bs = walk_beliefs(seed, steps, 3)
    a, b, c = bs["a0"], bs["a1"], bs["a2"]
    a.mark("d0", "b1", 1)
    b.mark("d3", "b2", 4)
    assert same(merge_beliefs(a, b), merge_beliefs(b, a))
    assert same(merge_beliefs(a, a), a)
    ab = merge_beliefs(a, b)
    assert same(merge_beliefs(ab, b), ab)
    assert same(merge_beliefs(ab, c), merge_beliefs(a, merge_beliefs(b, c)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 40))
def test_belief_is_monotone(seed, steps):
    level = generate_level("basic:1", seed % 5)
    world = WorldState.initial(level, ["a0"])
    b = AgentBelief.empty("a0", level.width, level.height)
    rng = np.random.default_rng(seed)
    prev_known = b.known.copy()
    prev_stamps: dict = {}
    for t in range(steps):
        world.tick = t
        update_belief(b, world.observe("a0", 5))
        assert np.all((prev_known == 0) | (b.known == prev_known))
        for oid, s in prev_stamps.items():
            assert b.last_seen[oid].stamp >= s
        prev_known = b.known.copy()
        prev_stamps = {k: s.stamp for k, s in b.last_seen.items()}
        world.move("a0", list(Direction)[rng.integers(4)])


def test_exploration_policy_parsing():
    assert Exploration.parse("gradual").policy is ExplorePolicy.GRADUAL
    assert Exploration.parse("budget:50") == Exploration(ExplorePolicy.BUDGET, 50)
    assert str(Exploration.parse("budget:50")) == "budget:50"
    for bad in ("budget", "budget:0", "lazy"):
        with pytest.raises(ValueError):
            Exploration.parse(bad)

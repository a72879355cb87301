import random
from collections import deque
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from coopagents.blackboard import Blackboard, BlackboardError, SyncMode
from coopagents.generators import generate_level
from coopagents.oracle import OracleCapExceeded, oracle_reachable, reachable_doors
from coopagents.runner import (
    InvariantViolation,
    MetricsReport,
    RunConfig,
    record_points,
    replay,
    run,
    write_run,
)
from coopagents.suites import parse_agents
from coopagents.world import Direction, InteractResult, WorldState, load_level


def brute_force_doors(level) -> set[str]:
    """Explicit search over (position, door states) through the world model."""
    w0 = WorldState.initial(level, ["a0"])
    start = (w0.agent_pos["a0"], tuple(sorted(w0.door_open.items())))
    seen = {start}
    q = deque([start])
    found = set()
    while q:
        pos, doors = q.popleft()
        for d, is_open in doors:
            dp = level.doors[d].pos
            if is_open and max(abs(dp[0] - pos[0]), abs(dp[1] - pos[1])) <= 1:
                found.add(d)
        nexts = []
        for act in list(Direction) + sorted(level.buttons):
            w = w0.copy()
            w.agent_pos["a0"] = pos
            w.door_open = dict(doors)
            if isinstance(act, Direction):
                if not w.move("a0", act):
                    continue
            elif w.interact("a0", act) is not InteractResult.OK:
                continue
            nexts.append((w.agent_pos["a0"], tuple(sorted(w.door_open.items()))))
        for s in nexts:
            if s not in seen:
                seen.add(s)
                q.append(s)
    return found


def tiny_level(seed: int):
    rng = random.Random(seed)
    w, h = 8, 6
    grid = [["#" if x in (0, w - 1) or y in (0, h - 1) else "." for x in range(w)] for y in range(h)]
    for _ in range(rng.randint(0, 10)):
        grid[rng.randint(1, h - 2)][rng.randint(1, w - 2)] = "#"
    free = [(x, y) for y in range(h) for x in range(w) if grid[y][x] == "."]
    rng.shuffle(free)
    n_doors, n_buttons = rng.randint(1, 3), rng.randint(1, 3)
    if len(free) < n_doors + n_buttons + 1:
        return None
    doors, buttons, spawn = free[:n_doors], free[n_doors:n_doors + n_buttons], free[-1]
    lines = ["LEVEL v1", f"size: {w} {h}", "grid:"] + ["".join(r) for r in grid]
    lines += [f"door d{i} {x} {y} {i + 1}" for i, (x, y) in enumerate(doors)]
    lines += [f"button b{i} {x} {y}" for i, (x, y) in enumerate(buttons)]
    for i in range(n_buttons):
        for d in rng.sample(range(n_doors), rng.randint(1, n_doors)):
            lines.append(f"connect b{i} d{d}")
    lines.append(f"agent {spawn[0]} {spawn[1]}")
    return load_level("\n".join(lines) + "\n")


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 1 << 30))
def test_oracle_matches_explicit_search(seed):
    level = tiny_level(seed)
    if level is None:
        return
    assert reachable_doors(level) == brute_force_doors(level)


def test_oracle_on_fixtures(two_rooms, chained):
    assert reachable_doors(two_rooms) == {"d0"}
    assert reachable_doors(chained) == {"d0", "d1"}
    assert not oracle_reachable(chained, "d1", blocked_buttons=frozenset({"b0"}))
    with pytest.raises(KeyError):
        oracle_reachable(chained, "b0")
    with pytest.raises(OracleCapExceeded):
        reachable_doors(chained, cap=10)


def test_agents_never_beat_the_oracle():
    for seed in range(3):
        level = generate_level("basic:1+chained:1+multi:2", seed)
        r = run(RunConfig("basic:1+chained:1+multi:2", parse_agents("eager*2"),
                          SyncMode.EXTENDED, seed=seed))
        done = {t[2:] for t in r.per_task}
        assert done <= reachable_doors(level)


def test_runs_are_deterministic():
    cfg = RunConfig("basic:2+distant:2", parse_agents("high:5,low:5"), SyncMode.EXTENDED, seed=4)
    a, b = run(cfg), run(cfg)
    assert a.csv_text() == b.csv_text()
    assert a.audit == b.audit
    assert run(replace(cfg, seed=5)).audit != a.audit


def test_replay_reproduces_the_final_world(chained):
    r = run(RunConfig("fixture", parse_agents("eager*2"), global_budget=2000), chained)
    w = replay(chained, 2, r.audit)
    assert w.agent_pos == r.final_world.agent_pos
    assert w.door_open == r.final_world.door_open


def test_completed_basic_level_scores_everything():
    r = run(RunConfig("basic:1", seed=0))
    assert r.finished and r.termination == "all-done"
    assert r.final_points == r.total_points == 46
    ticks = [t for t, _ in r.points_timeline]
    points = [p for _, p in r.points_timeline]
    assert ticks == sorted(set(ticks)) and points == sorted(points)
    assert r.makespan == r.ticks == r.total_ticks_to_all_done
    assert 0 < r.exploration_coverage <= 1


def test_budget_exhaustion_is_reported():
    r = run(RunConfig("basic:3", global_budget=50))
    assert not r.finished and r.termination == "budget"
    assert r.makespan == 50 and r.ticks == 50
    assert r.unfinished
    assert "total_ticks_to_all_done: dnf" in r.summary()
    assert r.csv_text().splitlines()[-1].startswith("50,end,,,")


def test_csv_and_summary_shape(tmp_path, two_rooms):
    r = run(RunConfig("fixture", global_budget=2000), two_rooms)
    lines = r.csv_text().splitlines()
    assert lines[0] == "tick,event,agent,task,points_cum,detail"
    assert any(",complete,a0,T_d0,10," in l for l in lines)
    assert lines[-1].endswith(f"termination=all-done;makespan={r.makespan};total_points=10")
    keys = [l.split(":")[0] for l in r.summary().splitlines()]
    assert keys[:4] == ["total_ticks_to_all_done", "points_timeline", "per_task",
                        "exploration_coverage"]
    write_run(r, tmp_path / "x" / "run.csv")
    assert (tmp_path / "x" / "run.csv").read_text() == r.csv_text()


def test_record_points_merges_same_tick():
    r = MetricsReport(None)
    record_points(r, 3, 1)
    record_points(r, 3, 10)
    record_points(r, 9, 1)
    assert r.points_timeline == [(3, 11), (9, 12)]
    assert r.ticks_to_points(12) == 9 and r.ticks_to_points(13) is None
    with pytest.raises(ValueError):
        record_points(r, 2, 1)


def test_blackboard_errors_surface_with_the_audit(monkeypatch, two_rooms):
    calls = {"n": 0}

    def broken(self):
        calls["n"] += 1
        if calls["n"] > 1:
            raise BlackboardError("boom")

    monkeypatch.setattr(Blackboard, "check_partition", broken)
    with pytest.raises(InvariantViolation) as e:
        run(RunConfig("fixture", global_budget=2000), two_rooms)
    assert "boom" in str(e.value)
    assert ",move,a0," in e.value.audit


def test_sync_tax_slows_extended_teams():
    base = RunConfig("basic:3", parse_agents("high:5,low:5"), SyncMode.EXTENDED, seed=1)
    taxed = replace(base, sync_every=10, sync_tax=5)
    assert run(taxed).ticks > run(base).ticks


@pytest.mark.parametrize("kw", [dict(agents=()), dict(global_budget=0), dict(per_task_budget=0),
                                dict(view_distance=0), dict(sync_every=0), dict(sync_tax=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        RunConfig("basic:1", **kw)


def test_task_budget_scales_with_level(two_rooms):
    assert RunConfig("basic:3").task_budget(generate_level("basic:3", 0)) == 1200
    assert RunConfig("x", per_task_budget=7).task_budget(two_rooms) == 7
    assert RunConfig("x").task_budget(two_rooms) == 400

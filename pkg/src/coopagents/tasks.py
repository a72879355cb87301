from __future__ import annotations

from dataclasses import dataclass

from .world import Door, Level


@dataclass(frozen=True)
class TestingTask:
    """Verify that a state where ``target`` satisfies ``psi`` is reachable.

    ``stop_budget`` is the per-attempt tick budget after which an attempt is
    abandoned; ``enabler_kind`` is the object kind tried by the dynamic goal.
    """

    __test__ = False  # not a pytest class

    id: str
    target: str
    psi: str = "door-open"
    stop_budget: int = 400
    value: int = 1
    enabler_kind: str = "button"

    def __post_init__(self):
        if self.stop_budget <= 0:
            raise ValueError("stop budget must be positive")


def make_tasks(level: Level, stop_budget: int) -> dict[str, TestingTask]:
    """One door-open task per door, keyed by task id ``T_<door>``."""
    out = {}
    for d in level.doors.values():
        assert isinstance(d, Door)
        out[f"T_{d.id}"] = TestingTask(f"T_{d.id}", d.id, stop_budget=stop_budget, value=d.points)
    return out

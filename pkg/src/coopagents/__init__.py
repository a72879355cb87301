"""Cooperative test agents solving door-reachability tasks in grid levels."""

from .blackboard import Blackboard, BlackboardError, SyncMode
from .runner import AgentSpec, InvariantViolation, MetricsReport, RunConfig, run
from .world import Level, LevelError, WorldState, load_level, serialize_level

__all__ = [
    "AgentSpec",
    "Blackboard",
    "BlackboardError",
    "InvariantViolation",
    "Level",
    "LevelError",
    "MetricsReport",
    "RunConfig",
    "SyncMode",
    "WorldState",
    "load_level",
    "run",
    "serialize_level",
]

"""Saturated consensus control for second-order uncertain multiagent systems."""

from .controller import (
    AgentControllerParams,
    ConstraintSpec,
    NeighborView,
    UncertaintyBounds,
    Variant,
    check_feasibility,
    control,
    settling_bounds,
    suggest_params,
)
from .engine import ClosedLoop, MonitorReport, TrajectoryTrace, run, simulate
from .graph import DirectedGraph
from .plant import ManipulatorParams, UncertaintyModel
from .scenario import AgentState, Scenario, SimConfig

__all__ = [
    "AgentControllerParams",
    "AgentState",
    "ClosedLoop",
    "ConstraintSpec",
    "DirectedGraph",
    "ManipulatorParams",
    "MonitorReport",
    "NeighborView",
    "Scenario",
    "SimConfig",
    "TrajectoryTrace",
    "UncertaintyBounds",
    "UncertaintyModel",
    "Variant",
    "check_feasibility",
    "control",
    "run",
    "settling_bounds",
    "simulate",
    "suggest_params",
]

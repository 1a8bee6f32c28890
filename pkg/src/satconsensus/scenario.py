"""Scenario definition and its canonical JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .controller import (
    AgentControllerParams,
    ConstraintSpec,
    FeasibilityReport,
    UncertaintyBounds,
    Variant,
    alpha_interval,
    check_feasibility,
)
from .errors import AssumptionViolated, InfeasibleProblem, ScenarioError
from .graph import DirectedGraph, has_spanning_tree, in_degrees, is_strongly_connected
from .plant import ManipulatorParams, UncertaintyModel


@dataclass(frozen=True)
class AgentState:
    x: float
    v: float
    x_hat: float | None = None


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 60.0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ScenarioError("dt must be positive")
        if not self.dt <= self.t_end:
            raise ScenarioError("dt must not exceed t_end")
        if not (isinstance(self.record_stride, int) and self.record_stride >= 1):
            raise ScenarioError("record_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def n_samples(self) -> int:
        return 1 + int(math.floor(self.t_end / (self.dt * self.record_stride) + 1e-9))


@dataclass(frozen=True, eq=False)
class Scenario:
    graph: DirectedGraph
    variant: Variant
    constraints: ConstraintSpec
    bounds: UncertaintyBounds
    params: tuple[AgentControllerParams, ...]
    plants: tuple[UncertaintyModel | ManipulatorParams, ...]
    initial_states: tuple[AgentState, ...]
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    name: str = "scenario"
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "plants", tuple(self.plants))
        object.__setattr__(self, "initial_states", tuple(self.initial_states))
        self._validate()

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> float:
        return self.params[0].m

    @property
    def is_manipulator(self) -> bool:
        return isinstance(self.plants[0], ManipulatorParams)

    def _validate(self):
        n = self.graph.n
        if not (len(self.params) == len(self.plants) == len(self.initial_states) == n):
            raise ScenarioError(
                f"params ({len(self.params)}), plants ({len(self.plants)}) and initial states "
                f"({len(self.initial_states)}) must each have graph.n = {n} entries"
            )
        if len({p.m for p in self.params}) != 1:
            raise ScenarioError("the reference amplitude m must be shared by all agents")
        kinds = {isinstance(p, ManipulatorParams) for p in self.plants}
        if len(kinds) != 1:
            raise ScenarioError("plants must be all manipulators or all double integrators")
        if (self.variant is Variant.MANIPULATOR) != self.is_manipulator:
            raise ScenarioError("the manipulator variant must be paired with manipulator plants and vice versa")
        if self.variant.symmetric_only and not self.constraints.is_symmetric:
            raise ScenarioError(f"{self.variant.value} requires symmetric velocity constraints (v_min = -v_max)")
        c = self.constraints
        for i, s in enumerate(self.initial_states):
            if not (math.isfinite(s.x) and c.v_min <= s.v <= c.v_max):
                raise ScenarioError(
                    f"agent {i + 1}: initial velocity {s.v} violates the initial-velocity assumption "
                    f"v_min <= v(0) <= v_max ([{c.v_min}, {c.v_max}])"
                )

    def check_graph_assumptions(self):
        if self.variant.needs_strong_connectivity:
            if not is_strongly_connected(self.graph):
                raise AssumptionViolated(f"{self.variant.value} controller requires a strongly connected graph")
        elif not has_spanning_tree(self.graph):
            raise AssumptionViolated(f"{self.variant.value} controller requires a graph with a spanning tree")

    def degrees(self) -> np.ndarray:
        return in_degrees(self.graph)

    def feasibility(self) -> list[FeasibilityReport]:
        """Per-agent parameter reports.

        Raises:
            InfeasibleProblem: no admissible alpha exists for these bounds.
        """
        lo, hi = alpha_interval(self.variant, self.bounds, self.constraints)
        if not lo < hi:
            raise InfeasibleProblem(
                f"empty alpha interval ({lo:.6g}, {hi:.6g}): the known bounds leave no control authority"
            )
        degrees = self.degrees()
        return [
            check_feasibility(
                self.variant, p, self.bounds, self.constraints,
                None if self.variant is Variant.FILTER else float(degrees[i]),
            )
            for i, p in enumerate(self.params)
        ]

    def plant_envelope(self) -> tuple[float, float, float, float]:
        """True ``(min b, max b, max |tau|, max phi)`` over all agents."""
        if self.is_manipulator:
            bs = [p.b for p in self.plants]
            return min(bs), max(bs), max(p.tau for p in self.plants), max(p.phi for p in self.plants)
        env = [p.envelope() for p in self.plants]
        return min(e[0] for e in env), max(e[1] for e in env), max(e[2] for e in env), 0.0

    def with_overrides(self, dt=None, t_end=None, seed=None, record_stride=None) -> "Scenario":
        """Copy with new simulation settings; noise paths are redrawn to match.

        A new ``seed`` reseeds every noise model as ``seed + agent index``.
        """
        sim = SimConfig(
            dt=self.sim.dt if dt is None else dt,
            t_end=self.sim.t_end if t_end is None else t_end,
            record_stride=self.sim.record_stride if record_stride is None else record_stride,
        )
        new_seed = self.seed if seed is None else seed
        plants = []
        for i, p in enumerate(self.plants):
            if isinstance(p, UncertaintyModel) and p.kind == "noise":
                data = p.to_json()
                if seed is not None:
                    data["seed"] = new_seed + i
                p = UncertaintyModel.from_json(data, hold=sim.dt, horizon=sim.t_end)
            plants.append(p)
        return replace(self, sim=sim, seed=new_seed, plants=tuple(plants))

    def to_json(self) -> dict:
        c, b = self.constraints, self.bounds
        return {
            "name": self.name,
            "description": self.description,
            "variant": self.variant.value,
            "seed": self.seed,
            "graph": self.graph.to_json(),
            "constraints": {"v_min": c.v_min, "v_max": c.v_max, "u_max": c.u_max},
            "bounds": {"b_min": b.b_min, "tau_max": b.tau_max, "phi_max": b.phi_max},
            "m": self.m,
            "params": [{"alpha": p.alpha, "z": p.z, "k": p.k, "gamma": p.gamma} for p in self.params],
            "plants": [p.to_json() for p in self.plants],
            "initial_states": [{"x": s.x, "v": s.v} for s in self.initial_states],
            "sim": {
                "dt_seconds": self.sim.dt,
                "t_end_seconds": self.sim.t_end,
                "record_stride": self.sim.record_stride,
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        try:
            return cls._from_json(data)
        except (KeyError, TypeError, ValueError) as exc:
            detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            raise ScenarioError(f"invalid scenario: {detail}") from exc

    @classmethod
    def _from_json(cls, data: dict) -> "Scenario":
        sim_d = data.get("sim", {})
        sim = SimConfig(
            dt=float(sim_d.get("dt_seconds", 1e-3)),
            t_end=float(sim_d.get("t_end_seconds", 60.0)),
            record_stride=int(sim_d.get("record_stride", 1)),
        )
        seed = int(data.get("seed", 0))
        graph = DirectedGraph.from_json(data["graph"])
        cd = data["constraints"]
        if "v_min" in cd:
            constraints = ConstraintSpec(float(cd["v_min"]), float(cd["v_max"]), float(cd["u_max"]))
        else:
            constraints = ConstraintSpec.symmetric(float(cd["v_max"]), float(cd["u_max"]))
        m = float(data["m"])
        params = [
            AgentControllerParams(m=m, alpha=float(p["alpha"]), z=float(p["z"]), k=float(p["k"]), gamma=float(p["gamma"]))
            for p in data["params"]
        ]
        plants = []
        for i, p in enumerate(data["plants"]):
            if p.get("kind") == "manipulator":
                plants.append(ManipulatorParams.from_json(p))
            else:
                plants.append(UncertaintyModel.from_json(p, hold=sim.dt, horizon=sim.t_end, default_seed=seed + i))
        bd = data.get("bounds")
        if bd is None:
            bounds = _bounds_from_plants(plants)
        else:
            bounds = UncertaintyBounds(float(bd["b_min"]), float(bd["tau_max"]), float(bd.get("phi_max", 0.0)))
        states = [AgentState(float(s["x"]), float(s["v"])) for s in data["initial_states"]]
        return cls(
            graph=graph,
            variant=Variant(data["variant"]),
            constraints=constraints,
            bounds=bounds,
            params=tuple(params),
            plants=tuple(plants),
            initial_states=tuple(states),
            sim=sim,
            seed=seed,
            name=str(data.get("name", "scenario")),
            description=str(data.get("description", "")),
        )

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        return cls.from_json(json.loads(text))

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.loads(Path(path).read_text())


def _bounds_from_plants(plants) -> UncertaintyBounds:
    if isinstance(plants[0], ManipulatorParams):
        return UncertaintyBounds(
            min(p.b for p in plants), max(p.tau for p in plants), max(p.phi for p in plants)
        )
    return UncertaintyBounds(
        min(p.declared_b_min for p in plants), max(p.declared_tau_max for p in plants)
    )

"""Built-in scenarios: the 7-manipulator study and smaller verification cases."""

from __future__ import annotations

from .controller import AgentControllerParams, ConstraintSpec, UncertaintyBounds, Variant
from .graph import DirectedGraph
from .plant import ManipulatorParams, UncertaintyModel
from .scenario import AgentState, Scenario, SimConfig

REPRODUCTION_CASES = ("symmetric", "asymmetric")


def ring_with_chord(n: int = 7) -> DirectedGraph:
    """Directed ring ``1 -> 2 -> ... -> n -> 1`` plus the chord ``1 -> 4``, unit weights."""
    edges = [(i, (i + 1) % n, 1.0) for i in range(n)]
    edges.append((0, 3, 1.0))
    return DirectedGraph.from_edges(n, edges)


def directed_ring(n: int) -> DirectedGraph:
    return DirectedGraph.from_edges(n, [(i, (i + 1) % n, 1.0) for i in range(n)])


def reproduction(case: str, dt: float = 1e-3, t_end: float = 60.0, record_stride: int = 10) -> Scenario:
    """Seven single-link manipulators, symmetric or asymmetric velocity limits.

    Plant and controller values are the benchmark's own; the topology and
    initial conditions are this package's documented choices.
    """
    if case not in REPRODUCTION_CASES:
        raise ValueError(f"unknown reproduction case {case!r}; expected one of {REPRODUCTION_CASES}")
    n = 7
    if case == "symmetric":
        constraints = ConstraintSpec(-1.0, 1.0, 2.0)
        m, v0 = 0.9, 0.0
    else:
        constraints = ConstraintSpec(0.5, 1.5, 2.0)
        m, v0 = 0.4, 0.5
    plants = tuple(ManipulatorParams.from_lumped(1.0, 0.8, 0.5) for _ in range(n))
    params = tuple(AgentControllerParams(m=m, alpha=1.8, z=0.1, k=0.5, gamma=1.5) for _ in range(n))
    return Scenario(
        graph=ring_with_chord(n),
        variant=Variant.MANIPULATOR,
        constraints=constraints,
        bounds=UncertaintyBounds(b_min=1.0, tau_max=0.5, phi_max=0.8),
        params=params,
        plants=plants,
        initial_states=tuple(AgentState(float(x), v0) for x in range(-3, 4)),
        sim=SimConfig(dt=dt, t_end=t_end, record_stride=record_stride),
        name=f"reproduction-{case}",
        description=(
            "7 single-link manipulators (b=1, phi=0.8, tau=0.5), |u|<=2, gamma=1.5, alpha=1.8, k=0.5, z=0.1. "
            "Topology: directed ring 1->2->...->7->1 plus chord 1->4, unit weights (this package's "
            "stand-in topology). Initial positions -3..3; initial velocities "
            + ("0." if case == "symmetric" else "0.5.")
        ),
    )


def smoke(dt: float = 1e-3, t_end: float = 60.0, record_stride: int = 10) -> Scenario:
    """Two agents on a bidirectional edge with a small switching gain.

    The small ``alpha`` keeps sliding-mode chatter (about ``dt * alpha``) well
    below the 1e-4 agreement required against the fine Euler reference.
    """
    g = DirectedGraph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])
    p = AgentControllerParams(m=0.2, alpha=0.03, z=0.04, k=0.05, gamma=1.5)
    model = UncertaintyModel.constant(1.0, 0.0)
    return Scenario(
        graph=g,
        variant=Variant.SYMMETRIC_TANH,
        constraints=ConstraintSpec.symmetric(0.25, 1.0),
        bounds=UncertaintyBounds(b_min=1.0, tau_max=0.0),
        params=(p, p),
        plants=(model, model),
        initial_states=(AgentState(0.1, 0.0), AgentState(0.0, 0.0)),
        sim=SimConfig(dt=dt, t_end=t_end, record_stride=record_stride),
        name="smoke-2-agent",
        description="Two double integrators, bidirectional unit edge, symmetric tanh reference.",
    )


def _sinusoid_model(i: int, b_amp: float = 0.1, tau_amp: float = 0.5) -> UncertaintyModel:
    return UncertaintyModel(
        "sinusoid",
        {"offset": 1.0 + b_amp, "amplitude": b_amp, "frequency": 0.7 + 0.1 * i, "phase": 0.5 * i},
        {"offset": 0.0, "amplitude": tau_amp, "frequency": 1.3 - 0.1 * i, "phase": 1.0 * i},
        1.0,
        tau_amp,
    )


def fixed_time_tracking(dt: float = 1e-3, t_end: float = 30.0, record_stride: int = 1) -> Scenario:
    """Double integrators on a unit directed ring (every in-degree 1).

    Parameters give T1 = 9.0 s and T2 ~ 1.837 s.
    """
    n = 5
    p = AgentControllerParams(m=0.9, alpha=1.8, z=0.1, k=0.2, gamma=1.5)
    xs = (-2.0, -1.0, 0.0, 1.5, 3.0)
    vs = (1.0, -1.0, 0.5, -0.5, 0.0)
    return Scenario(
        graph=directed_ring(n),
        variant=Variant.SYMMETRIC_TANH,
        constraints=ConstraintSpec.symmetric(1.0, 2.0),
        bounds=UncertaintyBounds(b_min=1.0, tau_max=0.5),
        params=(p,) * n,
        plants=tuple(_sinusoid_model(i) for i in range(n)),
        initial_states=tuple(AgentState(x, v) for x, v in zip(xs, vs)),
        sim=SimConfig(dt=dt, t_end=t_end, record_stride=record_stride),
        name="fixed-time-tracking",
        description="5 uncertain double integrators, directed unit ring, symmetric tanh reference.",
    )


def spanning_tree(dt: float = 1e-3, t_end: float = 120.0, record_stride: int = 10) -> Scenario:
    """Root ring {1,2,3} feeding the chain 4 -> 5 -> 6 via 3 -> 4; piecewise reference."""
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0)]
    g = DirectedGraph.from_edges(6, edges)
    p = AgentControllerParams(m=0.4, alpha=1.5, z=0.1, k=0.6, gamma=1.5)
    xs = (0.0, 1.0, -1.0, 3.0, -2.0, 2.0)
    return Scenario(
        graph=g,
        variant=Variant.PIECEWISE,
        constraints=ConstraintSpec(0.5, 1.5, 2.0),
        bounds=UncertaintyBounds(b_min=1.0, tau_max=0.3),
        params=(p,) * 6,
        plants=tuple(_sinusoid_model(i, tau_amp=0.3) for i in range(6)),
        initial_states=tuple(AgentState(x, 1.0) for x in xs),
        sim=SimConfig(dt=dt, t_end=t_end, record_stride=record_stride),
        name="spanning-tree-piecewise",
        description="6 double integrators; root ring {1,2,3} feeds chain 4->5->6; piecewise saturated reference.",
    )


def filter_based(dt: float = 1e-3, t_end: float = 120.0, record_stride: int = 10) -> Scenario:
    """Reproduction topology with the degree-independent filter reference."""
    n = 7
    p = AgentControllerParams(m=0.8, alpha=1.8, z=0.1, k=0.5, gamma=1.5)
    return Scenario(
        graph=ring_with_chord(n),
        variant=Variant.FILTER,
        constraints=ConstraintSpec.symmetric(1.0, 2.0),
        bounds=UncertaintyBounds(b_min=1.0, tau_max=0.5),
        params=(p,) * n,
        plants=tuple(_sinusoid_model(i) for i in range(n)),
        initial_states=tuple(AgentState(float(x), 0.0) for x in range(-3, 4)),
        sim=SimConfig(dt=dt, t_end=t_end, record_stride=record_stride),
        name="filter-based",
        description="7 uncertain double integrators on the ring-with-chord graph, filter-based reference.",
    )


PRESETS = {
    "reproduction-symmetric": lambda: reproduction("symmetric"),
    "reproduction-asymmetric": lambda: reproduction("asymmetric"),
    "smoke": smoke,
    "fixed-time-tracking": fixed_time_tracking,
    "spanning-tree": spanning_tree,
    "filter-based": filter_based,
}

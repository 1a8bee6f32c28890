"""Per-agent saturated consensus controller.

The control law drives the velocity tracking error ``e = v - r`` to zero with
a bounded input, where the reference velocity ``r`` is built from relative
positions only.  Neighbor velocities never enter: :class:`NeighborView` has no
field for them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from numba import njit

from .errors import InfeasibleParams, InfeasibleProblem, MissingFilterState, NonpositiveMu
from .saturation import clamped_tanh, tanh_reference, varrho

# margins within this relative distance of zero are reported as exactly 0
MARGIN_SNAP = 1e-12


class Variant(str, enum.Enum):
    SYMMETRIC_TANH = "symmetric_tanh"
    ASYMMETRIC_TANH = "asymmetric_tanh"
    FILTER = "filter"
    PIECEWISE = "piecewise"
    MANIPULATOR = "manipulator"

    @property
    def code(self) -> int:
        return _VARIANT_CODES[self]

    @property
    def symmetric_only(self) -> bool:
        return self in (Variant.SYMMETRIC_TANH, Variant.FILTER)

    @property
    def needs_strong_connectivity(self) -> bool:
        return self is not Variant.PIECEWISE


_VARIANT_CODES = {
    Variant.SYMMETRIC_TANH: 0,
    Variant.ASYMMETRIC_TANH: 1,
    Variant.FILTER: 2,
    Variant.PIECEWISE: 3,
    Variant.MANIPULATOR: 4,
}


@dataclass(frozen=True)
class ConstraintSpec:
    v_min: float
    v_max: float
    u_max: float

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError(f"need v_min < v_max, got {self.v_min} >= {self.v_max}")
        if not self.u_max > 0:
            raise ValueError(f"u_max must be positive, got {self.u_max}")

    @classmethod
    def symmetric(cls, v_max: float, u_max: float) -> "ConstraintSpec":
        return cls(-v_max, v_max, u_max)

    @property
    def v_r(self) -> float:
        return (self.v_max + self.v_min) / 2

    @property
    def half_width(self) -> float:
        return (self.v_max - self.v_min) / 2

    @property
    def v_bar(self) -> float:
        return max(abs(self.v_max), abs(self.v_min))

    @property
    def is_symmetric(self) -> bool:
        return self.v_min == -self.v_max


@dataclass(frozen=True)
class UncertaintyBounds:
    """Known bounds on the input gain, disturbance and (manipulators) damping."""

    b_min: float
    tau_max: float
    phi_max: float = 0.0

    def __post_init__(self):
        if not self.b_min > 0:
            raise ValueError("b_min must be positive")
        if self.tau_max < 0 or self.phi_max < 0:
            raise ValueError("tau_max and phi_max must be nonnegative")

    def controllability_margin(self, c: ConstraintSpec) -> float:
        """``b_min u_max - tau_max - phi_max v_bar``; must be positive."""
        return self.b_min * c.u_max - self.tau_max - self.phi_max * c.v_bar


@dataclass(frozen=True)
class AgentControllerParams:
    m: float
    alpha: float
    z: float
    k: float
    gamma: float

    @property
    def lam(self) -> float:
        return self.z**self.gamma


@dataclass(frozen=True)
class NeighborView:
    """Everything agent ``i`` may read: its own state and neighbor positions."""

    own_position: float
    own_velocity: float
    neighbor_positions: tuple[tuple[float, float], ...] = ()
    filter_state: float | None = None


def relative_position_sum(view: NeighborView) -> float:
    return math.fsum(a * (view.own_position - xj) for a, xj in view.neighbor_positions)


def reference_velocity(variant: Variant, view: NeighborView, p: AgentControllerParams, c: ConstraintSpec) -> float:
    variant = Variant(variant)
    if variant is Variant.SYMMETRIC_TANH:
        return tanh_reference(relative_position_sum(view), p.k, p.m)
    if variant in (Variant.ASYMMETRIC_TANH, Variant.MANIPULATOR):
        return c.v_r + tanh_reference(relative_position_sum(view), p.k, p.m)
    if variant is Variant.FILTER:
        if view.filter_state is None:
            raise MissingFilterState("filter-based reference needs the agent's filter state")
        return tanh_reference(view.own_position - view.filter_state, p.k, p.m)
    return c.v_r - varrho(relative_position_sum(view), p.k, p.m)


def tracking_error(v: float, r: float) -> float:
    return v - r


@njit(cache=True)
def control_law(e, u_max, alpha, z, gamma):
    """Saturated input for tracking error ``e``; ``|u| <= u_max`` exactly.

    Algebraically ``-((u_max - alpha) sigma(e) + lam alpha sgn(e)) / lam``,
    evaluated as ``-sgn(e) (alpha + (u_max - alpha) |sigma(e)| / lam)`` so
    rounding cannot push the magnitude past ``u_max``.
    """
    if e == 0.0:
        return 0.0
    a = abs(e)
    if a >= z:
        mag = u_max
    else:
        mag = alpha + (u_max - alpha) * (a / z) ** gamma
        if mag > u_max:
            mag = u_max
    if e > 0.0:
        return -mag
    return mag


def control(e: float, p: AgentControllerParams, u_max: float) -> float:
    if not p.alpha < u_max:
        raise InfeasibleParams(f"alpha={p.alpha} must be below u_max={u_max}")
    return control_law(float(e), float(u_max), float(p.alpha), float(p.z), float(p.gamma))


def filter_derivative(x_hat: float, neighbor_positions, m: float) -> float:
    s = math.fsum(a * (x_hat - xj) for a, xj in neighbor_positions)
    return -m * clamped_tanh(s)


@dataclass(frozen=True)
class Condition:
    condition: str
    lhs: float
    rhs: float
    strict: bool = True
    margin: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        margin = self.rhs - self.lhs
        scale = max(1.0, abs(self.lhs), abs(self.rhs)) if math.isfinite(self.rhs) else 1.0
        if math.isfinite(margin) and abs(margin) <= MARGIN_SNAP * scale:
            margin = 0.0
        object.__setattr__(self, "margin", margin)
        object.__setattr__(self, "passed", margin > 0 if self.strict else margin >= 0)

    def to_json(self) -> dict:
        return {
            "condition": self.condition,
            "lhs": _finite_or_none(self.lhs),
            "rhs": _finite_or_none(self.rhs),
            "pass": self.passed,
            "margin": _finite_or_none(self.margin),
        }


def _finite_or_none(x: float):
    return float(x) if math.isfinite(x) else None


@dataclass(frozen=True)
class FeasibilityReport:
    variant: Variant
    conditions: tuple[Condition, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failures(self) -> list[Condition]:
        return [c for c in self.conditions if not c.passed]

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.condition == name:
                return c
        raise KeyError(name)

    def to_json(self) -> list[dict]:
        return [c.to_json() for c in self.conditions]


def alpha_interval(variant: Variant, bounds: UncertaintyBounds, c: ConstraintSpec) -> tuple[float, float]:
    """Open interval the gain ``alpha`` must lie in."""
    lo = bounds.tau_max
    if Variant(variant) is Variant.MANIPULATOR:
        lo += bounds.phi_max * c.v_bar
    return lo / bounds.b_min, c.u_max


def _m_limit(variant: Variant, c: ConstraintSpec) -> float:
    return c.v_max if Variant(variant).symmetric_only else c.half_width


def k_bound(variant: Variant, alpha: float, bounds: UncertaintyBounds, c: ConstraintSpec, d_i: float | None) -> float:
    """Upper limit on the reference slope ``k`` for the given ``alpha``."""
    variant = Variant(variant)
    drive = bounds.b_min * alpha - bounds.tau_max
    if variant is Variant.FILTER:
        return drive / (2 * c.v_max)
    if variant is Variant.MANIPULATOR:
        drive -= bounds.phi_max * c.v_bar
    if variant is Variant.SYMMETRIC_TANH:
        denom = 2 * d_i * c.v_max
    else:
        denom = d_i * (c.v_max - c.v_min)
    if denom == 0:
        return math.inf
    return drive / denom


def check_feasibility(
    variant: Variant,
    p: AgentControllerParams,
    bounds: UncertaintyBounds,
    c: ConstraintSpec,
    d_i: float | None = None,
) -> FeasibilityReport:
    """Evaluate every sufficient parameter inequality for ``variant``.

    ``d_i`` (the agent's in-degree) is ignored for the filter variant, whose
    conditions do not depend on the graph.
    """
    variant = Variant(variant)
    if variant is not Variant.FILTER and d_i is None:
        raise ValueError(f"{variant.value} feasibility needs the agent in-degree")
    lo, hi = alpha_interval(variant, bounds, c)
    m_lim = _m_limit(variant, c)
    if variant.symmetric_only:
        m_name, z_name = "m < v_max", "z <= v_max - m"
    else:
        m_name, z_name = "m < (v_max - v_min)/2", "z <= (v_max - v_min)/2 - m"
    if variant is Variant.MANIPULATOR:
        alo_name = "(tau_max + phi_max*v_bar)/b_min < alpha"
        k_name = "k < (b_min*alpha - tau_max - phi_max*v_bar)/(d_i*(v_max - v_min))"
    else:
        alo_name = "tau_max/b_min < alpha"
        k_name = {
            Variant.SYMMETRIC_TANH: "k < (b_min*alpha - tau_max)/(2*d_i*v_max)",
            Variant.FILTER: "k < (b_min*alpha - tau_max)/(2*v_max)",
        }.get(variant, "k < (b_min*alpha - tau_max)/(d_i*(v_max - v_min))")
    conditions = (
        Condition("m > 0", 0.0, p.m),
        Condition("z > 0", 0.0, p.z),
        Condition("k > 0", 0.0, p.k),
        Condition("gamma > 1", 1.0, p.gamma),
        Condition(m_name, p.m, m_lim),
        Condition(alo_name, lo, p.alpha),
        Condition("alpha < u_max", p.alpha, hi),
        Condition(z_name, p.z, m_lim - p.m, strict=False),
        Condition(k_name, p.k, k_bound(variant, p.alpha, bounds, c, d_i)),
    )
    return FeasibilityReport(variant, conditions)


def suggest_params(
    variant: Variant,
    bounds: UncertaintyBounds,
    c: ConstraintSpec,
    d_i: float | None = None,
    safety: float = 0.5,
    gamma: float = 1.5,
) -> AgentControllerParams:
    """Place each parameter at fraction ``safety`` of its admissible range.

    alpha sits at the midpoint of its interval; m, z and k are ``safety``
    times their upper limits, each limit evaluated given the earlier choices.
    """
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    variant = Variant(variant)
    lo, hi = alpha_interval(variant, bounds, c)
    if not lo < hi:
        raise InfeasibleProblem(f"empty alpha interval ({lo}, {hi}): disturbance bound exceeds b_min*u_max")
    alpha = (lo + hi) / 2
    m_lim = _m_limit(variant, c)
    m = safety * m_lim
    z = safety * (m_lim - m)
    kb = k_bound(variant, alpha, bounds, c, d_i)
    if not math.isfinite(kb):
        # agent without in-neighbors: any k works, fall back to unit degree
        kb = k_bound(variant, alpha, bounds, c, 1.0)
    return AgentControllerParams(m=m, alpha=alpha, z=z, k=safety * kb, gamma=gamma)


def tracking_entry_bound(p: AgentControllerParams, bounds: UncertaintyBounds, c: ConstraintSpec) -> float:
    """Time by which ``|e_i|`` has reached ``z_i`` from any admissible start."""
    drive = bounds.b_min * (c.u_max - p.alpha)
    if drive <= 0:
        raise NonpositiveMu(f"b_min*(u_max - alpha) = {drive} <= 0")
    return (c.half_width + p.m - p.z) / drive


def mu(variant: Variant, p: AgentControllerParams, bounds: UncertaintyBounds, c: ConstraintSpec, d_i: float | None) -> float:
    """Residual switching gain after the reference-rate bound is paid for."""
    variant = Variant(variant)
    base = bounds.b_min * p.alpha - bounds.tau_max
    if variant is Variant.FILTER:
        return base - 2 * p.k * c.v_max
    return base - bounds.phi_max * c.v_bar - p.k * d_i * (c.v_max - c.v_min)


def settling_bounds(
    p: AgentControllerParams,
    bounds: UncertaintyBounds,
    c: ConstraintSpec,
    d_i: float | None,
    variant: Variant = Variant.SYMMETRIC_TANH,
) -> tuple[float, float]:
    """(T1, T2): reach ``|e| <= z`` by T1, then ``e = 0`` within a further T2."""
    t1 = tracking_entry_bound(p, bounds, c)
    mu_i = mu(variant, p, bounds, c, d_i)
    if mu_i <= 0:
        raise NonpositiveMu(f"mu = {mu_i} <= 0")
    g = p.gamma
    t2 = p.lam / (2 ** ((g - 1) / 2) * bounds.b_min * (c.u_max - p.alpha) * (g - 1)) + 1 / (2**-0.5 * mu_i)
    return t1, t2

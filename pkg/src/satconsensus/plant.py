"""Agent dynamics: uncertain double integrator and single-link manipulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundViolation

KINDS = ("constant", "sinusoid", "noise")


def _sinusoid_terms(terms: dict) -> tuple[float, float, float, float]:
    return (
        float(terms.get("offset", 0.0)),
        float(terms.get("amplitude", 0.0)),
        float(terms.get("frequency", 1.0)),
        float(terms.get("phase", 0.0)),
    )


@dataclass(frozen=True, eq=False)
class UncertaintyModel:
    """Time-varying input gain ``b(t)`` and disturbance ``tau(t)``.

    Parameter dictionaries by kind:

    * ``constant``: ``{"value": v}``
    * ``sinusoid``: ``{"offset", "amplitude", "frequency", "phase"}``,
      giving ``offset + amplitude * sin(frequency * t + phase)``
    * ``noise``: ``{"low", "high", "mean"?, "std"?}``, a clipped Gaussian
      redrawn every ``hold`` seconds from a seeded generator

    Noise paths are drawn once, at construction, over ``[0, horizon]``.
    """

    kind: str
    b: dict
    tau: dict
    declared_b_min: float
    declared_tau_max: float
    seed: int | None = None
    hold: float = 1e-3
    horizon: float = 0.0
    _paths: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown uncertainty kind {self.kind!r}; expected one of {KINDS}")
        if not self.declared_b_min > 0:
            raise ValueError("declared_b_min must be positive")
        if self.declared_tau_max < 0:
            raise ValueError("declared_tau_max must be nonnegative")
        paths = ()
        if self.kind == "noise":
            if self.seed is None:
                raise ValueError("noise uncertainty needs a seed")
            if not self.hold > 0:
                raise ValueError("noise hold interval must be positive")
            count = int(math.floor(self.horizon / self.hold + 1e-9)) + 2
            rng = np.random.default_rng(self.seed)
            paths = (self._draw(rng, self.b, count), self._draw(rng, self.tau, count))
            for p in paths:
                p.setflags(write=False)
        object.__setattr__(self, "_paths", paths)

    @staticmethod
    def _draw(rng, terms: dict, count: int) -> np.ndarray:
        low, high = float(terms["low"]), float(terms["high"])
        if low > high:
            raise ValueError(f"noise low {low} exceeds high {high}")
        mean = float(terms.get("mean", (low + high) / 2))
        std = float(terms.get("std", (high - low) / 4))
        return np.clip(mean + std * rng.standard_normal(count), low, high)

    @classmethod
    def constant(cls, b: float, tau: float, declared_b_min: float | None = None, declared_tau_max: float | None = None):
        return cls(
            "constant",
            {"value": b},
            {"value": tau},
            b if declared_b_min is None else declared_b_min,
            abs(tau) if declared_tau_max is None else declared_tau_max,
        )

    @property
    def noise_paths(self) -> tuple[np.ndarray, np.ndarray] | tuple:
        return self._paths

    def _eval(self, terms: dict, which: int, t: float) -> float:
        if self.kind == "constant":
            return float(terms["value"])
        if self.kind == "sinusoid":
            off, amp, freq, ph = _sinusoid_terms(terms)
            return off + amp * math.sin(freq * t + ph)
        idx = int(math.floor(t / self.hold + 1e-9))
        path = self._paths[which]
        return float(path[min(max(idx, 0), len(path) - 1)])

    def b_fn(self, t: float) -> float:
        return self._eval(self.b, 0, t)

    def tau_fn(self, t: float) -> float:
        return self._eval(self.tau, 1, t)

    def kernel_terms(self, which: str) -> tuple[float, float, float, float]:
        """``(offset, amplitude, frequency, phase)`` for the deterministic part."""
        terms = self.b if which == "b" else self.tau
        if self.kind == "constant":
            return (float(terms["value"]), 0.0, 0.0, 0.0)
        if self.kind == "sinusoid":
            return _sinusoid_terms(terms)
        return (0.0, 0.0, 0.0, 0.0)

    def envelope(self) -> tuple[float, float, float]:
        """True ``(min b, max b, max |tau|)`` of the model over its life."""
        if self.kind == "constant":
            b = float(self.b["value"])
            return b, b, abs(float(self.tau["value"]))
        if self.kind == "sinusoid":
            off, amp, _, _ = _sinusoid_terms(self.b)
            toff, tamp, _, _ = _sinusoid_terms(self.tau)
            return off - abs(amp), off + abs(amp), abs(toff) + abs(tamp)
        bp, tp = self._paths
        return float(bp.min()), float(bp.max()), float(np.abs(tp).max())

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "b": dict(self.b),
            "tau": dict(self.tau),
            "declared_b_min": self.declared_b_min,
            "declared_tau_max": self.declared_tau_max,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    @classmethod
    def from_json(cls, data: dict, hold: float = 1e-3, horizon: float = 0.0, default_seed: int | None = None):
        kind = data["kind"]
        return cls(
            kind,
            dict(data["b"]),
            dict(data["tau"]),
            float(data["declared_b_min"]),
            float(data["declared_tau_max"]),
            seed=data.get("seed", default_seed if kind == "noise" else None),
            hold=hold,
            horizon=horizon,
        )


@dataclass(frozen=True)
class ManipulatorParams:
    """Single-link arm: inertia, damping, mass, gravity and center-of-mass length."""

    inertia: float
    damping: float
    mass: float
    length: float
    gravity: float = 9.81

    def __post_init__(self):
        if not self.inertia > 0:
            raise ValueError("inertia must be positive")
        if min(self.damping, self.mass, self.length, self.gravity) < 0:
            raise ValueError("manipulator parameters must be nonnegative")

    @classmethod
    def from_lumped(cls, b: float, phi: float, tau: float, gravity: float = 9.81, length: float = 1.0):
        inertia = 1.0 / b
        return cls(inertia, phi * inertia, tau * inertia / (gravity * length), length, gravity)

    @property
    def b(self) -> float:
        return 1.0 / self.inertia

    @property
    def phi(self) -> float:
        return self.damping / self.inertia

    @property
    def tau(self) -> float:
        return self.mass * self.gravity * self.length / self.inertia

    def to_json(self) -> dict:
        return {
            "kind": "manipulator",
            "inertia": self.inertia,
            "damping": self.damping,
            "mass": self.mass,
            "length": self.length,
            "gravity": self.gravity,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ManipulatorParams":
        if {"b", "phi", "tau"} <= data.keys():
            return cls.from_lumped(
                float(data["b"]), float(data["phi"]), float(data["tau"]),
                float(data.get("gravity", 9.81)), float(data.get("length", 1.0)),
            )
        return cls(
            float(data["inertia"]), float(data["damping"]), float(data["mass"]),
            float(data["length"]), float(data.get("gravity", 9.81)),
        )


def accel_double_integrator(t: float, u: float, model: UncertaintyModel) -> float:
    return model.b_fn(t) * u + model.tau_fn(t)


def accel_manipulator(x: float, v: float, u: float, p: ManipulatorParams) -> float:
    return p.b * u - p.phi * v - p.tau * math.sin(x)


@dataclass(frozen=True)
class BoundsReport:
    b_min_observed: float
    tau_max_observed: float
    b_margin: float
    tau_margin: float
    violation_times: tuple[float, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violation_times

    def to_json(self) -> dict:
        return {
            "b_min_observed": self.b_min_observed,
            "tau_max_observed": self.tau_max_observed,
            "b_margin": self.b_margin,
            "tau_margin": self.tau_margin,
            "violation_times": list(self.violation_times),
            "pass": self.ok,
        }


def _critical_times(terms, horizon: float) -> list[float]:
    _, amp, freq, ph = terms
    if amp == 0 or freq == 0:
        return []
    period = math.pi / abs(freq)
    first = (math.pi / 2 - ph) / freq
    # shift to the first critical point at or after 0
    first -= math.floor(first / period) * period
    out = []
    t = first
    while t <= horizon:
        out.append(t)
        t += period
    return out


def bounds_check(model: UncertaintyModel, horizon: float, samples: int = 1001, raise_on_violation: bool = True) -> BoundsReport:
    """Compare a model's realised ``b`` and ``tau`` with its declared bounds.

    Samples a uniform grid over ``[0, horizon]`` plus, for sinusoids, every
    analytic extremum in the window; noise paths are checked point by point.

    Raises:
        BoundViolation: if any sample leaves the declared bounds (and
            ``raise_on_violation``); the report is attached.
    """
    if samples < 2:
        raise ValueError("bounds_check needs at least 2 samples")
    times = set(np.linspace(0.0, horizon, samples).tolist())
    if model.kind == "sinusoid":
        times.update(_critical_times(model.kernel_terms("b"), horizon))
        times.update(_critical_times(model.kernel_terms("tau"), horizon))
    elif model.kind == "noise":
        steps = int(math.floor(horizon / model.hold + 1e-9))
        times.update((np.arange(steps + 1) * model.hold).tolist())
    times = sorted(times)
    b = np.array([model.b_fn(t) for t in times])
    tau = np.abs(np.array([model.tau_fn(t) for t in times]))
    bad = (b < model.declared_b_min) | (tau > model.declared_tau_max)
    report = BoundsReport(
        b_min_observed=float(b.min()),
        tau_max_observed=float(tau.max()),
        b_margin=float(b.min() - model.declared_b_min),
        tau_margin=float(model.declared_tau_max - tau.max()),
        violation_times=tuple(float(t) for t, flag in zip(times, bad) if flag),
    )
    if raise_on_violation and not report.ok:
        raise BoundViolation(
            f"uncertainty leaves declared bounds at {len(report.violation_times)} sample(s), "
            f"first at t={report.violation_times[0]:.6g}",
            report,
        )
    return report

"""Bridge schedules (alpha_t, beta_t, sigma_t^2) and transition-variance policies.

A schedule pins the double-conditional process to ``x0`` at ``t=0`` and to
``xT`` at ``t=T``: the marginal at time ``t`` is
``N(alpha_t x0 + beta_t xT, sigma_t^2 I)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

BOUNDARY_TOL = 1e-12
CLAMP_TOL = 1e-12
GRID_TOL = 1e-9

KINDS = ("brownian", "custom")
VARIANTS = ("A", "B", "C")


class ScheduleDomainError(ValueError):
    """Time argument outside [0, T], off the discrete grid, or t >= s."""


class PolicyIncompatibleError(ValueError):
    """The variance policy yields a negative delta^2 for this schedule."""


@dataclass(frozen=True, eq=False)
class BridgeSchedule:
    """Schedule of a diffusion bridge on ``[0, T]``.

    ``steps=None`` selects continuous time (any real ``t``); otherwise times
    are restricted to the grid ``{0, dt, ..., T}`` with ``dt = T / steps``.
    Custom schedules are piecewise linear between the knots in ``table``
    (columns ``t, alpha, beta, sigma2``); the boundary knots are mandatory.
    """

    kind: str = "brownian"
    k: float = 2.0
    T: float = 1000.0
    steps: int | None = 1000
    table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.steps is not None and (int(self.steps) != self.steps or self.steps < 1):
            raise ValueError("steps must be a positive integer (or None for continuous time)")
        if self.kind == "custom":
            if self.table is None:
                raise ValueError("custom schedule requires a knot table")
            tab = np.array(self.table, dtype=np.float64)
            if tab.ndim != 2 or tab.shape[1] != 4 or tab.shape[0] < 2:
                raise ValueError("knot table must have shape (n>=2, 4): t, alpha, beta, sigma2")
            if not np.all(np.isfinite(tab)):
                raise ValueError("knot table must be finite")
            if np.any(np.diff(tab[:, 0]) <= 0):
                raise ValueError("knot times must be strictly increasing")
            if tab[0, 0] != 0.0 or tab[-1, 0] != self.T:
                raise ValueError("custom table must contain knots at t=0 and t=T")
            tab.setflags(write=False)
            object.__setattr__(self, "table", tab)
        elif self.table is not None:
            raise ValueError("brownian schedule takes no knot table")

    @classmethod
    def brownian(cls, k: float = 2.0, T: float = 1000.0, steps: int | None = 1000):
        return cls("brownian", float(k), float(T), steps)

    @classmethod
    def from_table(cls, t, alpha, beta, sigma2, k: float = 1.0, steps: int | None = None):
        tab = np.column_stack([t, alpha, beta, sigma2]).astype(np.float64)
        return cls("custom", float(k), float(tab[-1, 0]), steps, tab)

    @property
    def continuous(self) -> bool:
        return self.steps is None

    @property
    def dt(self) -> float | None:
        return None if self.steps is None else self.T / self.steps

    def grid(self) -> np.ndarray:
        """Full discrete grid ``0, dt, ..., T`` (continuous mode: error)."""
        if self.steps is None:
            raise ScheduleDomainError("continuous-time schedule has no discrete grid")
        return np.arange(self.steps + 1, dtype=np.float64) * (self.T / self.steps)

    def __eq__(self, other):
        if not isinstance(other, BridgeSchedule):
            return NotImplemented
        same_tab = (self.table is None and other.table is None) or (
            self.table is not None
            and other.table is not None
            and np.array_equal(self.table, other.table)
        )
        return (self.kind, self.k, self.T, self.steps) == (
            other.kind, other.k, other.T, other.steps) and same_tab


@dataclass(frozen=True)
class TransitionVariancePolicy:
    """delta^2_{s,t} policy: ``A`` deterministic, ``B`` beta-ratio, ``C`` alpha-ratio."""

    variant: str = "C"
    eta: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown policy variant {self.variant!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


class Coefficients(NamedTuple):
    alpha: np.ndarray | float
    beta: np.ndarray | float
    sigma2: np.ndarray | float


def _check_times(sched: BridgeSchedule, t):
    if isinstance(t, (float, int)) and not isinstance(t, bool):
        # scalar fast path; the kernel suites call this ~10^5 times
        t = float(t)
        if not (0.0 <= t <= sched.T):
            raise ScheduleDomainError(f"time outside [0, {sched.T}]: {t}")
        if sched.steps is not None:
            idx = t / sched.dt
            if abs(idx - round(idx)) > GRID_TOL:
                raise ScheduleDomainError(f"time not on the discrete grid (dt={sched.dt}): {t}")
        return np.float64(t)
    t = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > sched.T):
        raise ScheduleDomainError(f"time outside [0, {sched.T}]: {t}")
    if sched.steps is not None:
        idx = t / sched.dt
        if np.any(np.abs(idx - np.round(idx)) > GRID_TOL):
            raise ScheduleDomainError(f"time not on the discrete grid (dt={sched.dt}): {t}")
    return t


def eval_schedule(sched: BridgeSchedule, t) -> Coefficients:
    """Return ``(alpha_t, beta_t, sigma2_t)``; scalars in, floats out; arrays broadcast."""
    scalar = np.ndim(t) == 0
    t = _check_times(sched, t)
    if sched.kind == "brownian":
        u = t / sched.T
        alpha = 1.0 - u
        beta = u
        sigma2 = sched.k * u * (1.0 - u)
    else:
        tab = sched.table
        alpha = np.interp(t, tab[:, 0], tab[:, 1])
        beta = np.interp(t, tab[:, 0], tab[:, 2])
        sigma2 = np.interp(t, tab[:, 0], tab[:, 3])
    if scalar:
        return Coefficients(float(alpha), float(beta), float(sigma2))
    return Coefficients(alpha, beta, sigma2)


@dataclass
class Violation:
    condition: str
    t: float
    residual: float


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "ok"
        return "; ".join(f"{v.condition} at t={v.t:g} (residual {v.residual:.3e})"
                         for v in self.violations)


def validate(sched: BridgeSchedule) -> ValidationReport:
    """Check the Dirac boundary conditions and interior positivity of sigma^2."""
    report = ValidationReport()
    for t, want in ((0.0, (1.0, 0.0, 0.0)), (sched.T, (0.0, 1.0, 0.0))):
        got = eval_schedule(sched, t)
        for name, g, w in zip(("alpha", "beta", "sigma2"), got, want):
            if abs(g - w) > BOUNDARY_TOL:
                report.violations.append(Violation(f"{name}={w:g} boundary", t, g - w))
    if sched.steps is not None:
        interior = sched.grid()[1:-1]
    else:
        interior = np.linspace(0.0, sched.T, 1001)[1:-1]
    if sched.kind == "custom":
        knots = sched.table[1:-1, 0]
        if sched.steps is not None:
            idx = knots / sched.dt
            knots = knots[np.abs(idx - np.round(idx)) <= GRID_TOL]
        interior = np.union1d(interior, knots)
    if interior.size:
        sig2 = eval_schedule(sched, interior).sigma2
        for t, v in zip(interior[sig2 <= 0.0], sig2[sig2 <= 0.0]):
            report.violations.append(Violation("sigma2>0 interior", float(t), float(v)))
    return report


def delta2(sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float) -> float:
    """Transition variance delta^2_{s,t} for a step between times ``t < s``."""
    if not t < s:
        raise ScheduleDomainError(f"delta2 needs t < s, got t={t}, s={s}")
    a_t, b_t, v_t = eval_schedule(sched, t)
    a_s, b_s, v_s = eval_schedule(sched, s)
    if policy.variant == "A" or policy.eta == 0.0:
        return 0.0
    if policy.variant == "B":
        if b_t == 0.0:
            raise PolicyIncompatibleError(
                f"variant B undefined at (t={t}, s={s}): beta_t = 0")
        raw = v_s - v_t * b_s**2 / b_t**2
    else:
        raw = v_s - v_t * a_s**2 / a_t**2
    d2 = policy.eta * raw
    if d2 < -CLAMP_TOL:
        raise PolicyIncompatibleError(
            f"variant {policy.variant} gives delta^2={d2:.3e} < 0 at (t={t}, s={s})")
    return max(d2, 0.0)

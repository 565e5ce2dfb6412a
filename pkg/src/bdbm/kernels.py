"""Closed-form marginals and transition kernels of the double-conditional process.

All arrays are float64 with the state dimension on the last axis, so a batch
of states ``(n, d)`` shares one time pair and one isotropic variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedule import BridgeSchedule, ScheduleDomainError, TransitionVariancePolicy, delta2, eval_schedule


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class EndpointPair:
    """Coupled endpoints ``(x0, xT)`` drawn from ``p(y_A, y_B)``."""

    x0: np.ndarray
    xT: np.ndarray

    def __post_init__(self):
        x0, xT = _vec(self.x0), _vec(self.xT)
        if x0.shape != xT.shape:
            raise ValueError(f"endpoint shapes differ: {x0.shape} vs {xT.shape}")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(xT))):
            raise ValueError("endpoints must be finite")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xT", xT)

    @property
    def d(self) -> int:
        return self.x0.shape[-1]


@dataclass(frozen=True)
class GaussianTransition:
    """Isotropic Gaussian ``N(mean, var * I)``; ``var == 0`` is a Dirac mass."""

    mean: np.ndarray
    var: float

    def __post_init__(self):
        if np.ndim(self.var) != 0:
            raise TypeError("only isotropic (scalar-variance) kernels are supported")
        var = float(self.var)
        if not var >= 0.0:
            raise ValueError(f"variance must be non-negative, got {var}")
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "mean", _vec(self.mean))


@dataclass(frozen=True)
class BridgeState:
    t: float
    x: np.ndarray
    z: np.ndarray | None = None


def marginal(sched: BridgeSchedule, t: float, pair: EndpointPair) -> GaussianTransition:
    a, b, v = eval_schedule(sched, t)
    return GaussianTransition(a * pair.x0 + b * pair.xT, v)


def sample_marginal(sched: BridgeSchedule, t: float, pair: EndpointPair,
                    rng: np.random.Generator) -> BridgeState:
    a, b, v = eval_schedule(sched, t)
    z = rng.standard_normal(pair.x0.shape)
    x = a * pair.x0 + b * pair.xT + math.sqrt(v) * z
    return BridgeState(float(t), x, z)


def _check_pair(t, s):
    if not t < s:
        raise ScheduleDomainError(f"transition needs t < s, got t={t}, s={s}")


def forward_transition(sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float,
                       x_t, pair: EndpointPair) -> GaussianTransition:
    """``q(x_s | x_t, x0, xT)`` for ``t < s`` (endpoint form of the mean)."""
    _check_pair(t, s)
    x_t = _vec(x_t)
    a_t, b_t, v_t = eval_schedule(sched, t)
    a_s, b_s, v_s = eval_schedule(sched, s)
    base = a_s * pair.x0 + b_s * pair.xT
    if v_t == 0.0:
        # conditioning on a Dirac state is vacuous: destination marginal
        return GaussianTransition(base, v_s)
    d2 = delta2(sched, policy, t, s)
    coef = math.sqrt(max(v_s - d2, 0.0)) / math.sqrt(v_t)
    return GaussianTransition(base + coef * (x_t - a_t * pair.x0 - b_t * pair.xT), d2)


def forward_mean_zform(sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float,
                       x_t, x0, z) -> np.ndarray:
    """Forward mean written through the noise ``z`` of ``x_t`` instead of ``xT``."""
    _check_pair(t, s)
    a_t, b_t, v_t = eval_schedule(sched, t)
    a_s, b_s, v_s = eval_schedule(sched, s)
    if b_t == 0.0:
        raise ScheduleDomainError("z-form forward mean divides by beta_t = 0")
    d2 = delta2(sched, policy, t, s)
    r = b_s / b_t
    return (r * _vec(x_t) + (a_s - a_t * r) * _vec(x0)
            + (math.sqrt(max(v_s - d2, 0.0)) - math.sqrt(v_t) * r) * _vec(z))


def backward_transition(sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float,
                        x_s, pair: EndpointPair) -> GaussianTransition:
    """``q(x_t | x_s, x0, xT)`` for ``t < s``, the Bayes reversal of the forward kernel."""
    _check_pair(t, s)
    x_s = _vec(x_s)
    a_t, b_t, v_t = eval_schedule(sched, t)
    a_s, b_s, v_s = eval_schedule(sched, s)
    base = a_t * pair.x0 + b_t * pair.xT
    if v_s == 0.0:
        return GaussianTransition(base, v_t)
    d2 = delta2(sched, policy, t, s)
    coef = math.sqrt(v_t) * math.sqrt(max(v_s - d2, 0.0)) / v_s
    return GaussianTransition(base + coef * (x_s - a_s * pair.x0 - b_s * pair.xT), d2 * v_t / v_s)


def backward_mean_zform(sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float,
                        x_s, xT, z) -> np.ndarray:
    """Backward mean written through the noise ``z`` of ``x_s`` instead of ``x0``."""
    _check_pair(t, s)
    a_t, b_t, v_t = eval_schedule(sched, t)
    a_s, b_s, v_s = eval_schedule(sched, s)
    if a_s == 0.0 or v_s == 0.0:
        raise ScheduleDomainError("z-form backward mean divides by alpha_s = 0")
    d2 = delta2(sched, policy, t, s)
    r = a_t / a_s
    sig_s = math.sqrt(v_s)
    return (r * _vec(x_s) + (b_t - b_s * r) * _vec(xT)
            + (math.sqrt(v_t) * math.sqrt(max(v_s - d2, 0.0)) / sig_s - sig_s * r) * _vec(z))


def log_density(kernel: GaussianTransition, x) -> np.ndarray | float:
    """Isotropic Gaussian log-density; sums over the last axis."""
    if kernel.var == 0.0:
        raise ValueError("Dirac kernel (var = 0) has no density")
    diff = _vec(x) - kernel.mean
    d = diff.shape[-1] if diff.ndim else 1
    out = -0.5 * d * math.log(2.0 * math.pi * kernel.var) - 0.5 * np.sum(
        diff * diff, axis=-1) / kernel.var
    return float(out) if np.ndim(out) == 0 else out


def tweedie_endpoint(x, y_a, alpha: float, beta: float, sigma2: float, score) -> np.ndarray:
    """Posterior mean of ``y_B`` given a bridge state ``x`` and the known ``y_A``."""
    if beta == 0.0:
        raise ValueError("beta = 0: the opposite endpoint is not recoverable")
    return (_vec(x) - alpha * _vec(y_a) + sigma2 * _vec(score)) / beta


def analytic_score_gaussian_coupling(sched: BridgeSchedule, t: float, x_t, x0, coupling) -> np.ndarray:
    """``grad_x log p(x_t | x0)`` when ``y_B | y_A`` is Gaussian.

    ``coupling.conditional_b(x0)`` must return the conditional mean (same shape
    as ``x0``) and the conditional covariance ``(d, d)`` of ``y_B``.
    """
    a, b, v = eval_schedule(sched, t)
    if v == 0.0:
        raise ValueError(f"degenerate density at boundary time t={t}")
    x_t = _vec(x_t)
    cond_mean, cond_cov = coupling.conditional_b(_vec(x0))
    cond_cov = np.atleast_2d(cond_cov)
    d = cond_cov.shape[0]
    cov = b * b * cond_cov + v * np.eye(d)
    resid = x_t - a * _vec(x0) - b * cond_mean
    return -np.linalg.solve(cov, resid.T).T if resid.ndim > 1 else -np.linalg.solve(cov, resid)

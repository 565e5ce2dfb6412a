"""Ancestral sampling along the bridge in either direction with one shared network.

Forward travel (``m = 0``) starts at ``x0`` and ends at ``T``; backward travel
(``m = 1``) starts at ``xT`` and ends at ``0``.  Each step asks the network for
the missing endpoint and then draws from the analytic bridge kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import EndpointPair, backward_transition, forward_transition
from .net import NetInput, NetParams, forward
from .schedule import BridgeSchedule, TransitionVariancePolicy, delta2, eval_schedule

DIVISOR_TOL = 1e-9


class BoundaryError(ValueError):
    """Endpoint inversion requested where its divisor vanishes."""


class NonFiniteStateError(FloatingPointError):
    pass


@dataclass
class SamplerConfig:
    direction: str = "forward"
    nfe: int = 200
    eta: float = 1.0
    seed: int = 0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be forward or backward, got {self.direction!r}")
        if self.nfe < 1:
            raise ValueError("nfe must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


@dataclass
class SampleResult:
    destination: np.ndarray
    trajectory: list[tuple[float, np.ndarray]] = field(default_factory=list)
    seed: int = 0


def time_grid(sched: BridgeSchedule, nfe: int) -> np.ndarray:
    """``nfe`` equal intervals covering ``[0, T]`` (a uniform-stride subset of the discrete grid)."""
    if nfe < 1:
        raise ValueError("nfe must be positive")
    if sched.steps is None:
        return np.linspace(0.0, sched.T, nfe + 1)
    if nfe > sched.steps or sched.steps % nfe:
        raise ValueError(f"nfe={nfe} must divide the step count {sched.steps}")
    stride = sched.steps // nfe
    return np.arange(0, sched.steps + 1, stride, dtype=np.float64) * sched.dt


def _predict(model, inp: NetInput) -> np.ndarray:
    if isinstance(model, NetParams):
        return forward(model, inp)
    return np.asarray(model(inp), dtype=np.float64)


def predict_opposite_endpoint(model, sched: BridgeSchedule, t: float, x_t, known, m: int) -> np.ndarray:
    """Network estimate of ``xT`` (``m = 0``, ``known = x0``) or ``x0`` (``m = 1``, ``known = xT``).

    ``model`` is ``NetParams`` or a callable on ``NetInput`` exposing
    ``parameterization`` and ``d`` attributes.
    """
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    known = np.broadcast_to(np.asarray(known, dtype=np.float64), x_t.shape)
    a, b, v = eval_schedule(sched, t)
    if m == 0:
        inp = NetInput.from_endpoints(t / sched.T, x_t, known, 0.0, 0.0)
    else:
        inp = NetInput.from_endpoints(t / sched.T, x_t, 0.0, known, 1.0)
    out = _predict(model, inp)
    param = getattr(model, "parameterization", "z_pred")
    d = x_t.shape[1]
    if param == "endpoint_sum":
        return out - known
    if param == "endpoint_pair":
        return out[:, :d] if m == 0 else out[:, d:]
    divisor = b if m == 0 else a
    if abs(divisor) <= DIVISOR_TOL:
        raise BoundaryError(f"cannot invert for the opposite endpoint at t={t} "
                            f"({'beta' if m == 0 else 'alpha'}_t = {divisor})")
    other = a if m == 0 else b
    return (x_t - other * known - math.sqrt(v) * out) / divisor


def _noise(rng, shape, scale: float, last: bool) -> np.ndarray | float:
    if last or scale == 0.0:
        return 0.0
    return scale * rng.standard_normal(shape)


def _check_finite(x, where: str):
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError(f"non-finite state at {where}")
    return x


def forward_step(model, sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float,
                 x_t, x0, rng: np.random.Generator, last: bool = False, step_index: int = 0) -> np.ndarray:
    """Draw ``x_s`` given ``x_t`` and the source ``x0`` (``t < s``).

    From the Dirac state at ``t = 0`` the opposite endpoint is queried at the
    next grid time ``s`` with ``x := x0`` and ``x_s`` is drawn around the
    marginal mean with variance ``delta^2_{s,0}``.
    """
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    x0 = np.broadcast_to(np.asarray(x0, dtype=np.float64), x_t.shape)
    v_t = eval_schedule(sched, t).sigma2
    query_t = s if v_t == 0.0 else t
    xT_hat = predict_opposite_endpoint(model, sched, query_t, x_t, x0, 0)
    pair = EndpointPair(x0, _check_finite(xT_hat, f"step {step_index} (t={t})"))
    if v_t == 0.0:
        a_s, b_s, _ = eval_schedule(sched, s)
        mean, var = a_s * x0 + b_s * xT_hat, delta2(sched, policy, t, s)
    else:
        kern = forward_transition(sched, policy, t, s, x_t, pair)
        mean, var = kern.mean, kern.var
    x_s = mean + _noise(rng, x_t.shape, math.sqrt(var), last)
    return _check_finite(x_s, f"step {step_index} (t={t} -> s={s})")


def backward_step(model, sched: BridgeSchedule, policy: TransitionVariancePolicy, t: float, s: float,
                  x_s, xT, rng: np.random.Generator, last: bool = False, step_index: int = 0) -> np.ndarray:
    """Draw ``x_t`` given ``x_s`` and the source ``xT`` (``t < s``).

    From the Dirac state at ``s = T`` the opposite endpoint is queried at ``t``
    with ``x := xT``; the step variance is the ``s -> T`` limit of the backward
    kernel variance, ``eta * sigma_t^2`` (zero for variant A).
    """
    x_s = np.atleast_2d(np.asarray(x_s, dtype=np.float64))
    xT = np.broadcast_to(np.asarray(xT, dtype=np.float64), x_s.shape)
    v_s = eval_schedule(sched, s).sigma2
    query_t = t if v_s == 0.0 else s
    x0_hat = predict_opposite_endpoint(model, sched, query_t, x_s, xT, 1)
    pair = EndpointPair(_check_finite(x0_hat, f"step {step_index} (s={s})"), xT)
    if v_s == 0.0:
        a_t, b_t, v_t = eval_schedule(sched, t)
        if policy.variant == "B":
            delta2(sched, policy, t, s)  # raises: variant B is negative at s = T
        var = 0.0 if policy.variant == "A" else policy.eta * v_t
        mean = a_t * x0_hat + b_t * xT
    else:
        kern = backward_transition(sched, policy, t, s, x_s, pair)
        mean, var = kern.mean, kern.var
    x_t = mean + _noise(rng, x_s.shape, math.sqrt(var), last)
    return _check_finite(x_t, f"step {step_index} (s={s} -> t={t})")


def sample(model, sched: BridgeSchedule, policy: TransitionVariancePolicy, cfg: SamplerConfig,
           source) -> SampleResult:
    """Translate ``source`` (``(n, d)`` or ``(d,)``) to the opposite boundary.

    ``cfg.eta`` replaces the policy's eta; the policy variant is kept.
    """
    source = np.asarray(source, dtype=np.float64)
    squeeze = source.ndim == 1
    x = np.atleast_2d(source).copy()
    d = getattr(model, "d", x.shape[1])
    if x.shape[1] != d:
        raise ValueError(f"source dimension {x.shape[1]} != model dimension {d}")
    pol = TransitionVariancePolicy(policy.variant, cfg.eta)
    rng = np.random.default_rng(cfg.seed)
    grid = time_grid(sched, cfg.nfe)
    traj = []
    if cfg.direction == "forward":
        src = x.copy()
        if cfg.record_trajectory:
            traj.append((float(grid[0]), x.copy()))
        for i in range(len(grid) - 1):
            t, s = float(grid[i]), float(grid[i + 1])
            x = forward_step(model, sched, pol, t, s, x, src, rng, last=(i == len(grid) - 2), step_index=i)
            if cfg.record_trajectory:
                traj.append((s, x.copy()))
    else:
        src = x.copy()
        if cfg.record_trajectory:
            traj.append((float(grid[-1]), x.copy()))
        for i in range(len(grid) - 1, 0, -1):
            t, s = float(grid[i - 1]), float(grid[i])
            x = backward_step(model, sched, pol, t, s, x, src, rng, last=(i == 1),
                              step_index=len(grid) - 1 - i)
            if cfg.record_trajectory:
                traj.append((t, x.copy()))
    dest = x[0] if squeeze else x
    return SampleResult(dest, traj, cfg.seed)

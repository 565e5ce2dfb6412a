"""Bidirectional training of the masked predictor on a paired coupling."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .couplings import sample_pairs
from .csvio import format_table
from .kernels import EndpointPair
from .net import (AdamState, Grads, NetInput, NetParams, adam_step, atomic_write, backward,
                  checkpoint_bytes, _forward_cache, init_params)
from .schedule import BridgeSchedule, TransitionVariancePolicy, eval_schedule

log = logging.getLogger(__name__)

DIRECTIONS = ("bidirectional", "forward_only", "backward_only")


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class LossConfig:
    parameterization: str = "z_pred"
    direction: str = "bidirectional"
    batch: int = 256
    iterations: int = 20000
    seed: int = 0
    accum: int = 1

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction mode {self.direction!r}")
        if self.batch < 1 or self.iterations < 0 or self.accum < 1:
            raise ValueError("batch and accum must be positive, iterations non-negative")


@dataclass
class NetConfig:
    hidden: tuple[int, ...] = (128, 128)
    time_emb_dim: int = 16
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class Draw:
    """Per-element randomness of one training batch."""

    t: np.ndarray
    z: np.ndarray
    m: np.ndarray
    x_t: np.ndarray
    pair: EndpointPair

    def permuted(self, order) -> "Draw":
        order = np.asarray(order)
        return Draw(self.t[order], self.z[order], self.m[order], self.x_t[order],
                    EndpointPair(self.pair.x0[order], self.pair.xT[order]))


def draw_times(sched: BridgeSchedule, n: int, rng: np.random.Generator) -> np.ndarray:
    """Training times: grid points ``0 .. T - dt`` (discrete) or ``U[0, T)`` (continuous)."""
    if sched.steps is None:
        return rng.uniform(0.0, sched.T, n)
    return rng.integers(0, sched.steps, n) * sched.dt


def draw_batch(sched: BridgeSchedule, cfg: LossConfig, pair: EndpointPair,
               rng: np.random.Generator) -> Draw:
    n = pair.x0.shape[0]
    t = draw_times(sched, n, rng)
    z = rng.standard_normal(pair.x0.shape)
    a, b, v = eval_schedule(sched, t)
    x_t = a[:, None] * pair.x0 + b[:, None] * pair.xT + np.sqrt(v)[:, None] * z
    if cfg.direction == "bidirectional":
        m = (rng.random(n) < 0.5).astype(np.float64)
    else:
        m = np.full(n, 0.0 if cfg.direction == "forward_only" else 1.0)
    return Draw(t, z, m, x_t, pair)


def loss_target(parameterization: str, draw: Draw) -> np.ndarray:
    if parameterization == "z_pred":
        return draw.z
    if parameterization == "endpoint_sum":
        return draw.pair.x0 + draw.pair.xT
    if parameterization == "endpoint_pair":
        return np.concatenate([draw.pair.xT, draw.pair.x0], axis=1)
    raise ValueError(f"unknown parameterization {parameterization!r}")


def draw_input(sched: BridgeSchedule, draw: Draw) -> NetInput:
    return NetInput.from_endpoints(draw.t / sched.T, draw.x_t, draw.pair.x0, draw.pair.xT, draw.m)


def loss_from_draw(predictor, sched: BridgeSchedule, parameterization: str, draw: Draw):
    """Mean squared error of the prediction against the parameterization's target.

    ``predictor`` is either ``NetParams`` (gradients returned) or a callable
    ``f(net_input, draw) -> output`` (gradients ``None``).  Per-element losses
    are reduced with ``math.fsum``, so the loss does not depend on batch order.
    """
    inp = draw_input(sched, draw)
    target = loss_target(parameterization, draw)
    if isinstance(predictor, NetParams):
        if predictor.parameterization != parameterization:
            raise ValueError(f"network predicts {predictor.parameterization}, loss wants {parameterization}")
        acts = _forward_cache(predictor, inp)
        out = acts[-1]
    else:
        acts = None
        out = np.asarray(predictor(inp, draw), dtype=np.float64)
    resid = out - target
    per_elem = np.sum(resid * resid, axis=1)
    n = len(per_elem)
    loss = math.fsum(per_elem) / n
    if not math.isfinite(loss):
        raise NonFiniteLossError("non-finite training loss")
    grads = None if acts is None else backward(predictor, inp, 2.0 * resid / n, acts)
    return loss, grads


def _loss(expected: str, params, sched, cfg: LossConfig, batch: EndpointPair, rng):
    if cfg.parameterization != expected:
        raise ValueError(f"loss config parameterization is {cfg.parameterization}, expected {expected}")
    return loss_from_draw(params, sched, expected, draw_batch(sched, cfg, batch, rng))


def bdbm_loss(params, sched, cfg: LossConfig, batch: EndpointPair, rng):
    """Noise-prediction loss ``||z_phi(t, x_t, (1-m) x0, m xT) - z||^2``."""
    return _loss("z_pred", params, sched, cfg, batch, rng)


def endpoint_sum_loss(params, sched, cfg: LossConfig, batch: EndpointPair, rng):
    """Regress ``x0 + xT``; the unknown endpoint is the output minus the known one."""
    return _loss("endpoint_sum", params, sched, cfg, batch, rng)


def endpoint_pair_loss(params, sched, cfg: LossConfig, batch: EndpointPair, rng):
    """Regress the concatenation ``(xT, x0)``."""
    return _loss("endpoint_pair", params, sched, cfg, batch, rng)


def _mean_grads(acc: list[Grads]) -> Grads:
    if len(acc) == 1:
        return acc[0]
    k = float(len(acc))
    ws = [sum(g.weights[i] for g in acc) / k for i in range(len(acc[0].weights))]
    bs = [sum(g.biases[i] for g in acc) / k for i in range(len(acc[0].biases))]
    return Grads(ws, bs)


@dataclass
class TrainResult:
    params: NetParams
    losses: list[float] = field(default_factory=list)
    checkpoint: Path | None = None
    loss_csv: Path | None = None


def loss_csv_path(out_path) -> Path:
    p = Path(out_path)
    return p.with_name(p.stem + ".loss.csv")


def train(coupling, sched: BridgeSchedule, policy: TransitionVariancePolicy, loss_cfg: LossConfig,
          net_cfg: NetConfig | None = None, out_path=None, progress_every: int = 0) -> TrainResult:
    """Run ``iterations`` Adam steps; optionally write the checkpoint and ``iter,loss`` CSV.

    Artifacts are written only after the last step completes.
    """
    net_cfg = net_cfg or NetConfig()
    init_ss, data_ss = np.random.SeedSequence(loss_cfg.seed).spawn(2)
    params = init_params(coupling.d, tuple(net_cfg.hidden), net_cfg.time_emb_dim,
                         loss_cfg.parameterization, np.random.default_rng(init_ss))
    rng = np.random.default_rng(data_ss)
    state = AdamState.for_params(params, net_cfg.lr, net_cfg.beta1, net_cfg.beta2, net_cfg.eps)
    losses = []
    for it in range(loss_cfg.iterations):
        acc, total = [], 0.0
        for _ in range(loss_cfg.accum):
            pair = sample_pairs(coupling, loss_cfg.batch, rng)
            draw = draw_batch(sched, loss_cfg, pair, rng)
            loss, grads = loss_from_draw(params, sched, loss_cfg.parameterization, draw)
            acc.append(grads)
            total += loss
        params, state = adam_step(state, params, _mean_grads(acc))
        losses.append(total / loss_cfg.accum)
        if progress_every and (it + 1) % progress_every == 0:
            log.info("iter %d loss %.5f", it + 1, np.mean(losses[-progress_every:]))
    result = TrainResult(params, losses)
    if out_path is not None:
        result.checkpoint = Path(out_path)
        result.loss_csv = loss_csv_path(out_path)
        atomic_write(result.checkpoint, checkpoint_bytes(params, sched, policy))
        meta = {"seed": loss_cfg.seed, "param": loss_cfg.parameterization,
                "direction": loss_cfg.direction, "batch": loss_cfg.batch, "accum": loss_cfg.accum}
        atomic_write(result.loss_csv, format_table(["iter", "loss"],
                                                   [(str(i + 1), v) for i, v in enumerate(losses)], meta))
    return result

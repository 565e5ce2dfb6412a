"""Masked noise/endpoint predictor: a tanh MLP with hand-written reverse mode and Adam.

The network sees ``x_t``, the two masked endpoint slots, time features and the
explicit mask channels ``(m, 1 - m)``.  ``m = 0`` conditions on ``x0`` (forward
travel), ``m = 1`` on ``xT`` (backward travel).
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .schedule import BridgeSchedule, TransitionVariancePolicy

PARAMETERIZATIONS = ("z_pred", "endpoint_sum", "endpoint_pair")
MAX_FREQ = 64.0

MAGIC = b"BDBM"
FORMAT_VERSION = 1
_KIND_CODES = {"brownian": 0, "custom": 1}
_VARIANT_CODES = {"A": 0, "B": 1, "C": 2}


def embed_time(t_norm, time_emb_dim: int) -> np.ndarray:
    """Raw ``t_norm`` followed by ``dim/2`` sines and ``dim/2`` cosines.

    Angular frequencies are geometrically spaced on ``[1, MAX_FREQ]``. Output
    has ``1 + time_emb_dim`` columns.
    """
    if time_emb_dim < 0 or time_emb_dim % 2:
        raise ValueError("time_emb_dim must be a non-negative even integer")
    t = np.atleast_1d(np.asarray(t_norm, dtype=np.float64))
    half = time_emb_dim // 2
    if half == 0:
        feats = t[:, None]
    else:
        freqs = np.geomspace(1.0, MAX_FREQ, half) if half > 1 else np.ones(1)
        ang = t[:, None] * freqs[None, :]
        feats = np.concatenate([t[:, None], np.sin(ang), np.cos(ang)], axis=1)
    return feats[0] if np.ndim(t_norm) == 0 else feats


@dataclass(frozen=True)
class NetInput:
    """Batch of network inputs; slots are already masked."""

    t_norm: np.ndarray
    x_t: np.ndarray
    slot_a: np.ndarray
    slot_b: np.ndarray
    m: np.ndarray

    @classmethod
    def from_endpoints(cls, t_norm, x_t, x0, xT, m):
        x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
        n = x_t.shape[0]
        m = np.broadcast_to(np.asarray(m, dtype=np.float64), (n,))
        if np.any((m != 0.0) & (m != 1.0)):
            raise ValueError("mask must be 0 or 1")
        t_norm = np.broadcast_to(np.asarray(t_norm, dtype=np.float64), (n,))
        live = m[:, None] == 1.0
        slot_a = np.where(live, 0.0, np.broadcast_to(np.asarray(x0, dtype=np.float64), x_t.shape))
        slot_b = np.where(live, np.broadcast_to(np.asarray(xT, dtype=np.float64), x_t.shape), 0.0)
        return cls(t_norm, x_t, slot_a, slot_b, m)

    def features(self, time_emb_dim: int, mask_channels: bool = True) -> np.ndarray:
        cols = [self.x_t, self.slot_a, self.slot_b, embed_time(self.t_norm, time_emb_dim)]
        if mask_channels:
            cols.append(np.stack([self.m, 1.0 - self.m], axis=1))
        return np.concatenate(cols, axis=1)


def input_dim(d: int, time_emb_dim: int, mask_channels: bool = True) -> int:
    return 3 * d + 1 + time_emb_dim + (2 if mask_channels else 0)


def output_dim(d: int, parameterization: str) -> int:
    return 2 * d if parameterization == "endpoint_pair" else d


@dataclass
class NetParams:
    d: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    parameterization: str = "z_pred"
    time_emb_dim: int = 16
    mask_channels: bool = True

    def __post_init__(self):
        if self.parameterization not in PARAMETERIZATIONS:
            raise ValueError(f"unknown parameterization {self.parameterization!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        dims = self.layer_dims
        if dims[0] != input_dim(self.d, self.time_emb_dim, self.mask_channels):
            raise ValueError(f"input width {dims[0]} inconsistent with d={self.d}")
        if dims[-1] != output_dim(self.d, self.parameterization):
            raise ValueError(f"output width {dims[-1]} inconsistent with {self.parameterization}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: fan-in {w.shape[1]} does not chain")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "NetParams":
        return NetParams(self.d, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                         self.parameterization, self.time_emb_dim, self.mask_channels)

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]


def init_params(d: int, hidden=(128, 128), time_emb_dim: int = 16, parameterization: str = "z_pred",
                rng: np.random.Generator | None = None, mask_channels: bool = True) -> NetParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(0) if rng is None else rng
    dims = [input_dim(d, time_emb_dim, mask_channels), *hidden, output_dim(d, parameterization)]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return NetParams(d, weights, biases, parameterization, time_emb_dim, mask_channels)


def _forward_cache(params: NetParams, inp: NetInput):
    x = inp.features(params.time_emb_dim, params.mask_channels)
    if x.shape[1] != params.layer_dims[0]:
        raise ValueError(f"input width {x.shape[1]} != network input {params.layer_dims[0]}")
    acts = [x]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = acts[-1] @ w.T + b
        acts.append(h if i == last else np.tanh(h))
    return acts


def forward(params: NetParams, inp: NetInput) -> np.ndarray:
    return _forward_cache(params, inp)[-1]


@dataclass
class Grads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]


def backward(params: NetParams, inp: NetInput, grad_out, acts=None) -> Grads:
    """Gradients of ``sum(output * grad_out)`` with respect to every weight and bias."""
    if acts is None:
        acts = _forward_cache(params, inp)
    delta = np.asarray(grad_out, dtype=np.float64)
    if delta.shape != acts[-1].shape:
        raise ValueError(f"grad_out shape {delta.shape} != output shape {acts[-1].shape}")
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ params.weights[i]) * (1.0 - acts[i] * acts[i])
    return Grads(gw, gb)


def grad_check(params: NetParams, inp: NetInput, probes: int, rng: np.random.Generator | None = None,
               step: float = 1e-5, grad_out=None) -> float:
    """Worst relative error of ``backward`` against central differences on random parameters."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    out = forward(params, inp)
    g = rng.standard_normal(out.shape) if grad_out is None else np.asarray(grad_out, dtype=np.float64)
    analytic = backward(params, inp, g).arrays()
    arrays = params.copy().arrays()
    probe_params = NetParams(params.d, arrays[0::2], arrays[1::2], params.parameterization,
                             params.time_emb_dim, params.mask_channels)
    sizes = np.array([a.size for a in arrays])
    worst = 0.0
    for _ in range(probes):
        which = int(rng.choice(len(arrays), p=sizes / sizes.sum()))
        flat = arrays[which].reshape(-1)
        j = int(rng.integers(flat.size))
        orig = flat[j]
        flat[j] = orig + step
        f_plus = float(np.sum(forward(probe_params, inp) * g))
        flat[j] = orig - step
        f_minus = float(np.sum(forward(probe_params, inp) * g))
        flat[j] = orig
        numeric = (f_plus - f_minus) / (2.0 * step)
        exact = analytic[which].reshape(-1)[j]
        denom = max(abs(exact), abs(numeric), 1e-8)
        worst = max(worst, abs(exact - numeric) / denom)
    return worst


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: NetParams, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        zeros = [np.zeros_like(a) for a in params.arrays()]
        return cls(lr, beta1, beta2, eps, 0, zeros, [z.copy() for z in zeros])


def adam_step(state: AdamState, params: NetParams, grads: Grads) -> tuple[NetParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state, inputs untouched."""
    garr = grads.arrays()
    parr = params.arrays()
    if len(garr) != len(parr) or any(g.shape != p.shape for g, p in zip(garr, parr)):
        raise ValueError("gradient shapes do not match parameters")
    for i, g in enumerate(garr):
        if not np.all(np.isfinite(g)):
            kind = "weight" if i % 2 == 0 else "bias"
            raise NonFiniteGradientError(f"non-finite {kind} gradient in layer {i // 2}")
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(parr, garr, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_p.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    out = NetParams(params.d, new_p[0::2], new_p[1::2], params.parameterization,
                    params.time_emb_dim, params.mask_channels)
    return out, AdamState(state.lr, state.beta1, state.beta2, state.eps, t, new_m, new_v)


# -- checkpoints -------------------------------------------------------------

class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


def checkpoint_bytes(params: NetParams, schedule: BridgeSchedule,
                     policy: TransitionVariancePolicy) -> bytes:
    parts = [MAGIC, struct.pack("<IBBII", FORMAT_VERSION, PARAMETERIZATIONS.index(params.parameterization),
                                int(params.mask_channels), params.d, params.time_emb_dim)]
    steps = 0 if schedule.steps is None else schedule.steps
    parts.append(struct.pack("<BddIBd", _KIND_CODES[schedule.kind], schedule.k, schedule.T, steps,
                             _VARIANT_CODES[policy.variant], policy.eta))
    if schedule.kind == "custom":
        tab = np.ascontiguousarray(schedule.table, dtype="<f8")
        parts.append(struct.pack("<I", tab.shape[0]))
        parts.append(tab.tobytes())
    parts.append(struct.pack("<I", len(params.weights)))
    for w, b in zip(params.weights, params.biases):
        parts.append(struct.pack("<II", *w.shape))
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(parts)


def atomic_write(path, data: bytes | str):
    """Write via a temp file in the target directory and rename into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode("utf-8") if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(params: NetParams, schedule: BridgeSchedule, policy: TransitionVariancePolicy, path):
    atomic_write(path, checkpoint_bytes(params, schedule, policy))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError(
                f"checkpoint truncated at byte {len(self.data)} (needed {self.pos + n})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def parse_checkpoint(data: bytes):
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise BadMagicError("not a BDBM checkpoint (bad magic)")
    version, pcode, mask_flag, d, emb = r.unpack("<IBBII")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    kind_code, k, T, steps, vcode, eta = r.unpack("<BddIBd")
    kinds = {v: n for n, v in _KIND_CODES.items()}
    variants = {v: n for n, v in _VARIANT_CODES.items()}
    if kind_code not in kinds or vcode not in variants or pcode >= len(PARAMETERIZATIONS):
        raise CheckpointError("unknown enum code in checkpoint header")
    if kinds[kind_code] == "custom":
        (n_knots,) = r.unpack("<I")
        tab = r.floats(4 * n_knots).reshape(n_knots, 4)
        schedule = BridgeSchedule("custom", k, T, steps or None, tab)
    else:
        schedule = BridgeSchedule("brownian", k, T, steps or None)
    policy = TransitionVariancePolicy(variants[vcode], eta)
    (n_layers,) = r.unpack("<I")
    weights, biases = [], []
    for _ in range(n_layers):
        rows, cols = r.unpack("<II")
        weights.append(r.floats(rows * cols).reshape(rows, cols))
        biases.append(r.floats(rows))
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after checkpoint payload")
    try:
        params = NetParams(d, weights, biases, PARAMETERIZATIONS[pcode], emb, bool(mask_flag))
    except ValueError as exc:
        raise CheckpointError(f"inconsistent checkpoint: {exc}") from None
    return params, schedule, policy


def load_checkpoint(path):
    """Return ``(params, schedule, policy)``; raises a ``CheckpointError`` subclass on corruption."""
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())

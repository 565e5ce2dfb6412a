"""Exact and Monte-Carlo oracles for the bridge mathematics, and sample metrics.

Thresholds: 1e-12 for exact finite-chain algebra, 1e-9 for closed-form
Gaussian identities (1e-10 for mean-form agreement), 3 standard errors for
Monte-Carlo checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import kernels as K
from .kernels import EndpointPair
from .schedule import (BridgeSchedule, PolicyIncompatibleError, TransitionVariancePolicy, delta2,
                       eval_schedule)

EXACT_TOL = 1e-12
GAUSS_TOL = 1e-9
FORM_TOL = 1e-10
MC_SIGMAS = 3.0


# -- finite-state Doob h-transform -------------------------------------------

@dataclass
class ChainSpec:
    """Time-inhomogeneous chain; ``kernels[t][i, j] = P(X_{t+1} = j | X_t = i)``."""

    n_states: int
    kernels: list[np.ndarray]

    def __post_init__(self):
        self.kernels = [np.asarray(p, dtype=np.float64) for p in self.kernels]
        if not self.kernels:
            raise ValueError("chain needs at least one step")
        for t, p in enumerate(self.kernels):
            if p.shape != (self.n_states, self.n_states):
                raise ValueError(f"step {t}: kernel shape {p.shape}")
            if np.any(p < 0.0) or np.any(p > 1.0):
                raise ValueError(f"step {t}: entries outside [0, 1]")
            if np.max(np.abs(p.sum(axis=1) - 1.0)) > EXACT_TOL:
                raise ValueError(f"step {t}: rows do not sum to 1")

    @property
    def step_count(self) -> int:
        return len(self.kernels)


def random_chain(rng: np.random.Generator, max_states: int = 16, max_steps: int = 10,
                 sparsity: float = 0.0) -> ChainSpec:
    """Random row-stochastic chain; ``sparsity`` zeroes that fraction of entries (diagonal kept)."""
    n = int(rng.integers(2, max_states + 1))
    steps = int(rng.integers(1, max_steps + 1))
    mats = []
    for _ in range(steps):
        w = rng.exponential(size=(n, n))
        if sparsity:
            w *= rng.random((n, n)) >= sparsity
            w[np.arange(n), np.arange(n)] += 1e-3
        mats.append(w / w.sum(axis=1, keepdims=True))
    return ChainSpec(n, mats)


def h_backward(chain: ChainSpec, target: int) -> np.ndarray:
    """``h[t, x] = P(X_T = target | X_t = x)`` by backward matrix-vector products."""
    if not 0 <= target < chain.n_states:
        raise ValueError(f"target state {target} out of range")
    h = np.zeros((chain.step_count + 1, chain.n_states))
    h[-1, target] = 1.0
    for t in range(chain.step_count - 1, -1, -1):
        h[t] = chain.kernels[t] @ h[t + 1]
    return h


def _reachable(chain: ChainSpec, start: int) -> np.ndarray:
    reach = np.zeros((chain.step_count + 1, chain.n_states), dtype=bool)
    reach[0, start] = True
    for t, p in enumerate(chain.kernels):
        reach[t + 1] = (reach[t].astype(float) @ (p > 0)) > 0
    return reach


def h_transform_kernel(chain: ChainSpec, h: np.ndarray, start: int | None = None) -> ChainSpec:
    """Doob transform ``p~(j | i) = p(j | i) h[t+1, j] / h[t, i]``.

    Every row is requested unless ``start`` is given, in which case only rows
    reachable from ``start`` through states with ``h > 0`` are; the remaining
    rows keep the original kernel.
    """
    if start is None:
        requested = np.ones((chain.step_count + 1, chain.n_states), dtype=bool)
    else:
        requested = _reachable(chain, start) & (h > 0)
        requested[0] = False
        requested[0, start] = True
    mats = []
    for t, p in enumerate(chain.kernels):
        q = p.copy()
        rows = np.flatnonzero(requested[t])
        bad = rows[h[t, rows] <= 0.0]
        if bad.size:
            raise ValueError(f"h(t={t}, x={int(bad[0])}) = 0: state cannot reach the target")
        q[rows] = p[rows] * h[t + 1][None, :] / h[t, rows][:, None]
        mats.append(q)
    return ChainSpec(chain.n_states, mats)


def chain_marginals(chain: ChainSpec, start: int) -> np.ndarray:
    pi = np.zeros((chain.step_count + 1, chain.n_states))
    pi[0, start] = 1.0
    for t, p in enumerate(chain.kernels):
        pi[t + 1] = pi[t] @ p
    return pi


def conditioned_marginals(chain: ChainSpec, start: int, target: int) -> np.ndarray:
    """``P(X_t = x | X_0 = start, X_T = target)`` by Bayes over products of path matrices."""
    n, steps = chain.n_states, chain.step_count
    prefix = [np.eye(n)]
    for p in chain.kernels:
        prefix.append(prefix[-1] @ p)
    suffix = [np.eye(n)]
    for p in reversed(chain.kernels):
        suffix.append(p @ suffix[-1])
    suffix = suffix[::-1]
    total = prefix[-1][start, target]
    if total <= 0.0:
        raise ValueError(f"target {target} unreachable from {start}")
    return np.array([prefix[t][start] * suffix[t][:, target] / total for t in range(steps + 1)])


@dataclass
class DoobResult:
    deviation: float
    terminal_mass: float


def doob_result(chain: ChainSpec, start: int, target: int) -> DoobResult:
    h = h_backward(chain, target)
    if h[0, start] <= 0.0:
        raise ValueError(f"target {target} unreachable from {start}")
    tilde = h_transform_kernel(chain, h, start)
    got = chain_marginals(tilde, start)
    want = conditioned_marginals(chain, start, target)
    return DoobResult(float(np.max(np.abs(got - want))), float(got[-1, target]))


def doob_check(chain: ChainSpec, start: int, target: int) -> float:
    """Max deviation between h-transformed and exactly conditioned marginals.

    Raises ``AssertionError`` if the terminal mass on ``target`` is not 1.
    """
    res = doob_result(chain, start, target)
    if abs(res.terminal_mass - 1.0) > EXACT_TOL:
        raise AssertionError(f"terminal mass on target is {res.terminal_mass!r}")
    return res.deviation


# -- Gaussian kernel identities ----------------------------------------------

def _random_times(sched: BridgeSchedule, rng, t_range=None, interior=False):
    lo, hi = (0.0, sched.T) if t_range is None else t_range
    while True:
        if sched.steps is None:
            t, s = np.sort(rng.uniform(lo, hi, 2))
        else:
            i_lo, i_hi = int(math.ceil(lo / sched.dt)), int(math.floor(hi / sched.dt))
            i, j = np.sort(rng.integers(i_lo, i_hi + 1, 2))
            t, s = i * sched.dt, j * sched.dt
        if t < s and (not interior or (t > 0.0 and s < sched.T)):
            return float(t), float(s)


def _random_policy(policy, rng, eta_floor=0.0):
    if policy.variant == "A":
        return policy
    return TransitionVariancePolicy(policy.variant, float(rng.uniform(eta_floor, 1.0)))


def _random_pair(rng, d=2, scale=2.0):
    return EndpointPair(scale * rng.standard_normal(d), scale * rng.standard_normal(d))


def cke_composition_check(sched: BridgeSchedule, policy: TransitionVariancePolicy, trials: int,
                          rng: np.random.Generator, t_range=None, random_eta: bool = True) -> float:
    """Push the time-``t`` marginal through the forward kernel; compare with the time-``s`` marginal."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    worst = 0.0
    for _ in range(trials):
        t, s = _random_times(sched, rng, t_range)
        pol = _random_policy(policy, rng) if random_eta else policy
        pair = _random_pair(rng)
        marg_t = K.marginal(sched, t, pair)
        target = K.marginal(sched, s, pair)
        at_mean = K.forward_transition(sched, pol, t, s, marg_t.mean, pair)
        # the kernel mean is affine in x_t: recover its slope with a unit probe
        probe = K.forward_transition(sched, pol, t, s, marg_t.mean + 1.0, pair)
        slope = float(np.mean(probe.mean - at_mean.mean))
        composed_var = slope * slope * marg_t.var + at_mean.var
        worst = max(worst, float(np.max(np.abs(at_mean.mean - target.mean))),
                    abs(composed_var - target.var))
    return worst


def bayes_duality_check(sched: BridgeSchedule, policy: TransitionVariancePolicy, trials: int,
                        rng: np.random.Generator, t_range=None, random_eta: bool = True) -> float:
    """``log q(x_t|x_s) + log q(x_s) - log q(x_s|x_t) - log q(x_t)`` over random interior draws.

    For the deterministic variant A the densities do not exist; the residual
    is then ``|backward_mean(forward_mean(x_t)) - x_t|``.
    """
    worst = 0.0
    for _ in range(trials):
        t, s = _random_times(sched, rng, t_range, interior=True)
        pol = _random_policy(policy, rng, eta_floor=0.05) if random_eta else policy
        pair = _random_pair(rng)
        marg_t = K.marginal(sched, t, pair)
        marg_s = K.marginal(sched, s, pair)
        x_t = marg_t.mean + math.sqrt(marg_t.var) * rng.standard_normal(pair.d)
        fwd = K.forward_transition(sched, pol, t, s, x_t, pair)
        if fwd.var == 0.0:
            back = K.backward_transition(sched, pol, t, s, fwd.mean, pair)
            worst = max(worst, float(np.max(np.abs(back.mean - x_t))), back.var)
            continue
        x_s = fwd.mean + math.sqrt(fwd.var) * rng.standard_normal(pair.d)
        fwd = K.forward_transition(sched, pol, t, s, x_t, pair)
        back = K.backward_transition(sched, pol, t, s, x_s, pair)
        lhs = K.log_density(back, x_t) + K.log_density(marg_s, x_s)
        rhs = K.log_density(fwd, x_s) + K.log_density(marg_t, x_t)
        worst = max(worst, abs(lhs - rhs))
    return worst


def form_equivalence_check(sched: BridgeSchedule, policy: TransitionVariancePolicy, trials: int,
                           rng: np.random.Generator, t_range=None) -> float:
    """Endpoint-form vs noise-form means, forward and backward, with the recorded noise."""
    worst = 0.0
    for _ in range(trials):
        t, s = _random_times(sched, rng, t_range, interior=True)
        pol = _random_policy(policy, rng)
        pair = _random_pair(rng)
        st = K.sample_marginal(sched, t, pair, rng)
        a = K.forward_transition(sched, pol, t, s, st.x, pair).mean
        b = K.forward_mean_zform(sched, pol, t, s, st.x, pair.x0, st.z)
        ss = K.sample_marginal(sched, s, pair, rng)
        c = K.backward_transition(sched, pol, t, s, ss.x, pair).mean
        e = K.backward_mean_zform(sched, pol, t, s, ss.x, pair.xT, ss.z)
        worst = max(worst, float(np.max(np.abs(a - b))), float(np.max(np.abs(c - e))))
    return worst


def time_reversal_check(sched: BridgeSchedule, policy: TransitionVariancePolicy, trials: int,
                        rng: np.random.Generator) -> float:
    """Backward kernel vs the forward kernel on mirrored times with swapped endpoints."""
    if sched.kind != "brownian":
        raise ValueError("time-reversal symmetry holds for the Brownian schedule")
    worst = 0.0
    for _ in range(trials):
        t, s = _random_times(sched, rng, interior=True)
        pol = _random_policy(policy, rng)
        pair = _random_pair(rng)
        x_s = K.marginal(sched, s, pair).mean + rng.standard_normal(pair.d)
        back = K.backward_transition(sched, pol, t, s, x_s, pair)
        mirror = K.forward_transition(sched, pol, sched.T - s, sched.T - t, x_s,
                                      EndpointPair(pair.xT, pair.x0))
        worst = max(worst, float(np.max(np.abs(back.mean - mirror.mean))), abs(back.var - mirror.var))
    return worst


def final_step_collapse_check(sched: BridgeSchedule, policy: TransitionVariancePolicy, trials: int,
                              rng: np.random.Generator) -> float:
    """At ``s = T`` the forward step lands on ``(x_t - alpha_t x0 - sigma_t z) / beta_t``."""
    worst = 0.0
    for _ in range(trials):
        t, _ = _random_times(sched, rng, interior=True)
        pair = _random_pair(rng)
        st = K.sample_marginal(sched, t, pair, rng)
        a, b, v = eval_schedule(sched, t)
        inverted = (st.x - a * pair.x0 - math.sqrt(v) * st.z) / b
        zf = K.forward_mean_zform(sched, policy, t, sched.T, st.x, pair.x0, st.z)
        kern = K.forward_transition(sched, policy, t, sched.T, st.x, pair)
        worst = max(worst, float(np.max(np.abs(zf - inverted))), float(np.max(np.abs(kern.mean - pair.xT))),
                    kern.var, delta2(sched, policy, t, sched.T))
    return worst


# -- Tweedie -------------------------------------------------------------------

def tweedie_mc_check(coupling, sched: BridgeSchedule, t: float, n_samples: int, rng: np.random.Generator,
                     y_a=None, score_scale: float = 1.0, min_hits: int = 100, target_hits: int = 2000,
                     offset_sd: float = 1.0) -> float:
    """Normalized deviation between Tweedie endpoint estimates and a Monte-Carlo posterior mean.

    With ``y_A`` fixed, ``(y_B, x_t)`` pairs are simulated; samples whose ``x_t``
    falls in a ball around a query point one marginal standard deviation off
    the mode are kept. The window radius is the distance to the
    ``target_hits``-th nearest sample. Over the window the average of
    ``y_B - tweedie(x_t)`` is zero in expectation; the return value is that
    average divided by its standard error (largest-magnitude coordinate).
    """
    a, b, v = eval_schedule(sched, t)
    if v == 0.0 or b == 0.0:
        raise ValueError("tweedie check needs an interior time")
    d = coupling.d
    y_a = np.asarray(coupling.mean[:d] if y_a is None else y_a, dtype=np.float64)
    cond_mean, cond_cov = coupling.conditional_b(y_a)
    chol = np.linalg.cholesky(np.atleast_2d(cond_cov))
    y_b = cond_mean + rng.standard_normal((n_samples, d)) @ chol.T
    x = a * y_a + b * y_b + math.sqrt(v) * rng.standard_normal((n_samples, d))
    marg_sd = math.sqrt(b * b * float(np.mean(np.diag(np.atleast_2d(cond_cov)))) + v)
    query = a * y_a + b * cond_mean + offset_sd * marg_sd
    dist = np.linalg.norm(x - query, axis=1)
    k = min(target_hits, n_samples)
    radius = np.partition(dist, k - 1)[k - 1]
    hits = dist <= radius
    if hits.sum() < min_hits:
        raise ValueError(f"only {int(hits.sum())} samples in the window; increase n_samples")
    score = score_scale * K.analytic_score_gaussian_coupling(sched, t, x[hits], y_a, coupling)
    est = K.tweedie_endpoint(x[hits], y_a, a, b, v, score)
    resid = y_b[hits] - est
    se = resid.std(axis=0, ddof=1) / math.sqrt(hits.sum())
    zs = resid.mean(axis=0) / se
    return float(zs[np.argmax(np.abs(zs))])


# -- sample metrics ------------------------------------------------------------

@dataclass
class MetricReport:
    metric: str
    value: float
    sizes: tuple[int, ...]
    seed: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"metric {self.metric} is not finite")


def _as_set(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("sample set is empty")
    return x


def energy_distance(X, Y) -> float:
    """V-statistic ``2 E|X-Y| - E|X-X'| - E|Y-Y'|``."""
    X, Y = _as_set(X), _as_set(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("sample sets differ in dimension")
    return float(2.0 * cdist(X, Y).mean() - cdist(X, X).mean() - cdist(Y, Y).mean())


def energy_permutation_quantile(X, Y, rng: np.random.Generator, n_perm: int = 200,
                                q: float = 0.95) -> float:
    """Quantile of the energy distance under random relabelling of the pooled sample."""
    X, Y = _as_set(X), _as_set(Y)
    pooled = np.vstack([X, Y])
    dist = cdist(pooled, pooled)
    n, m = len(X), len(Y)
    stats = np.empty(n_perm)
    for i in range(n_perm):
        idx = rng.permutation(n + m)
        a, b = idx[:n], idx[n:]
        stats[i] = (2.0 * dist[np.ix_(a, b)].mean() - dist[np.ix_(a, a)].mean()
                    - dist[np.ix_(b, b)].mean())
    return float(np.quantile(stats, q))


def coupling_mse(generated, reference, pairing=None) -> float:
    """Mean squared distance between ``generated[i]`` and ``reference[pairing[i]]``."""
    g, r = _as_set(generated), _as_set(reference)
    idx = np.arange(len(g)) if pairing is None else np.asarray(pairing)
    if len(idx) != len(g) or len(g) != len(r):
        raise ValueError("generated and reference sets must have equal cardinality")
    diff = g - r[idx]
    return float(np.mean(np.sum(diff * diff, axis=1)))


def diversity(per_source_sets) -> float:
    """Per-coordinate sample std within each source's set, averaged over coordinates and sources."""
    stds = []
    for group in per_source_sets:
        group = _as_set(group)
        if len(group) < 2:
            raise ValueError("diversity needs at least two samples per source")
        stds.append(group.std(axis=0, ddof=1).mean())
    if not stds:
        raise ValueError("no source sets given")
    return float(np.mean(stds))


# -- suites --------------------------------------------------------------------

@dataclass
class CheckRow:
    check: str
    value: float
    threshold: float
    passed: bool
    comparison: str = "<"


def _row(name, fn, threshold, comparison="<"):
    try:
        value = float(fn())
    except (ValueError, ArithmeticError, AssertionError, PolicyIncompatibleError) as exc:
        return CheckRow(f"{name} [{type(exc).__name__}: {exc}]", math.nan, threshold, False, comparison)
    if comparison == "<":
        ok = value < threshold
    elif comparison == ">":
        ok = value > threshold
    else:
        ok = value == threshold
    return CheckRow(name, value, threshold, bool(ok), comparison)


def beta_compatible_schedule(k: float = 2.0, T: float = 1000.0, steps: int = 1000) -> BridgeSchedule:
    """Custom table with ``sigma^2 = k u^3 (1 - u)``; variant B is valid for ``t < s <= T/2``."""
    u = np.linspace(0.0, 1.0, steps + 1)
    return BridgeSchedule.from_table(u * T, 1.0 - u, u, k * u**3 * (1.0 - u), k=k, steps=steps)


def kernel_suite(rng: np.random.Generator, trials: int = 1000) -> list[CheckRow]:
    brown = BridgeSchedule.brownian(k=2.0, T=1000.0, steps=1000)
    unit = BridgeSchedule.brownian(k=2.0, T=1.0, steps=None)
    beta_sched = beta_compatible_schedule()
    half = (0.0, beta_sched.T / 2)
    rows = [
        _row("delta2 spot (C, eta=1, t=0.25, s=0.5) == 1/3",
             lambda: abs(delta2(unit, TransitionVariancePolicy("C", 1.0), 0.25, 0.5) - 1.0 / 3.0),
             EXACT_TOL),
        _row("delta2 spot (C, eta=0.5) == 1/6",
             lambda: abs(delta2(unit, TransitionVariancePolicy("C", 0.5), 0.25, 0.5) - 1.0 / 6.0),
             EXACT_TOL),
        _row("backward variance spot (C, eta=1) == 1/4",
             lambda: abs(K.backward_transition(unit, TransitionVariancePolicy("C", 1.0), 0.25, 0.5, 0.6,
                                               EndpointPair([0.0], [1.0])).var - 0.25), EXACT_TOL),
    ]
    for variant, sched, t_range in (("A", brown, None), ("C", brown, None), ("B", beta_sched, half)):
        pol = TransitionVariancePolicy(variant, 1.0)
        tag = f"{variant}/{'brownian' if sched is brown else 'beta-table'}"
        rows.append(_row(f"cke composition {tag}",
                         lambda: cke_composition_check(sched, pol, trials, rng, t_range), GAUSS_TOL))
        rows.append(_row(f"bayes duality {tag}",
                         lambda: bayes_duality_check(sched, pol, trials, rng, t_range), GAUSS_TOL))
        rows.append(_row(f"mean forms {tag}",
                         lambda: form_equivalence_check(sched, pol, trials, rng, t_range), FORM_TOL))
    for variant in ("A", "C"):
        pol = TransitionVariancePolicy(variant, 1.0)
        rows.append(_row(f"time reversal {variant}/brownian",
                         lambda: time_reversal_check(brown, pol, trials, rng), FORM_TOL))
    rows.append(_row("final-step collapse C/brownian",
                     lambda: final_step_collapse_check(brown, TransitionVariancePolicy("C", 1.0), trials, rng),
                     FORM_TOL))
    return rows


def doob_suite(rng: np.random.Generator, chains: int = 100) -> list[CheckRow]:
    def run():
        worst_dev, worst_mass = 0.0, 0.0
        for _ in range(chains):
            chain = random_chain(rng, sparsity=float(rng.choice([0.0, 0.5])))
            target = int(rng.integers(chain.n_states))
            h = h_backward(chain, target)
            starts = np.flatnonzero(h[0] > 0)
            start = int(rng.choice(starts))
            res = doob_result(chain, start, target)
            worst_dev = max(worst_dev, res.deviation)
            worst_mass = max(worst_mass, abs(res.terminal_mass - 1.0))
        return worst_dev, worst_mass

    cache = {}

    def get(i):
        if "r" not in cache:
            cache["r"] = run()
        return cache["r"][i]

    return [_row(f"doob marginals ({chains} random chains)", lambda: get(0), EXACT_TOL),
            _row("doob terminal mass |1 - p(target)|", lambda: get(1), EXACT_TOL)]


def default_tweedie_coupling():
    from .couplings import GaussianCoupling
    return GaussianCoupling.linear([[0.8]], [0.3], 0.5)


def tweedie_suite(rng: np.random.Generator, n_samples: int = 100_000) -> list[CheckRow]:
    sched = BridgeSchedule.brownian(k=2.0, T=1000.0, steps=1000)
    coupling = default_tweedie_coupling()
    seed = int(rng.integers(2**31))
    return [
        _row("tweedie |z| (n=1e5)",
             lambda: abs(tweedie_mc_check(coupling, sched, 250.0, n_samples, np.random.default_rng(seed))),
             MC_SIGMAS),
        _row("tweedie corrupted score x2 detected |z|",
             lambda: abs(tweedie_mc_check(coupling, sched, 250.0, n_samples, np.random.default_rng(seed),
                                          score_scale=2.0)), MC_SIGMAS, ">"),
    ]


def net_suite(rng: np.random.Generator, probes: int = 200) -> list[CheckRow]:
    from .net import NetInput, forward, grad_check, init_params

    d = 2
    params = init_params(d, rng=rng)
    n = 8
    inp = NetInput.from_endpoints(rng.uniform(0, 1, n), rng.standard_normal((n, d)),
                                  rng.standard_normal((n, d)), rng.standard_normal((n, d)),
                                  (rng.random(n) < 0.5).astype(float))

    def mask_dead_slot():
        x_t, x0, xT = (rng.standard_normal((n, d)) for _ in range(3))
        worst = 0.0
        for m in (0.0, 1.0):
            base = forward(params, NetInput.from_endpoints(0.3, x_t, x0, xT, m))
            if m == 0.0:
                pert = NetInput.from_endpoints(0.3, x_t, x0, xT + 5.0, m)
            else:
                pert = NetInput.from_endpoints(0.3, x_t, x0 + 5.0, xT, m)
            worst = max(worst, float(np.max(np.abs(forward(params, pert) - base))))
        return worst

    def mask_channel_separation():
        x_t = rng.standard_normal((n, d))
        zeros = np.zeros((n, d))
        a = forward(params, NetInput.from_endpoints(0.3, x_t, zeros, zeros, 0.0))
        b = forward(params, NetInput.from_endpoints(0.3, x_t, zeros, zeros, 1.0))
        return float(np.max(np.abs(a - b)))

    return [
        _row(f"grad check ({probes} probes, default net)", lambda: grad_check(params, inp, probes, rng), 1e-4),
        _row("mask dead-slot invariance (bitwise)", mask_dead_slot, 0.0, "=="),
        _row("mask channels distinguish m with zero endpoints", mask_channel_separation, 0.0, ">"),
    ]


SUITES = ("kernels", "doob", "tweedie", "grad")


def run_suite(name: str, seed: int = 0) -> list[CheckRow]:
    if name == "all":
        rows = []
        for i, sub in enumerate(SUITES):
            rows.extend(run_suite(sub, seed + i))
        return rows
    rng = np.random.default_rng(seed)
    if name == "kernels":
        return kernel_suite(rng)
    if name == "doob":
        return doob_suite(rng)
    if name == "tweedie":
        return tweedie_suite(rng)
    if name == "grad":
        return net_suite(rng)
    raise ValueError(f"unknown suite {name!r}")

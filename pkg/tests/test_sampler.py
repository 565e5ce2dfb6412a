import numpy as np
import pytest

from bdbm.net import init_params
from bdbm.sampler import (BoundaryError, NonFiniteStateError, SamplerConfig, backward_step, forward_step,
                          predict_opposite_endpoint, sample, time_grid)
from bdbm.schedule import BridgeSchedule, PolicyIncompatibleError, TransitionVariancePolicy

UNIT = BridgeSchedule.brownian(k=2.0, T=1.0, steps=None)
SCHED = BridgeSchedule.brownian(k=2.0, T=1000.0, steps=1000)
C1 = TransitionVariancePolicy("C", 1.0)


class Stub:
    """Test double on ``NetInput`` with a fixed parameterization."""

    def __init__(self, fn, parameterization="z_pred", d=1):
        self.fn, self.parameterization, self.d = fn, parameterization, d
        self.calls = []

    def __call__(self, inp):
        self.calls.append(inp)
        return self.fn(inp)


def zero_z(d=1):
    return Stub(lambda inp: np.zeros_like(inp.x_t), d=d)


def oracle_sum(mapping, d=2):
    """Endpoint-sum oracle for the deterministic coupling ``xT = mapping(x0)``."""

    def fn(inp):
        if inp.m[0] == 0.0:
            return inp.slot_a + mapping(inp.slot_a)
        return inp.slot_b + inverse(inp.slot_b)

    inverse = getattr(mapping, "inverse")
    return Stub(fn, "endpoint_sum", d)


class Double:
    def __call__(self, x):
        return 2.0 * x

    @staticmethod
    def inverse(y):
        return 0.5 * y


def test_time_grid():
    g = time_grid(SCHED, 200)
    assert len(g) == 201 and g[1] == 5.0 and g[-1] == 1000.0
    np.testing.assert_array_equal(time_grid(SCHED, 1000), SCHED.grid())
    with pytest.raises(ValueError):
        time_grid(SCHED, 3)
    np.testing.assert_allclose(time_grid(UNIT, 4), [0, 0.25, 0.5, 0.75, 1.0])


def test_predict_opposite_endpoint_z_inversion():
    assert predict_opposite_endpoint(zero_z(), UNIT, 0.25, [[0.4]], [[0.0]], 0)[0, 0] == pytest.approx(1.6)
    # backward inversion divides by alpha
    assert predict_opposite_endpoint(zero_z(), UNIT, 0.5, [[0.6]], [[1.0]], 1)[0, 0] == pytest.approx(0.2)
    with pytest.raises(BoundaryError):
        predict_opposite_endpoint(zero_z(), UNIT, 0.0, [[0.4]], [[0.0]], 0)
    with pytest.raises(BoundaryError):
        predict_opposite_endpoint(zero_z(), UNIT, 1.0, [[0.4]], [[0.0]], 1)


def test_predict_with_true_noise_is_exact():
    rng = np.random.default_rng(0)
    x0, xT, z = rng.standard_normal((3, 5, 2))
    a, b, v = 0.6, 0.4, 2.0 * 0.24
    x_t = a * x0 + b * xT + np.sqrt(v) * z
    model = Stub(lambda inp: z, d=2)
    np.testing.assert_allclose(predict_opposite_endpoint(model, SCHED, 400.0, x_t, x0, 0), xT, atol=1e-12)
    np.testing.assert_allclose(predict_opposite_endpoint(model, SCHED, 400.0, x_t, xT, 1), x0, atol=1e-12)


def test_predict_endpoint_parameterizations():
    x0 = np.array([[1.0, 2.0]])
    assert np.array_equal(predict_opposite_endpoint(Stub(lambda i: np.full((1, 2), 5.0), "endpoint_sum", 2),
                                                    UNIT, 0.0, x0, x0, 0), [[4.0, 3.0]])
    pair = Stub(lambda i: np.array([[7.0, 8.0, 9.0, 10.0]]), "endpoint_pair", 2)
    assert np.array_equal(predict_opposite_endpoint(pair, UNIT, 0.0, x0, x0, 0), [[7.0, 8.0]])
    assert np.array_equal(predict_opposite_endpoint(pair, UNIT, 1.0, x0, x0, 1), [[9.0, 10.0]])


def test_forward_step_s1():
    rng = np.random.default_rng(0)
    x = forward_step(zero_z(), UNIT, C1, 0.25, 0.5, [[0.4]], [[0.0]], rng, last=True)
    assert x[0, 0] == pytest.approx(0.8, abs=1e-14)


def test_backward_step_s1():
    rng = np.random.default_rng(0)
    x = backward_step(zero_z(), UNIT, C1, 0.25, 0.5, [[0.6]], [[1.0]], rng, last=True)
    assert x[0, 0] == pytest.approx(0.4, abs=1e-14)


def test_steps_are_deterministic_at_eta_zero():
    pol = TransitionVariancePolicy("C", 0.0)
    a = forward_step(zero_z(), UNIT, pol, 0.25, 0.5, [[0.4]], [[0.0]], np.random.default_rng(1))
    b = forward_step(zero_z(), UNIT, pol, 0.25, 0.5, [[0.4]], [[0.0]], np.random.default_rng(2))
    assert np.array_equal(a, b)
    a = backward_step(zero_z(), UNIT, TransitionVariancePolicy("A"), 0.25, 0.5, [[0.6]], [[1.0]],
                      np.random.default_rng(1))
    b = backward_step(zero_z(), UNIT, TransitionVariancePolicy("A"), 0.25, 0.5, [[0.6]], [[1.0]],
                      np.random.default_rng(2))
    assert np.array_equal(a, b)


def test_last_step_with_true_noise_recovers_endpoints():
    rng = np.random.default_rng(4)
    x0, xT, z = rng.standard_normal((3, 3, 2))
    t = 995.0
    x_t = 0.005 * x0 + 0.995 * xT + np.sqrt(2.0 * 0.995 * 0.005) * z
    out = forward_step(Stub(lambda inp: z, d=2), SCHED, C1, t, 1000.0, x_t, x0, rng, last=True)
    np.testing.assert_allclose(out, xT, atol=1e-10)
    s = 5.0
    x_s = 0.995 * x0 + 0.005 * xT + np.sqrt(2.0 * 0.995 * 0.005) * z
    out = backward_step(Stub(lambda inp: z, d=2), SCHED, C1, 0.0, s, x_s, xT, rng, last=True)
    np.testing.assert_allclose(out, x0, atol=1e-10)


@pytest.mark.parametrize("eta", [0.0, 1.0])
@pytest.mark.parametrize("nfe", [1, 20, 200])
def test_oracle_sampling_reaches_the_coupled_endpoint(eta, nfe):
    rng = np.random.default_rng(5)
    x0 = rng.standard_normal((6, 2))
    model = oracle_sum(Double())
    fwd = sample(model, SCHED, C1, SamplerConfig("forward", nfe, eta, 3), x0).destination
    np.testing.assert_allclose(fwd, 2.0 * x0, atol=1e-10)
    back = sample(model, SCHED, C1, SamplerConfig("backward", nfe, eta, 3), 2.0 * x0).destination
    np.testing.assert_allclose(back, x0, atol=1e-10)


def test_first_step_bootstrap_queries_first_interior_time():
    model = zero_z(d=1)
    sample(model, SCHED, C1, SamplerConfig("forward", 200, 1.0, 0), np.zeros((2, 1)))
    assert model.calls[0].t_norm[0] == pytest.approx(5.0 / 1000.0)
    np.testing.assert_array_equal(model.calls[0].x_t, model.calls[0].slot_a)
    model = zero_z(d=1)
    sample(model, SCHED, C1, SamplerConfig("backward", 200, 1.0, 0), np.ones((2, 1)))
    assert model.calls[0].t_norm[0] == pytest.approx(995.0 / 1000.0)
    assert np.all(model.calls[0].m == 1.0)


def test_trajectory_invariants():
    src = np.random.default_rng(1).standard_normal((4, 2))
    for direction, ends in (("forward", (0.0, 1000.0)), ("backward", (1000.0, 0.0))):
        res = sample(oracle_sum(Double()), SCHED, C1, SamplerConfig(direction, 20, 1.0, 0, True), src)
        times = [t for t, _ in res.trajectory]
        assert (times[0], times[-1]) == ends and len(times) == 21
        assert np.all(np.diff(times) > 0) if direction == "forward" else np.all(np.diff(times) < 0)
        assert np.array_equal(res.trajectory[0][1], src)


def test_eta_zero_sampling_ignores_seed():
    params = init_params(2, (16,), 4, rng=np.random.default_rng(0))
    src = np.random.default_rng(2).standard_normal((5, 2))
    a = sample(params, SCHED, C1, SamplerConfig("forward", 20, 0.0, 1), src).destination
    b = sample(params, SCHED, C1, SamplerConfig("forward", 20, 0.0, 2), src).destination
    assert np.array_equal(a, b)
    c = sample(params, SCHED, C1, SamplerConfig("forward", 20, 1.0, 1), src).destination
    assert not np.array_equal(a, c)


def test_single_checkpoint_drives_both_directions_with_one_path_disabled():
    params = init_params(2, (16,), 4, rng=np.random.default_rng(0))
    from bdbm.net import forward

    def only(m_allowed):
        def fn(inp):
            assert np.all(inp.m == m_allowed), "disabled direction was queried"
            return forward(params, inp)
        return Stub(fn, "z_pred", 2)

    src = np.zeros((3, 2))
    fwd = sample(only(0.0), SCHED, C1, SamplerConfig("forward", 20, 1.0, 0), src).destination
    back = sample(only(1.0), SCHED, C1, SamplerConfig("backward", 20, 1.0, 0), src).destination
    assert np.all(np.isfinite(fwd)) and np.all(np.isfinite(back))
    np.testing.assert_array_equal(fwd, sample(params, SCHED, C1, SamplerConfig("forward", 20, 1.0, 0),
                                              src).destination)


def test_variant_b_backward_bootstrap_is_rejected():
    with pytest.raises(PolicyIncompatibleError):
        sample(zero_z(), SCHED, TransitionVariancePolicy("B", 1.0), SamplerConfig("backward", 20, 1.0, 0),
               np.zeros((1, 1)))


def test_non_finite_state_names_step():
    bad = Stub(lambda inp: np.full_like(inp.x_t, np.nan), "endpoint_sum", 1)
    with pytest.raises(NonFiniteStateError, match="step 0"):
        sample(bad, SCHED, C1, SamplerConfig("forward", 20, 1.0, 0), np.zeros((1, 1)))


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig("sideways")
    with pytest.raises(ValueError):
        SamplerConfig(eta=1.5)
    with pytest.raises(ValueError):
        sample(zero_z(d=2), SCHED, C1, SamplerConfig(), np.zeros((1, 3)))


def test_trained_identity_coupling_returns_its_source():
    from bdbm.couplings import Mapped2DCoupling
    from bdbm.trainloop import LossConfig, NetConfig, train

    coupling = Mapped2DCoupling("two_moons")
    res = train(coupling, SCHED, C1, LossConfig(batch=256, iterations=3000, seed=0), NetConfig(lr=1e-3))
    src = coupling.sample(500, np.random.default_rng(1))[0]
    for direction in ("forward", "backward"):
        out = sample(res.params, SCHED, C1, SamplerConfig(direction, 200, 1.0, 0), src).destination
        assert np.sqrt(np.mean((out - src) ** 2)) <= 0.05

"""Shared fixtures: the three documented mutations and the acceptance summary."""

import numpy as np
import pytest

from bdbm import kernels, net, verify
from bdbm.schedule import TransitionVariancePolicy

_CRITERIA = []


def _scaled_backward_variance(monkeypatch):
    original = kernels.backward_transition

    def mutated(*args, **kwargs):
        g = original(*args, **kwargs)
        return kernels.GaussianTransition(g.mean, 2.0 * g.var)

    monkeypatch.setattr(kernels, "backward_transition", mutated)


def _dropped_mask_channel(monkeypatch):
    original = net.NetInput.features

    def mutated(self, time_emb_dim, mask_channels=True):
        f = original(self, time_emb_dim, mask_channels)
        if mask_channels:
            f = f.copy()
            f[:, -2:] = 0.0
        return f

    monkeypatch.setattr(net.NetInput, "features", mutated)


def _wrong_delta_variant(monkeypatch):
    original = verify.delta2

    def mutated(sched, policy, t, s):
        if policy.variant == "C":
            policy = TransitionVariancePolicy("A", policy.eta)
        return original(sched, policy, t, s)

    monkeypatch.setattr(kernels, "delta2", mutated)
    monkeypatch.setattr(verify, "delta2", mutated)


MUTATIONS = {
    "scaled-backward-variance": _scaled_backward_variance,
    "dropped-mask-channel": _dropped_mask_channel,
    "wrong-delta-variant": _wrong_delta_variant,
}


@pytest.fixture(params=sorted(MUTATIONS))
def mutation(request, monkeypatch):
    MUTATIONS[request.param](monkeypatch)
    return request.param


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, shown in the terminal summary."""

    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

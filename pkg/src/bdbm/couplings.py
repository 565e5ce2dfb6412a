"""Paired endpoint distributions ``p(y_A, y_B)`` used for training and evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import EndpointPair

BASES = ("two_moons", "checkerboard", "ring")


class CouplingExhaustedError(RuntimeError):
    pass


@dataclass
class GaussianCoupling:
    """Jointly Gaussian ``(y_A, y_B)`` with mean ``(2d,)`` and covariance ``(2d, 2d)``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        n = self.mean.size
        if n % 2 or self.cov.shape != (n, n):
            raise ValueError("gaussian coupling needs mean (2d,) and covariance (2d, 2d)")
        if not np.allclose(self.cov, self.cov.T, rtol=0, atol=1e-12):
            raise ValueError("coupling covariance must be symmetric")
        try:
            self._chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError:
            raise ValueError("coupling covariance must be positive definite") from None

    @property
    def d(self) -> int:
        return self.mean.size // 2

    def sample(self, n: int, rng: np.random.Generator):
        y = self.mean + rng.standard_normal((n, 2 * self.d)) @ self._chol.T
        return y[:, :self.d], y[:, self.d:]

    def _blocks(self):
        d = self.d
        c = self.cov
        return c[:d, :d], c[:d, d:], c[d:, :d], c[d:, d:]

    def conditional_b(self, y_a):
        """Mean and covariance of ``y_B | y_A = y_a``."""
        d = self.d
        saa, sab, sba, sbb = self._blocks()
        gain = np.linalg.solve(saa, sab).T
        mean = self.mean[d:] + (np.asarray(y_a) - self.mean[:d]) @ gain.T
        return mean, sbb - gain @ sab

    def conditional_a(self, y_b):
        """Mean and covariance of ``y_A | y_B = y_b``."""
        d = self.d
        saa, sab, sba, sbb = self._blocks()
        gain = np.linalg.solve(sbb, sba).T
        mean = self.mean[:d] + (np.asarray(y_b) - self.mean[d:]) @ gain.T
        return mean, saa - gain @ sba

    @classmethod
    def linear(cls, matrix, shift, noise_var: float, mean_a=None, cov_a=None):
        """``y_A ~ N(mean_a, cov_a)``, ``y_B = matrix @ y_A + shift + N(0, noise_var I)``."""
        a = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        d = a.shape[0]
        mean_a = np.zeros(d) if mean_a is None else np.asarray(mean_a, dtype=np.float64)
        cov_a = np.eye(d) if cov_a is None else np.asarray(cov_a, dtype=np.float64)
        cov = np.block([[cov_a, cov_a @ a.T], [a @ cov_a, a @ cov_a @ a.T + noise_var * np.eye(d)]])
        return cls(np.concatenate([mean_a, a @ mean_a + np.asarray(shift, dtype=np.float64)]), cov)


def _base_sample(base: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if base == "two_moons":
        theta = rng.uniform(0.0, math.pi, n)
        lower = rng.random(n) < 0.5
        x = np.where(lower, 1.0 - np.cos(theta), np.cos(theta))
        y = np.where(lower, 0.5 - np.sin(theta), np.sin(theta))
        return np.column_stack([x - 0.5, y - 0.25])
    if base == "checkerboard":
        x = rng.uniform(-1.0, 1.0, n)
        col = np.minimum(np.floor((x + 1.0) * 2.0), 3).astype(int)
        row = 2 * rng.integers(0, 2, n) + (col % 2)
        y = -1.0 + (row + rng.random(n)) * 0.5
        return np.column_stack([x, y])
    if base == "ring":
        phi = rng.uniform(0.0, 2.0 * math.pi, n)
        return np.column_stack([np.cos(phi), np.sin(phi)])
    raise ValueError(f"unknown base distribution {base!r}")


@dataclass
class Mapped2DCoupling:
    """``y_A`` from a 2-D toy base (plus ``base_noise`` jitter); ``y_B = A y_A + b + noise``."""

    base: str = "two_moons"
    matrix: np.ndarray = field(default_factory=lambda: np.eye(2))
    shift: np.ndarray = field(default_factory=lambda: np.zeros(2))
    noise_std: float = 0.0
    base_noise: float = 0.0

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown base distribution {self.base!r}")
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(2, 2)
        self.shift = np.asarray(self.shift, dtype=np.float64).reshape(2)
        if self.noise_std < 0 or self.base_noise < 0:
            raise ValueError("noise levels must be non-negative")

    d = 2

    def sample(self, n: int, rng: np.random.Generator):
        ya = _base_sample(self.base, n, rng)
        if self.base_noise:
            ya = ya + self.base_noise * rng.standard_normal(ya.shape)
        yb = ya @ self.matrix.T + self.shift
        if self.noise_std:
            yb = yb + self.noise_std * rng.standard_normal(yb.shape)
        return ya, yb


class CsvCoupling:
    """Paired rows ``(y_A, y_B)`` held in memory; drawn without replacement per epoch."""

    def __init__(self, data, reshuffle: bool = True):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] % 2 or data.shape[0] == 0:
            raise ValueError("csv coupling needs a non-empty table with 2d columns")
        if not np.all(np.isfinite(data)):
            raise ValueError("csv coupling rows must be finite")
        self.data = data
        self.reshuffle = reshuffle
        self._order = np.arange(len(data))
        self._cursor = 0
        self._epoch = 0

    @property
    def d(self) -> int:
        return self.data.shape[1] // 2

    @classmethod
    def from_path(cls, path, reshuffle: bool = True):
        from .csvio import read_table
        _, rows = read_table(path)
        return cls(rows, reshuffle)

    def sample(self, n: int, rng: np.random.Generator):
        picked = []
        while n > 0:
            if self._cursor == len(self.data):
                if not self.reshuffle:
                    raise CouplingExhaustedError(
                        f"csv coupling exhausted after {len(self.data)} rows (reshuffle disabled)")
                self._cursor = 0
                self._epoch += 1
            if self._cursor == 0 and self.reshuffle:
                self._order = rng.permutation(len(self.data))
            take = min(n, len(self.data) - self._cursor)
            picked.append(self._order[self._cursor:self._cursor + take])
            self._cursor += take
            n -= take
        rows = self.data[np.concatenate(picked)] if picked else self.data[:0]
        return rows[:, :self.d], rows[:, self.d:]


def sample_pairs(coupling, n: int, rng: np.random.Generator) -> EndpointPair:
    """Batch of ``n`` coupled draws as an ``EndpointPair`` of ``(n, d)`` arrays."""
    x0, xT = coupling.sample(n, rng)
    return EndpointPair(x0, xT)


def sample_pair(coupling, rng: np.random.Generator) -> EndpointPair:
    batch = sample_pairs(coupling, 1, rng)
    return EndpointPair(batch.x0[0], batch.xT[0])

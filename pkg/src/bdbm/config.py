"""Flat ``section.key = value`` run configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .couplings import BASES, CsvCoupling, GaussianCoupling, Mapped2DCoupling
from .net import PARAMETERIZATIONS
from .schedule import BridgeSchedule, TransitionVariancePolicy
from .trainloop import DIRECTIONS, LossConfig, NetConfig

KNOWN_KEYS = {
    "schedule": ("kind", "k", "T", "steps", "table"),
    "policy": ("variant", "eta"),
    "net": ("hidden", "time_emb_dim", "lr", "beta1", "beta2", "eps"),
    "train": ("iters", "batch", "seed", "param", "direction", "accum"),
    "coupling": ("kind", "mean", "cov", "base", "map", "noise_std", "base_noise", "path", "reshuffle"),
    "sample": ("nfe", "eta", "seed"),
    "eval": ("n", "sources", "per_source", "nfe", "eta", "seed", "metrics", "figures"),
}

TRAIN_REQUIRED = ("train.iters", "coupling.kind")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    values: dict[str, str] = field(default_factory=dict)
    source: str = "<config>"

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            section, _, name = key.partition(".")
            if name not in KNOWN_KEYS.get(section, ()):
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            values[key] = value
        return cls(values, source)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.parse(fh.read(), str(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def require(self, *keys):
        missing = [k for k in keys if k not in self.values]
        if missing:
            raise ConfigError(f"{self.source}: missing required key {missing[0]!r}")

    def get(self, key, conv=str, default=None):
        if key not in self.values:
            return default
        try:
            return conv(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{self.source}: bad value for {key!r}: {exc}") from None

    # -- builders --------------------------------------------------------------

    def schedule(self) -> BridgeSchedule:
        kind = self.get("schedule.kind", str, "brownian")
        k = self.get("schedule.k", float, 2.0)
        T = self.get("schedule.T", float, 1000.0)
        steps = self.get("schedule.steps", int, 1000)
        steps = None if steps == 0 else steps
        try:
            if kind == "brownian":
                return BridgeSchedule.brownian(k=k, T=T, steps=steps)
            if kind == "custom":
                self.require("schedule.table")
                from .csvio import read_table
                _, rows = read_table(self.values["schedule.table"])
                if rows.shape[1] != 4:
                    raise ConfigError("schedule table needs columns t,alpha,beta,sigma2")
                return BridgeSchedule.from_table(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], k=k, steps=steps)
        except (ValueError, OSError) as exc:
            raise ConfigError(f"{self.source}: invalid schedule: {exc}") from None
        raise ConfigError(f"{self.source}: unknown schedule.kind {kind!r}")

    def policy(self) -> TransitionVariancePolicy:
        try:
            return TransitionVariancePolicy(self.get("policy.variant", str, "C"), self.get("policy.eta", float, 1.0))
        except ValueError as exc:
            raise ConfigError(f"{self.source}: invalid policy: {exc}") from None

    def net(self) -> NetConfig:
        hidden = self.get("net.hidden", lambda s: tuple(int(v) for v in s.split(",")), (128, 128))
        if not hidden or min(hidden) < 1:
            raise ConfigError(f"{self.source}: net.hidden needs positive widths")
        emb = self.get("net.time_emb_dim", int, 16)
        if emb < 0 or emb % 2:
            raise ConfigError(f"{self.source}: net.time_emb_dim must be a non-negative even integer")
        return NetConfig(hidden, emb, self.get("net.lr", float, 1e-4), self.get("net.beta1", float, 0.9),
                         self.get("net.beta2", float, 0.999), self.get("net.eps", float, 1e-8))

    def loss(self) -> LossConfig:
        self.require("train.iters")
        param = self.get("train.param", str, "z_pred")
        if param not in PARAMETERIZATIONS:
            raise ConfigError(f"{self.source}: train.param must be one of {PARAMETERIZATIONS}")
        direction = self.get("train.direction", str, "bidirectional")
        if direction not in DIRECTIONS:
            raise ConfigError(f"{self.source}: train.direction must be one of {DIRECTIONS}")
        try:
            return LossConfig(param, direction, self.get("train.batch", int, 256), self.get("train.iters", int),
                              self.get("train.seed", int, 0), self.get("train.accum", int, 1))
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    def coupling(self):
        self.require("coupling.kind")
        kind = self.values["coupling.kind"]
        floats = lambda s: [float(v) for v in s.split(",")]  # noqa: E731
        try:
            if kind == "gaussian":
                self.require("coupling.mean", "coupling.cov")
                mean = np.array(self.get("coupling.mean", floats))
                cov = np.array(self.get("coupling.cov", floats))
                n = mean.size
                if cov.size != n * n:
                    raise ConfigError(f"{self.source}: coupling.cov needs {n * n} entries (row-major)")
                return GaussianCoupling(mean, cov.reshape(n, n))
            if kind == "mapped2d":
                base = self.get("coupling.base", str, "two_moons")
                if base not in BASES:
                    raise ConfigError(f"{self.source}: coupling.base must be one of {BASES}")
                affine = self.get("coupling.map", floats, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
                if len(affine) != 6:
                    raise ConfigError(f"{self.source}: coupling.map is 'a11,a12,a21,a22,b1,b2'")
                return Mapped2DCoupling(base, np.reshape(affine[:4], (2, 2)), affine[4:],
                                        self.get("coupling.noise_std", float, 0.0),
                                        self.get("coupling.base_noise", float, 0.0))
            if kind == "csv":
                self.require("coupling.path")
                reshuffle = self.get("coupling.reshuffle", _boolean, True)
                return CsvCoupling.from_path(self.values["coupling.path"], reshuffle)
        except ConfigError:
            raise
        except (ValueError, OSError) as exc:
            raise ConfigError(f"{self.source}: invalid coupling: {exc}") from None
        raise ConfigError(f"{self.source}: unknown coupling.kind {kind!r}")


def _boolean(s: str) -> bool:
    if s.lower() in ("1", "true", "yes"):
        return True
    if s.lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")

"""Mergeable Monte Carlo estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error.

    ``m2`` (sum of squared deviations) is carried so that merging is exact
    pooling rather than a reconstruction from the rounded standard error.
    An estimate with ``n_samples == 0`` is the neutral element of ``merge``.
    """
    mean: float
    std_error: float
    n_samples: int
    name: str = ""
    m2: float = field(default=0.0, repr=False, compare=False)

    @classmethod
    def from_samples(cls, x, name: str = "") -> "Estimate":
        x = np.asarray(x, dtype=np.float64).ravel()
        n = x.size
        if n == 0:
            return cls.empty(name)
        mean = float(x.mean())
        m2 = float(((x - mean) ** 2).sum())
        return cls(mean, _se(m2, n), n, name, m2)

    @classmethod
    def exact(cls, value: float, name: str = "") -> "Estimate":
        return cls(float(value), 0.0, 1, name, 0.0)

    @classmethod
    def empty(cls, name: str = "") -> "Estimate":
        return cls(0.0, 0.0, 0, name, 0.0)

    @property
    def variance(self) -> float:
        return self.m2 / (self.n_samples - 1) if self.n_samples > 1 else 0.0

    def z_score(self, value: float = 0.0) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.mean == value else math.copysign(math.inf, self.mean - value)
        return (self.mean - value) / self.std_error

    def as_dict(self) -> dict:
        return {"name": self.name, "mean": self.mean, "std_error": self.std_error,
                "n_samples": self.n_samples}


def _se(m2: float, n: int) -> float:
    if n < 2:
        return 0.0
    return math.sqrt(max(m2, 0.0) / (n - 1) / n)


def mc_merge(a: Estimate, b: Estimate) -> Estimate:
    """Pool two estimates of the same quantity (Chan et al. pairwise update)."""
    if a.name and b.name and a.name != b.name:
        raise ValueError(f"cannot merge estimates of {a.name!r} and {b.name!r}")
    if a.n_samples == 0:
        return b
    if b.n_samples == 0:
        return a
    n = a.n_samples + b.n_samples
    d = b.mean - a.mean
    mean = a.mean + d * b.n_samples / n
    m2 = a.m2 + b.m2 + d * d * a.n_samples * b.n_samples / n
    return Estimate(mean, _se(m2, n), n, a.name or b.name, m2)


def merge_all(estimates) -> Estimate:
    out = Estimate.empty()
    for e in estimates:
        out = mc_merge(out, e)
    return out


def difference(a: Estimate, b: Estimate, name: str = "") -> Estimate:
    """a - b for independent estimates."""
    se = math.hypot(a.std_error, b.std_error)
    return Estimate(a.mean - b.mean, se, min(a.n_samples, b.n_samples), name)


def combined_z(a: Estimate, b: Estimate) -> float:
    return difference(a, b).z_score()

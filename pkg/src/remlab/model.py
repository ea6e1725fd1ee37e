"""Two-block REM with a small Gaussian perturbation.

A configuration is a pair ``(i1, i2)`` of block indices, each in
``[0, 2**(N/2))``.  The energy is

    X_sigma = X1[i1] + X2[i2]                      (unperturbed)
    X_sigma = X1[i1] + X2[i2] + Xd[i1, i2]         (perturbed)

with independent centered Gaussians of variance ``N*a1``, ``N*a2`` and
``N*a2*delta*omega(N)``.  The 2**N perturbation entries are never stored:
they are regenerated from the counter-based stream on demand.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import kernels
from .rng import derive_key

LOG2 = math.log(2.0)
N_CAP = 28
# below this rate the perturbation is too weak for the pair-exclusion bound
ALPHA_THRESHOLD = 2.0 / LOG2
CENTERINGS = ("tail", "literal")


class ConfigError(ValueError):
    """Invalid parameters or configuration."""


class ResourceCapError(RuntimeError):
    """Requested size exceeds a configured memory cap."""


class ScheduleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelParams:
    N: int
    a1: float = 0.6
    delta: float = 1.0
    alpha: float = 4.0
    beta: float = 2.0
    n_cap: int = N_CAP

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N:
            raise ConfigError(f"N must be an integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if self.N % 2 or self.N < 4:
            raise ConfigError(f"N must be even and >= 4, got {self.N}")
        if self.N > self.n_cap:
            raise ResourceCapError(f"N={self.N} exceeds the size cap {self.n_cap}")
        if not 0.5 < self.a1 < 1.0:
            raise ConfigError(f"a1 must lie in (1/2, 1), got {self.a1}")
        if not self.delta >= 0.0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if not self.alpha > 0.0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta >= 0.0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")

    @property
    def a2(self) -> float:
        return 1.0 - self.a1

    @property
    def half(self) -> int:
        return self.N // 2

    @property
    def block_size(self) -> int:
        return 1 << self.half

    @property
    def beta1(self) -> float:
        return math.sqrt(LOG2 / self.a1)

    @property
    def beta2(self) -> float:
        return math.sqrt(LOG2 / self.a2)

    @property
    def x1(self) -> float:
        return self.beta1 / self.beta

    @property
    def x2(self) -> float:
        return self.beta2 / self.beta

    @property
    def omega(self) -> float:
        return omega(self.N, self.alpha, warn=False)

    @property
    def delta_n(self) -> float:
        return self.delta * self.omega

    @property
    def overlap_values(self) -> tuple:
        """Admissible overlaps in the fixed order (0, a2, a1, 1)."""
        return (0.0, self.a2, self.a1, 1.0)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


class Configuration(NamedTuple):
    i1: int
    i2: int

    def flat(self, N: int) -> int:
        return (self.i1 << (N // 2)) | self.i2

    @classmethod
    def from_flat(cls, index: int, N: int) -> "Configuration":
        h = N // 2
        return cls(index >> h, index & ((1 << h) - 1))


def _check_config(s: Configuration, p: ModelParams):
    m = p.block_size
    if not (0 <= s.i1 < m and 0 <= s.i2 < m):
        raise ConfigError(f"configuration {tuple(s)} out of range for N={p.N}")


def overlap(s: Configuration, t: Configuration, p: ModelParams) -> float:
    _check_config(s, p)
    _check_config(t, p)
    return overlap_from_equalities(s.i1 == t.i1, s.i2 == t.i2, p)


def overlap_from_equalities(same1, same2, p: ModelParams):
    """Vectorized overlap from the two block-equality indicators."""
    same1 = np.asarray(same1, dtype=bool)
    same2 = np.asarray(same2, dtype=bool)
    q = np.where(same1, np.where(same2, 1.0, p.a1), np.where(same2, p.a2, 0.0))
    return float(q) if q.ndim == 0 else q


def distance(q) -> float:
    q = np.asarray(q, dtype=np.float64)
    if np.any((q < 0.0) | (q > 1.0)):
        raise ConfigError("overlap must lie in [0, 1]")
    d = np.sqrt(1.0 - q)
    return float(d) if d.ndim == 0 else d


def schedule_ok(alpha: float) -> bool:
    return alpha > ALPHA_THRESHOLD


def omega(N: float, alpha: float, warn: bool = True) -> float:
    """omega(N) = alpha log N / N."""
    if N < 2 or alpha <= 0:
        raise ConfigError("omega needs N >= 2 and alpha > 0")
    if warn and not schedule_ok(alpha):
        warnings.warn(f"alpha={alpha} <= 2/log 2: perturbation below the proven rate",
                      ScheduleWarning, stacklevel=2)
    return alpha * math.log(N) / N


def block_centering(a: float, N: int, convention: str = "tail") -> float:
    """Centering of the max of 2**(N/2) Gaussians with variance N*a.

    ``tail`` solves 2**(N/2) P[X > a_N] ~ 1 to second order, which puts
    log(2 pi N log 2) in the correction.  ``literal`` reproduces the printed
    variant with log(2 pi a N); it differs by an O(1) shift.
    """
    lead = N * math.sqrt(a * LOG2)
    pref = a / (2.0 * math.sqrt(a * LOG2))
    if convention == "tail":
        return lead - pref * math.log(2.0 * math.pi * N * LOG2)
    if convention == "literal":
        return lead - pref * math.log(2.0 * math.pi * a * N)
    raise ConfigError(f"unknown centering convention {convention!r}; use one of {CENTERINGS}")


class Centering(NamedTuple):
    aN1: float
    aN2_delta: float
    aN: float
    delta_aN2: float


def centering(p: ModelParams, convention: str = "tail") -> Centering:
    a1 = block_centering(p.a1, p.N, convention)
    a2d = block_centering(p.a2 * (1.0 + p.delta_n), p.N, convention)
    a20 = block_centering(p.a2, p.N, convention)
    return Centering(a1, a2d, a1 + a2d, a2d - a20)


class DisorderRealization:
    """Seeded, read-only access to the three disorder fields.

    Block fields are materialized lazily (2**(N/2) entries each); the
    perturbation is evaluated from the counter stream on every access.
    """

    def __init__(self, params: ModelParams, master_seed: int, *, null: bool = False,
                 centering_convention: str = "tail"):
        self.params = params
        self.master_seed = int(master_seed)
        self.null = null
        self.centering = centering(params, centering_convention)

    @classmethod
    def null_field(cls, params: ModelParams) -> "DisorderRealization":
        """All energies identically zero (test hook)."""
        return cls(params, 0, null=True)

    def key(self, field, *extra) -> int:
        return derive_key(self.master_seed, field, self.params.N, *extra)

    def _block(self, name: str, var: float) -> np.ndarray:
        m = self.params.block_size
        if self.null:
            return np.zeros(m)
        return kernels.normal_stream(self.key(name), 0, m) * math.sqrt(var)

    @cached_property
    def x1(self) -> np.ndarray:
        return self._block("X1", self.params.N * self.params.a1)

    @cached_property
    def x2(self) -> np.ndarray:
        return self._block("X2", self.params.N * self.params.a2)

    @property
    def perturbation_scale(self) -> float:
        if self.null:
            return 0.0
        p = self.params
        return math.sqrt(p.N * p.a2 * p.delta_n)

    def perturbation(self, i1, i2):
        i1 = np.asarray(i1, dtype=np.int64)
        i2 = np.asarray(i2, dtype=np.int64)
        flat = np.atleast_1d((i1 << self.params.half) | i2)
        out = self.perturbation_scale * kernels.normal_at(self.key("Xd"), flat.ravel())
        out = out.reshape(flat.shape)
        return float(out[0]) if i1.ndim == 0 and i2.ndim == 0 else out

    def energies(self, i1, i2, perturbed: bool = True):
        i1 = np.asarray(i1, dtype=np.int64)
        i2 = np.asarray(i2, dtype=np.int64)
        e = self.x1[i1] + self.x2[i2]
        if perturbed and self.perturbation_scale != 0.0:
            e = e + self.perturbation(i1, i2)
        return e

    def energy(self, s: Configuration, perturbed: bool = True) -> float:
        _check_config(s, self.params)
        return float(self.energies(s.i1, s.i2, perturbed))

    def table(self, perturbed: bool = True, cap: int = 26) -> np.ndarray:
        """Full (2**(N/2), 2**(N/2)) energy table; row = i1, column = i2."""
        if self.params.N > cap:
            raise ResourceCapError(f"N={self.params.N} exceeds the table cap {cap}")
        scale = self.perturbation_scale if perturbed else 0.0
        return kernels.energy_table(self.x1, self.x2, self.key("Xd"), scale)

    def rows(self, i1, perturbed: bool = True) -> np.ndarray:
        """Energy rows for the given block-1 indices only."""
        i1 = np.asarray(i1, dtype=np.int64).ravel()
        m = self.params.block_size
        out = self.x1[i1][:, None] + self.x2[None, :]
        scale = self.perturbation_scale if perturbed else 0.0
        if scale != 0.0:
            for r, i in enumerate(i1):
                out[r] += scale * kernels.normal_stream(self.key("Xd"), int(i) * m, m)
        return out

    # shifted fields
    @property
    def x1_hat(self) -> np.ndarray:
        return self.x1 - self.centering.aN1

    @property
    def x2_hat(self) -> np.ndarray:
        """Block-2 field shifted by the unperturbed block centering."""
        return self.x2 - (self.centering.aN2_delta - self.centering.delta_aN2)

"""Exact Gibbs measure by full enumeration.

A ``GibbsTable`` holds the sufficient statistics of one disorder realization
at one temperature.  Because overlaps only record which blocks two replicas
share, every two-replica bracket and the three-replica ultrametric bracket
are closed-form functions of a handful of sums over the weight table, so
these are computed exactly per realization; sampling is only needed for
general many-replica observables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.special import logsumexp, softmax

from . import kernels
from .model import (LOG2, ConfigError, Configuration, DisorderRealization, ModelParams,
                    ResourceCapError, overlap_from_equalities)
from .parallel import seed_values
from .rng import generator
from .stats import Estimate

TABLE_CAP = 26
# fixed bin order used everywhere: q = 0, a2, a1, 1
BINS = ("q0", "qa2", "qa1", "q1")


@dataclass
class GibbsTable:
    params: ModelParams
    seed: int
    beta: float
    perturbed: bool
    log_z: float
    row: np.ndarray
    col: np.ndarray
    s2: float
    s3: float
    wrc: float
    w2r: float
    w2c: float
    energies: np.ndarray | None = field(default=None, repr=False)
    _sampler: object = field(default=None, repr=False)

    @classmethod
    def build(cls, r: DisorderRealization, beta: float | None = None, perturbed: bool = True,
              keep_table: bool = False, cap: int = TABLE_CAP, table=None) -> "GibbsTable":
        p = r.params
        beta = p.beta if beta is None else float(beta)
        if p.N > cap:
            raise ResourceCapError(f"N={p.N} exceeds the Gibbs table cap {cap}")
        factorized = table is None and (not perturbed or r.perturbation_scale == 0.0)
        if factorized and not keep_table:
            return cls._product(r, beta, perturbed)
        if table is None:
            table = r.table(perturbed, cap=cap)
        lz, row, col, s2, s3, wrc, w2r, w2c = kernels.gibbs_reduce(table, beta)
        return cls(p, r.master_seed, beta, perturbed, float(lz), row, col, float(s2), float(s3),
                   float(wrc), float(w2r), float(w2c), table if keep_table else None)

    @classmethod
    def _product(cls, r, beta, perturbed):
        # unperturbed weights factorize: w_ij = row_i col_j
        x1, x2 = r.x1, r.x2
        row, col = softmax(beta * x1), softmax(beta * x2)
        lz = logsumexp(beta * x1) + logsumexp(beta * x2)
        r2, r3 = row @ row, (row * row) @ row
        c2, c3 = col @ col, (col * col) @ col
        return cls(r.params, r.master_seed, beta, perturbed, float(lz), row, col,
                   r2 * c2, r3 * c3, r2 * c2, r3 * c2, r2 * c3)

    @property
    def free_energy(self) -> float:
        return self.log_z / self.params.N

    def overlap_law(self) -> np.ndarray:
        """Exact G(x)G(q(sigma, tau) = v) for v = 0, a2, a1, 1."""
        r2 = float(self.row @ self.row)
        c2 = float(self.col @ self.col)
        s2 = self.s2
        return np.array([1.0 - r2 - c2 + s2, c2 - s2, r2 - s2, s2])

    def bracket2(self, g) -> float:
        """<g(q12)> for a function g of one overlap."""
        vals = np.array([g(v) for v in self.params.overlap_values], dtype=np.float64)
        return float(self.overlap_law() @ vals)

    def violation_rate(self) -> float:
        """Exact three-replica probability of an ultrametric violation.

        The triangle fails exactly when two replicas share block 1 but not
        block 2 while one of them shares block 2 (only) with the third; there
        are six labelled versions of that pattern, each with probability
        wrc - w2r - w2c + s3 by inclusion-exclusion.
        """
        return max(0.0, 6.0 * (self.wrc - self.w2r - self.w2c + self.s3))

    def star_pattern(self) -> float:
        """P(q12 = a1 and q13 = a2) under three replicas."""
        return max(0.0, self.wrc - self.w2r - self.w2c + self.s3)

    def star_law(self):
        """(P, J): two-replica law and the joint law of (q12, q13), exact."""
        return star_law(self.weights())

    def weights(self) -> np.ndarray:
        """Normalized weight table (needs the energies unless factorized)."""
        if self.energies is None:
            if self.perturbed and self.params.delta != 0.0:
                raise ConfigError("weights need a table built with keep_table=True")
            return np.outer(self.row, self.col)
        return np.exp(self.beta * self.energies - self.log_z)

    def sampler(self) -> kernels.DiscreteSampler:
        if self._sampler is None:
            self._sampler = kernels.DiscreteSampler(self.weights())
        return self._sampler


def overlap_profiles(w: np.ndarray) -> np.ndarray:
    """h[v, i1, i2] = G(q(sigma, tau) = v) for fixed sigma = (i1, i2), for the
    bins (0, a2, a1, 1); ``w`` is a normalized weight table."""
    r = w.sum(axis=1)[:, None]
    c = w.sum(axis=0)[None, :]
    return np.stack([1.0 - r - c + w, c - w, r - w, w])


def star_law(w: np.ndarray):
    """Exact P(q12 = u) and P(q12 = u, q13 = v) under three replicas."""
    h = overlap_profiles(w)
    wh = w[None] * h
    P = wh.sum(axis=(1, 2))
    J = np.einsum("uij,vij->uv", wh, h)
    return P, J


def log_partition(r: DisorderRealization, beta: float | None = None, perturbed: bool = True) -> float:
    return GibbsTable.build(r, beta, perturbed).log_z


def free_energy(r: DisorderRealization, beta: float | None = None, perturbed: bool = True) -> float:
    return log_partition(r, beta, perturbed) / r.params.N


def _block_free_energy(a: float, beta: float) -> float:
    bc = math.sqrt(LOG2 / a)
    if beta <= bc:
        return 0.5 * LOG2 + 0.5 * beta * beta * a
    return beta * math.sqrt(a * LOG2)


def analytic_free_energy(beta: float, p: ModelParams) -> float:
    """Limiting free energy: sum of the two independent REM blocks."""
    return _block_free_energy(p.a1, beta) + _block_free_energy(p.a2, beta)


def sample_replicas(g: GibbsTable, s: int, rng: np.random.Generator, n_draws: int | None = None):
    """``s`` i.i.d. replicas from the exact Gibbs law.

    Returns a list of ``Configuration`` when ``n_draws`` is None, otherwise an
    int array of shape (n_draws, s, 2) holding (i1, i2).
    """
    if s < 1:
        raise ConfigError("need at least one replica")
    n = 1 if n_draws is None else int(n_draws)
    flat = g.sampler().draw(rng.random(n * s)).reshape(n, s)
    h = g.params.half
    out = np.stack([flat >> h, flat & ((1 << h) - 1)], axis=-1)
    if n_draws is None:
        return [Configuration(int(a), int(b)) for a, b in out[0]]
    return out


def replica_overlaps(labels: np.ndarray, p: ModelParams) -> np.ndarray:
    """Overlap arrays (n, s, s) for replica labels of shape (n, s, 2)."""
    a = labels[:, :, None, :]
    b = labels[:, None, :, :]
    return overlap_from_equalities(a[..., 0] == b[..., 0], a[..., 1] == b[..., 1], p)


def monomial_value(q: np.ndarray, exponents: dict) -> np.ndarray:
    out = np.ones(q.shape[0])
    for (i, j), k in exponents.items():
        if k:
            out = out * q[:, i - 1, j - 1] ** k
    return out


def _replica_count(exponents: dict) -> int:
    s = 2
    for (i, j), k in exponents.items():
        if i == j or min(i, j) < 1 or k < 0:
            raise ConfigError(f"bad exponent entry {(i, j)}: {k}")
        s = max(s, i, j)
    return s


def _observable_probe(seed, p, beta, exponents, perturbed, n_draws):
    r = DisorderRealization(p, seed)
    s = _replica_count(exponents)
    nonzero = {key: k for key, k in exponents.items() if k}
    if not nonzero:
        return [1.0]
    keep = n_draws is not None and perturbed and p.delta != 0.0
    g = GibbsTable.build(r, beta, perturbed, keep_table=keep)
    if n_draws is None:
        if any(set(key) != {1, 2} for key in nonzero):
            raise ConfigError("exact brackets cover two-replica monomials; pass n_draws")
        k = sum(nonzero.values())
        return [g.bracket2(lambda v: v ** k)]
    labels = sample_replicas(g, s, generator(seed, "replicas"), n_draws)
    return [monomial_value(replica_overlaps(labels, p), nonzero).mean()]


def overlap_observable(p: ModelParams, beta: float, exponents: dict, n_seeds: int,
                       n_draws: int | None = None, master_seed: int = 0,
                       perturbed: bool = True, workers: int = 1) -> Estimate:
    """Disorder average of <prod_{i<j} q_ij^k_ij> under s replicas.

    ``exponents`` maps replica pairs (1-based) to powers.  Two-replica
    monomials are evaluated exactly per realization when ``n_draws`` is None;
    otherwise each realization contributes the mean over ``n_draws`` sampled
    replica tuples.
    """
    fn = partial(_observable_probe, p=p, beta=beta, exponents=dict(exponents),
                 perturbed=perturbed, n_draws=n_draws)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return Estimate.from_samples(vals[:, 0], "overlap_observable")


def _histogram_probe(seed, p, beta, perturbed, n_pairs):
    r = DisorderRealization(p, seed)
    keep = n_pairs is not None and perturbed and p.delta != 0.0
    g = GibbsTable.build(r, beta, perturbed, keep_table=keep)
    if n_pairs is None:
        return g.overlap_law()
    labels = sample_replicas(g, 2, generator(seed, "replicas"), n_pairs)
    q = replica_overlaps(labels, p)[:, 0, 1]
    return np.array([np.mean(q == v) for v in p.overlap_values])


def overlap_histogram(p: ModelParams, beta: float | None = None, perturbed: bool = True,
                      n_seeds: int = 100, n_pairs: int | None = None, master_seed: int = 0,
                      workers: int = 1) -> list:
    """Estimates of E G(x)G(q = v) for v in (0, a2, a1, 1).

    With ``n_pairs=None`` each realization contributes its exact two-replica
    law; otherwise ``n_pairs`` sampled replica pairs.  The q = 1 bin is the
    disorder mean of sum_sigma G(sigma)^2 either way.
    """
    beta = p.beta if beta is None else beta
    fn = partial(_histogram_probe, p=p, beta=beta, perturbed=perturbed, n_pairs=n_pairs)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return [Estimate.from_samples(vals[:, k], BINS[k]) for k in range(4)]


def _violation_probe(seed, p, beta, perturbed, n_triples):
    r = DisorderRealization(p, seed)
    keep = n_triples is not None and perturbed and p.delta != 0.0
    g = GibbsTable.build(r, beta, perturbed, keep_table=keep)
    if n_triples is None:
        return [g.violation_rate()]
    labels = sample_replicas(g, 3, generator(seed, "replicas"), n_triples)
    return [violation_fraction(replica_overlaps(labels, p)).mean()]


def violation_fraction(q: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Per-sample indicator that a replica triple (first three) violates
    d(1,2) <= max(d(1,3), d(2,3)) in any of its three orientations."""
    d12 = np.sqrt(np.clip(1.0 - q[:, 0, 1], 0.0, None))
    d13 = np.sqrt(np.clip(1.0 - q[:, 0, 2], 0.0, None))
    d23 = np.sqrt(np.clip(1.0 - q[:, 1, 2], 0.0, None))
    bad = ((d12 > np.maximum(d13, d23) + tol) | (d13 > np.maximum(d12, d23) + tol)
           | (d23 > np.maximum(d12, d13) + tol))
    return bad.astype(np.float64)


def ultrametric_violation_rate(p: ModelParams, beta: float | None = None, perturbed: bool = True,
                               n_seeds: int = 100, n_triples: int | None = None,
                               master_seed: int = 0, workers: int = 1) -> Estimate:
    beta = p.beta if beta is None else beta
    fn = partial(_violation_probe, p=p, beta=beta, perturbed=perturbed, n_triples=n_triples)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return Estimate.from_samples(vals[:, 0], "ultrametric_violation")


def _free_energy_probe(seed, p, beta, perturbed):
    r = DisorderRealization(p, seed)
    return [free_energy(r, beta, perturbed)]


def mean_free_energy(p: ModelParams, beta: float | None = None, perturbed: bool = True,
                     n_seeds: int = 100, master_seed: int = 0, workers: int = 1) -> Estimate:
    beta = p.beta if beta is None else beta
    fn = partial(_free_energy_probe, p=p, beta=beta, perturbed=perturbed)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return Estimate.from_samples(vals[:, 0], "free_energy")


def _gap_probe(seed, p, beta):
    r = DisorderRealization(p, seed)
    return [free_energy(r, beta, True) - free_energy(r, beta, False)]


def free_energy_gap(p: ModelParams, beta: float | None = None, n_seeds: int = 100,
                    master_seed: int = 0, workers: int = 1) -> Estimate:
    """E f_{delta,N} - E f_N, both evaluated on the same block fields."""
    beta = p.beta if beta is None else beta
    fn = partial(_gap_probe, p=p, beta=beta)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return Estimate.from_samples(vals[:, 0], "free_energy_gap")

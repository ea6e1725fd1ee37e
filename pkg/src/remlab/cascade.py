"""Two-level Derrida-Ruelle cascade.

Parents xi1 form a Poisson process with intensity beta1 exp(-beta1 s); each
parent carries an independent child process xi2 with intensity
beta2 exp(-beta2 u).  Atoms are xi = xi1 + xi2 with weight exp(beta xi).

Truncation.  The weight sum is dominated neither by a fixed number of
parents nor of children: a parent far below the top can still own a large
atom.  A realization therefore keeps

  * every child with xi >= t and xi2 >= L2 (composite and relative cut),
  * every parent with xi1 >= t - L2, and every lower parent owning at least
    one kept child (sampled by thinning a dominating intensity),

and replaces the discarded ("dust") mass by its conditional mean given the
kept atoms.  The residual error is the conditional standard deviation of the
dust, which is what ``neglected_mass_bound`` reports relative to the total.
Lowering (t, L2) extends a realization exactly, because the Poisson processes
restricted to disjoint regions are independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.special import gamma as gamma_fn, gammainc

from .extremes import MarkedPointProcess
from .model import ConfigError, ModelParams
from .parallel import seed_values
from .rng import generator
from .stats import Estimate

DIFFUSE = -1


def sample_ppp_exp(rate: float, L: float, rng: np.random.Generator) -> np.ndarray:
    """Points of a Poisson process with intensity rate*exp(-rate*t) on [L, inf),
    sorted descending."""
    if rate <= 0 or not math.isfinite(L):
        raise ConfigError("rate must be > 0 and L finite")
    n = rng.poisson(math.exp(-rate * L))
    return np.sort(L + rng.exponential(1.0 / rate, n))[::-1]


def _zero_truncated_poisson(lam: np.ndarray, rng) -> np.ndarray:
    # first arrival of a rate-lam process on [0, 1] given at least one,
    # then an ordinary Poisson count on the rest of the interval
    lam = np.asarray(lam, dtype=np.float64)
    u = rng.random(lam.shape)
    first = -np.log1p(-u * -np.expm1(-lam)) / lam
    return 1 + rng.poisson(lam * (1.0 - first))


def _band_exponential(lo: np.ndarray, hi: np.ndarray, rate: float, rng) -> np.ndarray:
    """Exp(rate) shifted to lo and truncated to [lo, hi)."""
    width = hi - lo
    finite = np.isfinite(width)
    frac = np.where(finite, -np.expm1(-rate * np.where(finite, width, 0.0)), 1.0)
    return lo - np.log1p(-rng.random(lo.shape) * frac) / rate


def _split(flat: np.ndarray, counts: np.ndarray) -> list:
    return np.split(flat, np.cumsum(counts)[:-1])


@dataclass
class CascadeRealization:
    params: ModelParams
    beta: float
    t: float
    L2: float
    xi1: np.ndarray
    xi2: list
    neglected_mass_bound: float = math.nan
    _dust: tuple = field(default=None, repr=False)

    @property
    def s_star(self) -> float:
        return self.t - self.L2

    @property
    def n_parents(self) -> int:
        return len(self.xi1)

    @property
    def n_atoms(self) -> int:
        return int(sum(len(c) for c in self.xi2))

    def child_cut(self, s):
        """Lowest kept child position for a parent at s."""
        return np.maximum(self.t - np.asarray(s), self.L2)

    def atoms(self):
        """(parent index, child index, xi) of every kept atom, in sampling order."""
        if self.n_atoms == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e, np.zeros(0)
        counts = np.array([len(c) for c in self.xi2], dtype=np.int64)
        par = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
        chi = np.arange(par.size, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
        xi = self.xi1[par] + np.concatenate(self.xi2)
        return par, chi, xi


def _constants(p: ModelParams, beta: float):
    b1, b2 = p.beta1, p.beta2
    if beta <= b2:
        raise ConfigError(f"beta={beta} <= beta2={b2:.6f}: the cascade weights are not summable")
    return b1, b2


def _log_dust_moments(s, cut, beta, b2):
    """Log mean and log variance of the child mass below ``cut`` for parents at s."""
    log_m = beta * s + math.log(b2 / (beta - b2)) + (beta - b2) * cut
    log_v = 2 * beta * s + math.log(b2 / (2 * beta - b2)) + (2 * beta - b2) * cut
    return log_m, log_v


def _irrelevant_dust(p: ModelParams, beta: float, t: float, L2: float):
    """Mean and variance of the mass carried by parents below t - L2 that own
    no kept child (all their mass is dust)."""
    b1, b2 = p.beta1, p.beta2
    k = b1 / b2
    y_star = math.exp(-b2 * L2)
    i1 = gamma_fn(1 - k) * gammainc(1 - k, y_star) / b2
    i2 = gamma_fn(2 - k) * gammainc(2 - k, y_star) / b2
    c1 = b2 / (beta - b2)
    cv = b2 / (2 * beta - b2)
    mean = c1 * b1 * math.exp((beta - b1) * t) * i1
    var = b1 * math.exp((2 * beta - b1) * t) * (cv * i1 + c1 * c1 * i2)
    return mean, var


def _default_cuts(p: ModelParams, beta: float, eps: float):
    # a priori: per-parent relative dust fluctuation at t = L2 equal to eps/2
    b2 = p.beta2
    cv = b2 / (2 * beta - b2)
    L2 = (2 * math.log(eps / 2) - math.log(cv)) / (2 * beta - b2)
    return L2, L2


def _extend(c: CascadeRealization, t_new: float, L2_new: float, rng: np.random.Generator):
    """Lower the cuts of ``c`` in place, sampling exactly the newly kept atoms."""
    p, beta = c.params, c.beta
    b1, b2 = p.beta1, p.beta2
    t_old, L2_old = c.t, c.L2
    fresh = math.isinf(t_old)
    s_old = math.inf if fresh else t_old - L2_old
    s_new = t_new - L2_new
    if t_new > t_old or L2_new > L2_old or s_new > s_old:
        raise ConfigError("refinement must lower t, L2 and t - L2")

    def lam(s, t, L2):
        return np.exp(-b2 * np.maximum(t - s, L2))

    def band(sv):
        lo = np.maximum(t_new - sv, L2_new)
        hi = np.maximum(t_old - sv, L2_old) if not fresh else np.full(sv.shape, math.inf)
        return lo, hi

    # children of existing parents in the new band
    if c.n_parents:
        lo, hi = band(c.xi1)
        n = rng.poisson(np.exp(-b2 * lo) - np.exp(-b2 * hi))
        if n.any():
            new = _split(_band_exponential(np.repeat(lo, n), np.repeat(hi, n), b2, rng), n)
            c.xi2 = [np.concatenate([old, x]) if len(x) else old for old, x in zip(c.xi2, new)]

    new_s, new_counts = [], []
    # zone A: [s_new, s_old), every parent not kept before is now kept
    if s_new < s_old:
        span = -math.expm1(-b1 * (s_old - s_new)) if not fresh else 1.0
        n = rng.poisson(math.exp(-b1 * s_new) * span)
        s = s_new - np.log1p(-rng.random(n) * span) / b1
        if not fresh:
            s = s[rng.random(n) < np.exp(-lam(s, t_old, L2_old))]
        lo, hi = band(s)
        new_s.append(s)
        new_counts.append(rng.poisson(np.exp(-b2 * lo) - np.exp(-b2 * hi)))

    # zone B: s < s_new, kept iff at least one child falls in the new band;
    # dominating intensity beta1 e^{-beta1 s} min(1, lam_new(s))
    cand = []
    if t_new < s_new:  # piece [t_new, s_new) with intensity beta1 e^{-beta1 s}
        span = -math.expm1(-b1 * (s_new - t_new))
        n = rng.poisson(math.exp(-b1 * t_new) * span)
        cand.append(t_new - np.log1p(-rng.random(n) * span) / b1)
    top = min(t_new, s_new)  # piece (-inf, top): beta1 e^{-beta2 t} e^{(beta2-beta1) s}
    g = b2 - b1
    mass = b1 / g * math.exp(-b2 * t_new + g * top)
    cand.append(top - rng.exponential(1.0 / g, rng.poisson(mass)))
    s = np.concatenate(cand)
    if s.size:
        ln = lam(s, t_new, L2_new)
        lo_ = np.zeros_like(s) if fresh else lam(s, t_old, L2_old)
        acc = np.exp(-lo_) * -np.expm1(-(ln - lo_)) / np.minimum(1.0, ln)
        keep = rng.random(s.size) < acc
        s, ln, lo_ = s[keep], ln[keep], lo_[keep]
        new_s.append(s)
        new_counts.append(_zero_truncated_poisson(ln - lo_, rng))

    new_s = np.concatenate(new_s) if new_s else np.zeros(0)
    if new_s.size:
        counts = np.concatenate(new_counts).astype(np.int64)
        lo, hi = band(new_s)
        new_children = _split(_band_exponential(np.repeat(lo, counts), np.repeat(hi, counts),
                                                b2, rng), counts)
        c.xi1 = np.concatenate([c.xi1, new_s])
        c.xi2 = list(c.xi2) + new_children
    c.t, c.L2 = t_new, L2_new
    c._dust = None
    c.neglected_mass_bound = _bound(c)


def _bound(c: CascadeRealization) -> float:
    _, _, _, rel = _dust_terms(c)
    return rel


def _dust_terms(c: CascadeRealization):
    """(log-scale shift, per-parent dust means, irrelevant dust mean, relative bound)."""
    if c._dust is not None:
        return c._dust
    p, beta = c.params, c.beta
    b2 = p.beta2
    _, _, xi = c.atoms()
    cut = c.child_cut(c.xi1)
    log_m, log_v = _log_dust_moments(c.xi1, cut, beta, b2)
    irr_m, irr_v = _irrelevant_dust(p, beta, c.t, c.L2)
    # shift everything by the largest log-mass to stay in range
    cands = [beta * xi.max()] if xi.size else []
    if log_m.size:
        cands.append(log_m.max())
    cands.append(math.log(irr_m) if irr_m > 0 else -math.inf)
    shift = max(cands)
    m = np.exp(log_m - shift)
    total = np.exp(beta * xi - shift).sum() + m.sum() + irr_m * math.exp(-shift)
    var = np.exp(log_v - 2 * shift).sum() + irr_v * math.exp(-2 * shift)
    c._dust = (shift, m, irr_m * math.exp(-shift), math.sqrt(var) / total)
    return c._dust


def sample_cascade(p: ModelParams, eps: float = 1e-3, rng: np.random.Generator | None = None,
                   beta: float | None = None, max_refinements: int = 60) -> CascadeRealization:
    """Sample a truncated cascade whose dust fluctuation bound is <= eps."""
    if not 0 < eps <= 1e-2:
        raise ConfigError("eps must lie in (0, 1e-2]")
    beta = p.beta if beta is None else float(beta)
    _constants(p, beta)
    rng = rng if rng is not None else np.random.default_rng()
    t, L2 = _default_cuts(p, beta, eps)
    c = CascadeRealization(p, beta, math.inf, math.inf, np.zeros(0), [])
    _extend(c, t, L2, rng)
    for _ in range(max_refinements):
        if c.neglected_mass_bound <= eps:
            break
        _extend(c, c.t - 0.5, c.L2 - 0.5, rng)
    return c


def refine(c: CascadeRealization, t: float, L2: float, rng: np.random.Generator) -> CascadeRealization:
    """Exact extension of ``c`` to lower cuts (modifies and returns ``c``)."""
    _extend(c, t, L2, rng)
    return c


def cascade_mark(i, j, p: ModelParams) -> float:
    """Overlap of atoms given as (parent, child) pairs: 1, a1 or 0."""
    if tuple(i) == tuple(j):
        return 1.0
    return p.a1 if i[0] == j[0] else 0.0


def multiplicative_and_normalize(c: CascadeRealization, beta: float | None = None,
                                 with_dust: bool = True) -> MarkedPointProcess:
    """Normalized weights exp(beta xi) / total, with cascade marks.

    With ``with_dust`` the returned process also holds one diffuse point per
    kept parent (its sub-cut children) and one for the parents carrying no
    kept atom, so the weights sum to one.  A diffuse point paired with itself
    gets mark a1 (parent dust: distinct atoms of one parent) or 0.
    """
    beta = c.beta if beta is None else float(beta)
    if beta != c.beta:
        c = CascadeRealization(c.params, beta, c.t, c.L2, c.xi1, c.xi2)
    _constants(c.params, beta)
    p = c.params
    par, chi, xi = c.atoms()
    shift, m, irr, _ = _dust_terms(c)
    w = np.exp(beta * xi - shift)
    labels = np.stack([par, chi], axis=1)
    self_marks = np.ones(len(w))
    if with_dust:
        np_ = c.n_parents
        w = np.concatenate([w, m, [irr]])
        dust_labels = np.stack([np.arange(np_), np.full(np_, DIFFUSE)], axis=1)
        labels = np.concatenate([labels, dust_labels, [[DIFFUSE, DIFFUSE - 1]]]).astype(np.int64)
        self_marks = np.concatenate([self_marks, np.full(np_, p.a1), [0.0]])
        xi = np.concatenate([xi, np.full(np_ + 1, -np.inf)])
    w = w / w.sum()
    order = np.lexsort((np.arange(len(w)), -w))
    return CascadeMPP(w[order], labels[order], (1.0, p.a1, 0.0, 0.0), self_marks[order], xi[order])


@dataclass
class CascadeMPP(MarkedPointProcess):
    self_marks: np.ndarray = None
    positions: np.ndarray = None

    def mark(self, i: int, j: int) -> float:
        if i == j:
            return float(self.self_marks[i])
        a, b = self.labels[i], self.labels[j]
        if a[0] == b[0] and a[0] != DIFFUSE:
            return self.mark_values[1]
        return self.mark_values[3]

    def marks(self) -> np.ndarray:
        l = self.labels
        same = (l[:, None, 0] == l[None, :, 0]) & (l[:, None, 0] != DIFFUSE)
        q = np.where(same, self.mark_values[1], self.mark_values[3])
        np.fill_diagonal(q, self.self_marks)
        return q

    @property
    def weights(self) -> np.ndarray:
        return self.values

    def overlap_law(self) -> np.ndarray:
        """Exact two-replica law (P0, Pa1, P1) under these weights."""
        w = self.values
        atom = self.self_marks == 1.0
        p1 = float((w[atom] ** 2).sum())
        par = self.labels[:, 0]
        real = par != DIFFUSE
        sums = np.bincount(par[real], weights=w[real])
        p_same = float((sums ** 2).sum())
        return np.array([1.0 - p_same, p_same - p1, p1])


def _law_probe(seed, p, beta, eps, method, n_pairs):
    rng = generator(seed, "cascade")
    c = sample_cascade(p, eps, rng, beta)
    z = multiplicative_and_normalize(c)
    if method == "exact":
        law = z.overlap_law()
    else:
        from .kernels import DiscreteSampler
        idx = DiscreteSampler(z.values).draw(rng.random(2 * n_pairs)).reshape(n_pairs, 2)
        q = np.array([z.mark(int(i), int(j)) for i, j in idx])
        law = np.array([np.mean(q == 0.0), np.mean(q == p.a1), np.mean(q == 1.0)])
    return np.concatenate([law, [z.overlap_law()[2]]])


def cascade_overlap_law(p: ModelParams, beta: float | None = None, eps: float = 1e-3,
                        n_draws: int = 10000, master_seed: int = 0, method: str = "sample",
                        workers: int = 1):
    """Two-replica mark law (P0, Pa1, P1) of the normalized cascade.

    ``method="sample"`` draws one replica pair per realization (the literal
    estimator); ``"exact"`` averages each realization's exact law.  Also
    returns the estimate of E sum w^2 as a fourth entry.
    """
    beta = p.beta if beta is None else beta
    if method not in ("sample", "exact"):
        raise ConfigError("method must be 'sample' or 'exact'")
    fn = partial(_law_probe, p=p, beta=beta, eps=eps, method=method, n_pairs=1)
    vals = seed_values(fn, n_draws, master_seed, tag="cascade", workers=workers)
    names = ("P0", "Pa1", "P1", "sum_w2")
    return [Estimate.from_samples(vals[:, k], names[k]) for k in range(4)]

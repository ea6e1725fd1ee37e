"""Extended Ghirlanda-Guerra residuals and the Gaussian integration-by-parts
identity for the p-power perturbation.

Observable names follow a fixed grammar:

    f:  "mono:k12=1,k13=2"   product of q_ij ** k_ij (1-based replicas)
        "ind:q12=a1"         indicator of q_12 = a1 (values 0, a2, a1, 1)
        "one"                constant 1 (same as "mono:")
    g:  "mono:k=2"           q ** 2
        "ind:q=a2"           indicator of q = a2
        "one"

Monomials have total degree at most 4; every registered observable is bounded
by 1 on [0, 1].
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.special import softmax

from .cascade import DIFFUSE, multiplicative_and_normalize, sample_cascade
from .coalescent import compose_ppp_coalescent, mark_threshold, sample_bs_coalescent
from .gibbs import GibbsTable, overlap_profiles, replica_overlaps, sample_replicas, star_law
from .kernels import DiscreteSampler, normal_at
from .model import ConfigError, Configuration, DisorderRealization, ModelParams
from .parallel import seed_values
from .rng import generator
from .stats import Estimate

MAX_DEGREE = 4
VALUE_NAMES = ("0", "a2", "a1", "1")
_PAIR = re.compile(r"^([kq])(\d)(\d)$")


def _value(label: str, p: ModelParams) -> float:
    try:
        return p.overlap_values[VALUE_NAMES.index(label)]
    except ValueError:
        raise ConfigError(f"unknown overlap value {label!r}; use one of {VALUE_NAMES}") from None


@dataclass(frozen=True)
class Observable:
    """Parsed f (pairs of replicas) or g (``pairs`` is None for the single
    overlap argument)."""
    name: str
    kind: str
    terms: tuple  # mono: ((i, j, k), ...); ind: ((i, j, label),)
    bound: float = 1.0

    @property
    def replicas(self) -> int:
        return max([max(i, j) for i, j, _ in self.terms], default=1)

    def on_array(self, q: np.ndarray, p: ModelParams) -> np.ndarray:
        """Evaluate on overlap arrays of shape (n, s, s)."""
        out = np.ones(q.shape[0])
        for i, j, x in self.terms:
            col = q[:, i - 1, j - 1]
            if self.kind == "mono":
                out = out * col ** x
            else:
                out = out * (np.abs(col - _value(x, p)) < 1e-12)
        return out

    def on_values(self, v, p: ModelParams) -> np.ndarray:
        """Evaluate a g observable (or an f on q12) at overlap values."""
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "mono":
            return v ** (self.terms[0][2] if self.terms else 0)
        if not self.terms:
            return np.ones_like(v)
        return (np.abs(v - _value(self.terms[0][2], p)) < 1e-12).astype(np.float64)


def parse_f(name: str) -> Observable:
    name = name.strip()
    if name in ("one", "mono:"):
        return Observable(name, "mono", ())
    kind, _, body = name.partition(":")
    if kind not in ("mono", "ind") or not body:
        raise ConfigError(f"bad observable name {name!r}")
    terms = []
    for item in body.split(","):
        key, _, val = item.partition("=")
        m = _PAIR.match(key.strip())
        if not m or (m.group(1) == "k") != (kind == "mono"):
            raise ConfigError(f"bad term {item!r} in {name!r}")
        i, j = int(m.group(2)), int(m.group(3))
        if i == j or min(i, j) < 1:
            raise ConfigError(f"replica pair {i}{j} in {name!r} must join two distinct replicas")
        val = val.strip()
        if kind == "mono":
            if not val.isdigit():
                raise ConfigError(f"exponent must be a non-negative integer in {name!r}")
            terms.append((min(i, j), max(i, j), int(val)))
        else:
            _value(val, ModelParams(4))
            terms.append((min(i, j), max(i, j), val))
    if kind == "mono" and sum(t[2] for t in terms) > MAX_DEGREE:
        raise ConfigError(f"monomial degree above {MAX_DEGREE} in {name!r}")
    if kind == "ind" and len(terms) != 1:
        raise ConfigError("indicators take a single pair")
    return Observable(name, kind, tuple(terms))


def parse_g(name: str) -> Observable:
    name = name.strip()
    if name in ("one", "mono:"):
        return Observable(name, "mono", ())
    m = re.match(r"^(mono):k=(\d+)$|^(ind):q=(\w+)$", name)
    if not m:
        raise ConfigError(f"bad g observable {name!r}; use 'mono:k=K' or 'ind:q=V'")
    if m.group(1):
        k = int(m.group(2))
        if k > MAX_DEGREE:
            raise ConfigError(f"monomial degree above {MAX_DEGREE} in {name!r}")
        return Observable(name, "mono", ((1, 2, k),))
    _value(m.group(4), ModelParams(4))
    return Observable(name, "ind", ((1, 2, m.group(4)),))


@dataclass(frozen=True)
class ObservablePair:
    s: int
    f: Observable
    g: Observable

    @classmethod
    def parse(cls, s: int, f: str, g: str) -> "ObservablePair":
        fo = parse_f(f)
        if fo.replicas > s:
            raise ConfigError(f"{f!r} uses replica {fo.replicas} but s={s}")
        return cls(int(s), fo, parse_g(g))

    @property
    def names(self) -> tuple:
        return (self.f.name, self.g.name)


# replica sources ---------------------------------------------------------

class _Measure:
    """One realization of a random measure with overlap marks."""

    params: ModelParams

    def star_law(self):
        raise NotImplementedError

    def overlap_arrays(self, n: int, k: int, rng) -> np.ndarray:
        raise NotImplementedError


class _GibbsMeasure(_Measure):
    def __init__(self, g: GibbsTable):
        self.g, self.params = g, g.params

    def star_law(self):
        return self.g.star_law()

    def overlap_arrays(self, n, k, rng):
        return replica_overlaps(sample_replicas(self.g, k, rng, n), self.params)


class _PointMeasure(_Measure):
    """Finite weighted points with a mark rule given by ``mark_matrix``-free
    parent labels (cascade) or an explicit matrix (composition)."""

    def __init__(self, params, w, pair_marks, profile):
        self.params = params
        self.w = w
        self._pair_marks = pair_marks
        self._profile = profile

    def star_law(self):
        h = self._profile()  # (n, 4) over the bins (0, a2, a1, 1)
        P = self.w @ h
        J = (h * self.w[:, None]).T @ h
        return P, J

    def overlap_arrays(self, n, k, rng):
        idx = DiscreteSampler(self.w).draw(rng.random(n * k)).reshape(n, k)
        q = self._pair_marks(idx[:, :, None], idx[:, None, :])
        q[:, np.arange(k), np.arange(k)] = 1.0
        return q


def _cascade_measure(z, p):
    par = z.labels[:, 0]
    real = par != DIFFUSE
    atom = z.self_marks == 1.0
    w = z.values
    sums = np.bincount(par[real], weights=w[real], minlength=max(1, par.max() + 1))

    def pair_marks(i, j):
        same_par = (par[i] == par[j]) & real[i]
        q = np.where(same_par, p.a1, 0.0)
        return np.where(i == j, z.self_marks[i], q)

    def profile():
        h1 = np.where(atom, w, 0.0)
        ha1 = np.where(real, sums[np.where(real, par, 0)], 0.0) - h1
        return np.stack([1.0 - ha1 - h1, np.zeros_like(w), ha1, h1], axis=1)

    return _PointMeasure(p, w, pair_marks, profile)


def _composition_measure(z, p):
    q = z.marks()
    w = z.values

    def profile():
        return np.stack([(q == v) @ w for v in p.overlap_values], axis=1)

    return _PointMeasure(p, w, lambda i, j: q[i, j], profile)


@dataclass(frozen=True)
class GibbsSource:
    params: ModelParams
    beta: float | None = None
    perturbed: bool = True

    def realize(self, seed: int) -> _Measure:
        r = DisorderRealization(self.params, seed)
        return _GibbsMeasure(GibbsTable.build(r, self.beta, self.perturbed, keep_table=True))


@dataclass(frozen=True)
class CascadeSource:
    params: ModelParams
    beta: float | None = None
    eps: float = 1e-2

    def realize(self, seed: int) -> _Measure:
        rng = generator(seed, "cascade")
        c = sample_cascade(self.params, self.eps, rng, self.beta)
        return _cascade_measure(multiplicative_and_normalize(c), self.params)


@dataclass(frozen=True)
class CompositionSource:
    params: ModelParams
    beta: float | None = None
    n_top: int = 200

    def realize(self, seed: int) -> _Measure:
        p = self.params
        beta = p.beta if self.beta is None else self.beta
        rng = generator(seed, "composition")
        x1, x2 = p.beta1 / beta, p.beta2 / beta
        t_star = mark_threshold(x1, x2)
        tr = sample_bs_coalescent(self.n_top + 2, t_star, rng)
        return _composition_measure(compose_ppp_coalescent(x2, self.n_top, tr, t_star, p.a1, rng), p)


# residual ----------------------------------------------------------------

def _on_bins(obs: Observable, p: ModelParams, as_f: bool) -> np.ndarray:
    v = np.array(p.overlap_values)
    if not as_f:
        return obs.on_values(v, p)
    q = np.ones((4, 2, 2))
    q[:, 0, 1] = q[:, 1, 0] = v
    return obs.on_array(q, p)


def _eggi_probe(seed, source, obs, n_inner):
    m = source.realize(seed)
    p, s = m.params, obs.s
    if n_inner is None:
        if s != 2:
            raise ConfigError("exact brackets cover s = 2; pass n_inner for larger s")
        P, J = m.star_law()
        f = _on_bins(obs.f, p, True)
        g = _on_bins(obs.g, p, False)
        return [f @ J @ g, f @ P, g @ P, (f * g) @ P]
    q = m.overlap_arrays(int(n_inner), s + 1, generator(seed, "eggi"))
    fv = obs.f.on_array(q[:, :s, :s], p)
    gq = lambda l: obs.g.on_values(q[:, 0, l], p)  # noqa: E731
    a = np.mean(fv * gq(s))
    d = sum(np.mean(fv * gq(l)) for l in range(1, s))
    return [a, fv.mean(), gq(1).mean(), d]


def residual_from_brackets(vals: np.ndarray, s: int, name: str = "eggi_residual") -> Estimate:
    """Combine per-realization brackets (A, B, C, D) into the residual
    A - B C / s - D / s.

    The product of means uses even-indexed realizations for B and odd ones
    for C, so it is unbiased.  The returned error comes from the linearized
    contribution of each (even, odd) pair, which is exact for the mean and
    accounts for the product term's variance.
    """
    n = (len(vals) // 2) * 2
    if n < 4:
        raise ConfigError("need at least four realizations")
    A, B, C, D = vals[:n].T
    y = A - D / s
    be, co = B[0::2].mean(), C[1::2].mean()
    lin = 0.5 * (y[0::2] + y[1::2]) - (be * co + co * (B[0::2] - be) + be * (C[1::2] - co)) / s
    return Estimate.from_samples(lin, name)


def eggi_residual(source, obs: ObservablePair, n_outer: int, n_inner: int | None = None,
                  master_seed: int = 0, workers: int = 1) -> Estimate:
    """E<f g(q_{1,s+1})> - E<f> E<g(q12)> / s - sum_{l=2..s} E<f g(q_1l)> / s.

    ``source`` is a replica source (GibbsSource, CascadeSource or
    CompositionSource).  With ``n_inner=None`` and s = 2 the inner brackets
    are exact; otherwise each realization contributes the average over
    ``n_inner`` sampled (s+1)-tuples.
    """
    if obs.s < 2:
        raise ConfigError("the residual needs s >= 2")
    fn = partial(_eggi_probe, source=source, obs=obs, n_inner=n_inner)
    vals = seed_values(fn, n_outer, master_seed, tag="eggi", workers=workers)
    return residual_from_brackets(vals, obs.s)


# p-power fields and the integration-by-parts identity --------------------

def _p_coeffs(p: ModelParams, power: int):
    if isinstance(power, bool) or int(power) != power or power < 1:
        raise ConfigError(f"p must be an integer >= 1, got {power!r}")
    N = p.N
    u2, v2 = N * p.a1 ** power, N * p.a2 ** power
    return math.sqrt(u2), math.sqrt(v2), math.sqrt(max(0.0, N - u2 - v2))


def p_field_energy(r: DisorderRealization, power: int, s: Configuration) -> float:
    """u Y1[s1] + v Y2[s2] + w Y12[s] with covariance N q^p."""
    u, v, w = _p_coeffs(r.params, power)
    y1 = normal_at(r.key("Y1", power), np.array([s.i1]))[0]
    y2 = normal_at(r.key("Y2", power), np.array([s.i2]))[0]
    out = u * y1 + v * y2
    if w:
        out += w * normal_at(r.key("Y12", power), np.array([s.flat(r.params.N)]))[0]
    return float(out)


def p_field_table(r: DisorderRealization, power: int) -> np.ndarray:
    p = r.params
    m = p.block_size
    u, v, w = _p_coeffs(p, power)
    idx = np.arange(m)
    t = u * normal_at(r.key("Y1", power), idx)[:, None] + v * normal_at(r.key("Y2", power), idx)[None, :]
    if w:
        t = t + w * normal_at(r.key("Y12", power), np.arange(m * m)).reshape(m, m)
    return t


def default_delta_n(N: int) -> float:
    return N ** (-1.0 / 16.0)


def ibp_weights(r: DisorderRealization, power: int, beta: float, beta_p: float, delta_n: float,
                perturbed: bool = False):
    """Gibbs weights of beta X + sqrt(delta_n) beta_p X^p, and the X^p table."""
    xp = p_field_table(r, power)
    h = beta * r.table(perturbed) + math.sqrt(delta_n) * beta_p * xp
    return softmax(h.ravel()).reshape(h.shape), xp


def ibp_brackets(w: np.ndarray, xp: np.ndarray, p: ModelParams, power: int, s: int,
                 f: Observable, beta_p: float):
    """(<X^p_{sigma1} f>, beta_p^2 (sum_l <q^p_1l f> - s <q^p_{1,s+1} f>)) for
    one realization, exact."""
    v = np.array(p.overlap_values)
    vp = v ** power
    h = overlap_profiles(w)
    if s == 1:
        c = float(f.on_array(np.ones((1, 1, 1)), p)[0])
        P = (w[None] * h).sum(axis=(1, 2))
        return c * float((w * xp).sum()), beta_p ** 2 * c * (1.0 - vp @ P)
    if s == 2:
        fb = _on_bins(f, p, True)
        P, J = star_law(w)
        lhs = float((w * xp * np.tensordot(fb, h, axes=1)).sum())
        rhs = fb @ P + (vp * fb) @ P - 2.0 * fb @ J @ vp
        return lhs, beta_p ** 2 * rhs
    raise ConfigError("ibp_check covers s = 1 and s = 2")


def _ibp_probe(seed, p, power, s, f, beta, beta_p, delta_n, perturbed):
    r = DisorderRealization(p, seed)
    w, xp = ibp_weights(r, power, beta, beta_p, delta_n, perturbed)
    core, rhs = ibp_brackets(w, xp, p, power, s, f, beta_p)
    # identity multiplied through by sqrt(delta_n): beta_p <X^p f>/N = sqrt(delta_n) rhs
    lhs = beta_p * core / p.N
    scale = math.sqrt(delta_n)
    if scale > 0:
        return [lhs / scale, rhs]
    return [lhs, 0.0]


def ibp_check(p: ModelParams, p_power: int = 2, s: int = 1, f: str = "one",
              delta_n: float | None = None, n_seeds: int = 1000, master_seed: int = 0,
              beta_p: float | None = None, perturbed: bool = False, workers: int = 1,
              max_n: int = 12):
    """Both sides of the integration-by-parts identity, averaged over disorder.

    lhs = E<sqrt(delta_n) beta_p X^p_{sigma1} f> / (delta_n N) and
    rhs = beta_p^2 (sum_l E<q^p_1l f> - s E<q^p_{1,s+1} f>).  When delta_n = 0
    the identity is reported multiplied by sqrt(delta_n), i.e. lhs becomes
    beta_p E<X^p f> / N and rhs is 0.
    """
    if p.N > max_n:
        raise ConfigError(f"ibp_check enumerates exactly; N must be <= {max_n}")
    delta_n = default_delta_n(p.N) if delta_n is None else float(delta_n)
    if delta_n < 0:
        raise ConfigError("delta_n must be >= 0")
    beta_p = p.beta if beta_p is None else float(beta_p)
    fo = parse_f(f)
    if fo.replicas > s or (s == 1 and fo.terms):
        raise ConfigError(f"observable {f!r} does not fit s={s}")
    _p_coeffs(p, p_power)
    fn = partial(_ibp_probe, p=p, power=int(p_power), s=int(s), f=fo, beta=p.beta,
                 beta_p=beta_p, delta_n=delta_n, perturbed=perturbed)
    vals = seed_values(fn, n_seeds, master_seed, tag="ibp", workers=workers)
    return Estimate.from_samples(vals[:, 0], "lhs"), Estimate.from_samples(vals[:, 1], "rhs")

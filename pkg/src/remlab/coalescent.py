"""Bolthausen-Sznitman coalescent and its composition with a Poisson-Dirichlet
point process.

The coalescent is the Lambda-coalescent with uniform Lambda: while there are
b blocks, any fixed k of them merge at rate (k-2)!(b-k)!/(b-1)!.  Summed over
subsets the total rate is b - 1, and the merger size K has
P(K = k) = b / ((b - 1) k (k - 1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .extremes import MarkedPointProcess
from .model import ConfigError, ModelParams
from .parallel import seed_values
from .rng import generator
from .stats import Estimate

ABOVE_HORIZON = math.inf
MAX_LEAVES = 10_000


def merge_rate(b: int, k: int) -> float:
    """Rate at which a given k-subset of b blocks merges."""
    if not 2 <= k <= b:
        raise ConfigError(f"need 2 <= k <= b, got k={k}, b={b}")
    return math.exp(math.lgamma(k - 1) + math.lgamma(b - k + 1) - math.lgamma(b))


@dataclass
class CoalescentTrajectory:
    n: int
    events: list          # (time, frozenset of merged block ids)
    horizon: float
    _leaf_blocks: list = field(default=None, repr=False)

    @property
    def complete(self) -> bool:
        """True once a single block remains."""
        return self.n_blocks_at(math.inf) == 1

    def n_blocks_at(self, t: float) -> int:
        return self.n - sum(len(m) - 1 for s, m in self.events if s <= t)

    def partition_at(self, t: float) -> list:
        """Blocks (as sorted leaf lists) present at time t."""
        members = {i: [i] for i in range(self.n)}
        nxt = self.n
        for s, merged in self.events:
            if s > t:
                break
            members[nxt] = sorted(x for b in merged for x in members.pop(b))
            nxt += 1
        return sorted(members.values())

    def merge_times(self) -> np.ndarray:
        """(n, n) matrix of pairwise coalescence times; 0 on the diagonal."""
        lab = np.arange(self.n)
        T = np.full((self.n, self.n), ABOVE_HORIZON)
        np.fill_diagonal(T, 0.0)
        nxt = self.n
        for s, merged in self.events:
            hit = np.isin(lab, list(merged))
            lab[hit] = nxt
            nxt += 1
            idx = np.nonzero(hit)[0]
            sub = T[np.ix_(idx, idx)]
            T[np.ix_(idx, idx)] = np.where(np.isinf(sub), s, sub)
        return T


def sample_bs_coalescent(n: int, horizon: float, rng: np.random.Generator) -> CoalescentTrajectory:
    """Event-driven simulation up to ``horizon`` (may be ``math.inf``)."""
    if isinstance(n, bool) or int(n) != n or not 2 <= n <= MAX_LEAVES:
        raise ConfigError(f"n must be an integer in [2, {MAX_LEAVES}], got {n!r}")
    if not horizon > 0:
        raise ConfigError("horizon must be > 0")
    n = int(n)
    blocks = list(range(n))
    nxt = n
    t = 0.0
    events = []
    while len(blocks) > 1:
        b = len(blocks)
        t += rng.exponential(1.0 / (b - 1))
        if t > horizon:
            break
        # P(K <= k) = b/(b-1) (1 - 1/k), inverted in closed form
        u = rng.random()
        k = min(b, max(2, math.ceil(1.0 / (1.0 - u * (b - 1) / b) - 1e-12)))
        pick = set(rng.choice(b, size=k, replace=False).tolist())
        merged = frozenset(blocks[i] for i in pick)
        blocks = [blk for i, blk in enumerate(blocks) if i not in pick]
        blocks.append(nxt)
        nxt += 1
        events.append((t, merged))
    return CoalescentTrajectory(n, events, float(horizon))


def pair_time(tr: CoalescentTrajectory, i: int, j: int) -> float:
    """First time leaves i and j share a block; 0 when i == j."""
    for x in (i, j):
        if isinstance(x, bool) or int(x) != x or not 0 <= x < tr.n:
            raise ConfigError(f"invalid leaf {x!r} for n={tr.n}")
    if i == j:
        return 0.0
    bi, bj = int(i), int(j)
    nxt = tr.n
    for s, merged in tr.events:
        if bi in merged:
            bi = nxt
        if bj in merged:
            bj = nxt
        if bi == bj:
            return s
        nxt += 1
    return ABOVE_HORIZON


def mark_threshold(x1: float, x2: float) -> float:
    """Effective single threshold t* = log(x2/x1)."""
    if not 0 < x1 < x2:
        raise ConfigError("need 0 < x1 < x2")
    return math.log(x2 / x1)


def assign_marks(tr: CoalescentTrajectory, t_star: float, a1: float) -> np.ndarray:
    """Marks 1 on the diagonal, a1 for leaves joined by t*, 0 otherwise."""
    if t_star < 0:
        raise ConfigError("threshold must be >= 0")
    if tr.horizon < t_star and not tr.complete:
        raise ConfigError(f"horizon {tr.horizon} is below the threshold {t_star}")
    T = tr.merge_times()
    q = np.where(T <= t_star, a1, 0.0)
    np.fill_diagonal(q, 1.0)
    return q


def sample_pd_points(x: float, n_top: int, rng: np.random.Generator):
    """Top ``n_top`` atoms of the PPP with density x t^(-x-1) on (0, inf), in
    decreasing order, plus the conditional mean and variance of the mass of
    all lower atoms.

    The k-th largest atom is G_k^(-1/x) for the arrival times G_k of a unit
    Poisson process.  Given the n-th atom u0, the rest is a PPP on (0, u0)
    with mass mean x/(1-x) u0^(1-x) and variance x/(2-x) u0^(2-x).
    """
    if not 0 < x < 1:
        raise ConfigError(f"x2 must lie in (0, 1), got {x}")
    if n_top < 1:
        raise ConfigError("n_top must be >= 1")
    g = np.cumsum(rng.exponential(1.0, n_top))
    pts = g ** (-1.0 / x)
    u0 = pts[-1]
    return pts, x / (1 - x) * u0 ** (1 - x), x / (2 - x) * u0 ** (2 - x)


@dataclass
class Composition(MarkedPointProcess):
    """Normalized PD atoms with coalescent marks.

    The last point is the diffuse remainder (all atoms below the top n_top);
    a pair of replicas both inside it are distinct atoms, whose mark is read
    from one extra coalescent leaf.
    """
    mark_matrix: np.ndarray = None
    neglected_mass_bound: float = math.nan

    def mark(self, i: int, j: int) -> float:
        n = len(self)
        if i == j == n - 1:
            return float(self.mark_matrix[n - 1, n])
        return float(self.mark_matrix[i, j])

    def marks(self) -> np.ndarray:
        n = len(self)
        q = self.mark_matrix[:n, :n].copy()
        q[n - 1, n - 1] = self.mark_matrix[n - 1, n]
        return q

    def overlap_law(self, a1: float) -> np.ndarray:
        w = self.values
        q = self.marks()
        ww = np.outer(w, w)
        return np.array([ww[q == 0.0].sum(), ww[q == a1].sum(), ww[q == 1.0].sum()])


def compose_ppp_coalescent(x2: float, n_top: int, tr: CoalescentTrajectory, t_star: float,
                           a1: float, rng: np.random.Generator,
                           with_dust: bool = True) -> Composition:
    """P_{x2} decorated by coalescent marks drawn independently of the points.

    ``tr`` must have at least n_top + 2 leaves (one for the remainder and one
    for its internal pairs).  Without ``with_dust`` only the top atoms are
    returned and the weights sum to less than one.
    """
    if tr.n < n_top + 2:
        raise ConfigError(f"trajectory needs n_top + 2 = {n_top + 2} leaves, has {tr.n}")
    pts, dust_mean, dust_var = sample_pd_points(x2, n_top, rng)
    total = pts.sum() + dust_mean
    q = assign_marks(tr, t_star, a1)
    if with_dust:
        w = np.append(pts, dust_mean) / total
        q = q[: n_top + 2, : n_top + 2]
    else:
        w = pts / total
        q = q[: n_top, : n_top]
        q = np.pad(q, ((0, 1), (0, 1)))  # unused slot keeps the layout
    labels = np.stack([np.arange(len(w)), np.arange(len(w))], axis=1)
    return Composition(w, labels, (1.0, a1, a1, 0.0), q, math.sqrt(dust_var) / total)


def _leaf_mark(tr, i, j, t_star, a1):
    return a1 if pair_time(tr, i, j) <= t_star else 0.0


def _composition_probe(seed, p, beta, n_top, method):
    rng = generator(seed, "composition")
    x1, x2 = p.beta1 / beta, p.beta2 / beta
    t_star = mark_threshold(x1, x2)
    tr = sample_bs_coalescent(n_top + 2, t_star, rng)
    if method == "exact":
        z = compose_ppp_coalescent(x2, n_top, tr, t_star, p.a1, rng)
        sum_w2 = float((z.values[:-1] ** 2).sum())
        law = z.overlap_law(p.a1)
        law[2] = sum_w2
        law[0] = 1.0 - law[1] - law[2]
    else:
        # same construction, but only the sampled pair's mark is read
        pts, dust_mean, _ = sample_pd_points(x2, n_top, rng)
        w = np.append(pts, dust_mean)
        w /= w.sum()
        sum_w2 = float((w[:-1] ** 2).sum())
        i, j = np.searchsorted(np.cumsum(w), rng.random(2) * w.sum(), side="right")
        i, j = min(int(i), n_top), min(int(j), n_top)
        if i == j:
            m = 1.0 if i < n_top else _leaf_mark(tr, n_top, n_top + 1, t_star, p.a1)
        else:
            m = _leaf_mark(tr, i, j, t_star, p.a1)
        law = np.array([m == 0.0, m == p.a1, m == 1.0], dtype=float)
    return np.append(law, sum_w2)


def composition_overlap_law(p: ModelParams, beta: float | None = None, n_top: int = 200,
                            n_draws: int = 10000, master_seed: int = 0, method: str = "sample",
                            workers: int = 1) -> list:
    """Two-replica mark law (P0, Pa1, P1) and E sum w^2 of the composition.

    With ``method="exact"`` P1 is the sum of squared atom weights: the
    remainder's internal self-pairs have vanishing weight.
    """
    beta = p.beta if beta is None else float(beta)
    if beta <= p.beta2:
        raise ConfigError(f"beta={beta} <= beta2={p.beta2:.6f}: x2 would be >= 1")
    if method not in ("sample", "exact"):
        raise ConfigError("method must be 'sample' or 'exact'")
    fn = partial(_composition_probe, p=p, beta=beta, n_top=int(n_top), method=method)
    vals = seed_values(fn, n_draws, master_seed, tag="composition", workers=workers)
    names = ("P0", "Pa1", "P1", "sum_w2")
    return [Estimate.from_samples(vals[:, k], names[k]) for k in range(4)]


def _pair_time_probe(seed, n, horizon):
    tr = sample_bs_coalescent(n, horizon, generator(seed, "coalescent"))
    t = pair_time(tr, 0, 1)
    return [float(t <= horizon), t if math.isfinite(t) else math.nan]


def pair_time_law(n: int = 2, horizon: float = math.inf, n_draws: int = 10000,
                  master_seed: int = 0, workers: int = 1) -> list:
    """P(leaves 0 and 1 merge by the horizon) and, for an infinite horizon,
    the mean merge time (1 for every n: a pair merges at rate 1)."""
    fn = partial(_pair_time_probe, n=int(n), horizon=float(horizon))
    vals = seed_values(fn, n_draws, master_seed, tag="coalescent", workers=workers)
    out = [Estimate.from_samples(vals[:, 0], "merged_by_horizon")]
    if math.isinf(horizon):
        out.append(Estimate.from_samples(vals[:, 1], "pair_time"))
    return out

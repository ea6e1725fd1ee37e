"""Extremal process of the shifted energies X_sigma - a_N."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy import stats

from . import kernels
from .model import ConfigError, DisorderRealization, ModelParams
from .parallel import seed_values
from .stats import Estimate


@dataclass
class MarkedPointProcess:
    """Finite point list with pairwise overlap marks.

    ``labels`` is an (n, 2) integer array.  Two points get mark ``mark_values[0]``
    when both labels agree (the same atom), ``[1]`` when only the first agrees,
    ``[2]`` when only the second agrees and ``[3]`` otherwise.  For the spin
    system the labels are (i1, i2) and the marks are (1, a1, a2, 0); a
    cascade uses (parent, child) with child labels that never repeat across
    parents, so the third case never occurs.
    """
    values: np.ndarray
    labels: np.ndarray
    mark_values: tuple

    def __len__(self):
        return len(self.values)

    def mark(self, i: int, j: int) -> float:
        a, b = self.labels[i], self.labels[j]
        same1, same2 = a[0] == b[0], a[1] == b[1]
        if same1 and same2:
            return self.mark_values[0]
        if same1:
            return self.mark_values[1]
        if same2:
            return self.mark_values[2]
        return self.mark_values[3]

    def marks(self) -> np.ndarray:
        l = self.labels
        same1 = l[:, None, 0] == l[None, :, 0]
        same2 = l[:, None, 1] == l[None, :, 1]
        both, first, second, none = self.mark_values
        return np.where(same1, np.where(same2, both, first), np.where(same2, second, none))

    def pair_mark_counts(self) -> dict:
        """Counts of each mark value over unordered distinct pairs."""
        m = self.marks()
        iu = np.triu_indices(len(self), 1)
        vals, counts = np.unique(m[iu], return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))


def _shift(r: DisorderRealization, perturbed: bool):
    c = r.centering
    a2 = c.aN2_delta if perturbed else c.aN2_delta - c.delta_aN2
    return c.aN1, a2


def _interval(M, name="window"):
    lo, hi = float(M[0]), float(M[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError(f"{name} must be a bounded interval, got {M}")
    return lo, hi


def top_k_shifted(r: DisorderRealization, perturbed: bool = True, k: int = 50,
                  cap: int = 26) -> MarkedPointProcess:
    """The k largest shifted energies in one streaming pass.

    Sorted descending; equal values are ordered by ascending flat index.
    """
    p = r.params
    if k < 1:
        raise ConfigError("k must be >= 1")
    if p.N > cap:
        from .model import ResourceCapError
        raise ResourceCapError(f"N={p.N} exceeds the scan cap {cap}")
    scale = r.perturbation_scale if perturbed else 0.0
    ids, vals = kernels.top_k(r.x1, r.x2, r.key("Xd"), scale, min(k, 1 << p.N))
    a1, a2 = _shift(r, perturbed)
    labels = np.stack([ids >> p.half, ids & (p.block_size - 1)], axis=1)
    return MarkedPointProcess(vals - (a1 + a2), labels, (1.0, p.a1, p.a2, 0.0))


def window_reference(p: ModelParams, M1, M2, prefactor: bool = True) -> float:
    """Limit expected number of points with block-1 part in M1 and rest in M2.

    With ``prefactor`` the two Poisson intensities are beta_l exp(-beta_l y);
    without it the bare exponentials exp(-beta_l y) are integrated.
    """
    def part(M, b):
        lo, hi = _interval(M)
        val = (math.exp(-b * lo) - math.exp(-b * hi)) / b
        return val * b if prefactor else val
    return part(M1, p.beta1) * part(M2, p.beta2)


def window_points(r: DisorderRealization, perturbed: bool, M1, M2) -> int:
    """#{sigma : Xhat1 in M1 and the shifted remainder in M2}; only rows with
    the block-1 value in M1 are generated."""
    lo1, hi1 = _interval(M1, "M1")
    lo2, hi2 = _interval(M2, "M2")
    a1, a2 = _shift(r, perturbed)
    x1h = r.x1 - a1
    rows = np.nonzero((x1h >= lo1) & (x1h <= hi1))[0]
    if rows.size == 0:
        return 0
    rest = r.rows(rows, perturbed) - r.x1[rows][:, None] - a2
    return int(np.count_nonzero((rest >= lo2) & (rest <= hi2)))


def _window_probe(seed, p, perturbed, M1, M2):
    return [window_points(DisorderRealization(p, seed), perturbed, M1, M2)]


@dataclass
class WindowResult:
    estimate: Estimate
    reference: float
    reference_bare: float

    @property
    def relative_deviation(self) -> float:
        return abs(self.estimate.mean / self.reference - 1.0)

    @property
    def relative_deviation_bare(self) -> float:
        return abs(self.estimate.mean / self.reference_bare - 1.0)


def window_count(p: ModelParams, perturbed: bool = True, M1=(0.0, 1.0), M2=(0.0, 1.0),
                 n_seeds: int = 1000, master_seed: int = 0, workers: int = 1) -> WindowResult:
    fn = partial(_window_probe, p=p, perturbed=perturbed, M1=tuple(M1), M2=tuple(M2))
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return WindowResult(Estimate.from_samples(vals[:, 0], "window_count"),
                        window_reference(p, M1, M2, True), window_reference(p, M1, M2, False))


@dataclass
class WindowScan:
    """Points of one realization whose total shifted energy lies in M."""
    column_counts: np.ndarray
    n_points: int
    part1_range: tuple
    rest_range: tuple


def scan_window(r: DisorderRealization, perturbed: bool, M, table=None) -> WindowScan:
    lo, hi = _interval(M)
    a1, a2 = _shift(r, perturbed)
    if hi < lo:
        return WindowScan(np.zeros(r.params.block_size, dtype=np.int64), 0,
                          (math.inf, -math.inf), (math.inf, -math.inf))
    if table is None and (not perturbed or r.perturbation_scale == 0.0):
        return _scan_product(r.x1 - a1, r.x2 - a2, lo, hi)
    if table is None:
        table = r.table(perturbed)
    cols, n, l1, h1, lr, hr = kernels.window_scan(table, r.x1, a1, a2, lo, hi)
    return WindowScan(cols, int(n), (float(l1), float(h1)), (float(lr), float(hr)))


def _scan_product(x1h, x2h, lo, hi):
    # without the perturbation the window condition on row values is an
    # interval for each column, so sorting block 1 answers it per column
    s = np.sort(x1h)
    a = np.searchsorted(s, lo - x2h, side="left")
    b = np.searchsorted(s, hi - x2h, side="right")
    cols = (b - a).astype(np.int64)
    n = int(cols.sum())
    if n == 0:
        return WindowScan(cols, 0, (math.inf, -math.inf), (math.inf, -math.inf))
    hit = cols > 0
    return WindowScan(cols, n, (float(s[a[hit]].min()), float(s[b[hit] - 1].max())),
                      (float(x2h[hit].min()), float(x2h[hit].max())))


def forbidden_pair_event(scan: WindowScan) -> bool:
    """Two points in the window share block 2 (they then differ in block 1)."""
    return bool(scan.column_counts.size and scan.column_counts.max() >= 2)


def _forbidden_probe(seed, p, perturbed, M):
    r = DisorderRealization(p, seed)
    return [float(forbidden_pair_event(scan_window(r, perturbed, M)))]


def forbidden_pair_rate(p: ModelParams, perturbed: bool = True, M=(-2.0, 2.0),
                        n_seeds: int = 1000, master_seed: int = 0, workers: int = 1) -> Estimate:
    fn = partial(_forbidden_probe, p=p, perturbed=perturbed, M=tuple(M))
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return Estimate.from_samples(vals[:, 0], "forbidden_pair_rate")


def localization_events(scan: WindowScan, mtildes) -> list:
    """For each M~, whether some window point has a part outside it."""
    out = []
    for mt in mtildes:
        lo, hi = _interval(mt, "Mtilde")
        if scan.n_points == 0:
            out.append(False)
            continue
        l1, h1 = scan.part1_range
        lr, hr = scan.rest_range
        out.append(bool(l1 < lo or h1 > hi or lr < lo or hr > hi))
    return out


def _localization_probe(seed, p, perturbed, M, mtildes):
    r = DisorderRealization(p, seed)
    return np.array(localization_events(scan_window(r, perturbed, M), mtildes), dtype=float)


def localization_rate(p: ModelParams, perturbed: bool = True, M=(-1.0, 1.0),
                      Mtilde=(-4.0, 4.0), n_seeds: int = 1000, master_seed: int = 0,
                      workers: int = 1):
    """Frequency of seeds with a window point whose block parts leave M~.

    ``Mtilde`` may be one interval (returns an Estimate) or a list of
    intervals evaluated on the same realizations (returns a list).
    """
    single = np.ndim(Mtilde) == 1
    mts = [tuple(Mtilde)] if single else [tuple(m) for m in Mtilde]
    fn = partial(_localization_probe, p=p, perturbed=perturbed, M=tuple(M), mtildes=mts)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    ests = [Estimate.from_samples(vals[:, k], f"localization[{mts[k][0]},{mts[k][1]}]")
            for k in range(len(mts))]
    return ests[0] if single else ests


def gumbel_cdf(x, b: float):
    return np.exp(-np.exp(-b * np.asarray(x, dtype=np.float64)))


@dataclass
class KSResult:
    statistic: float
    pvalue: float
    n: int


def _block_max_probe(seed, p, block):
    r = DisorderRealization(p, seed)
    c = r.centering
    if block == 1:
        return [float(r.x1.max() - c.aN1)]
    return [float(r.x2.max() - (c.aN2_delta - c.delta_aN2))]


def block_max_law(p: ModelParams, block: int = 1, n_seeds: int = 4000, master_seed: int = 0,
                  workers: int = 1) -> KSResult:
    """KS distance between the shifted block maximum and exp(-exp(-beta_l x))."""
    if block not in (1, 2):
        raise ConfigError("block must be 1 or 2")
    b = p.beta1 if block == 1 else p.beta2
    fn = partial(_block_max_probe, p=p, block=block)
    m = seed_values(fn, n_seeds, master_seed, workers=workers)[:, 0]
    res = stats.kstest(m, partial(gumbel_cdf, b=b))
    return KSResult(float(res.statistic), float(res.pvalue), int(m.size))


def _mark_probe(seed, p, perturbed, k):
    mpp = top_k_shifted(DisorderRealization(p, seed), perturbed, k)
    counts = mpp.pair_mark_counts()
    total = max(1, len(mpp) * (len(mpp) - 1) // 2)
    return [counts.get(v, 0) / total for v in (0.0, p.a2, p.a1)]


def top_k_mark_law(p: ModelParams, perturbed: bool = True, k: int = 50, n_seeds: int = 100,
                   master_seed: int = 0, workers: int = 1) -> list:
    """Fraction of top-k pairs carrying mark 0, a2, a1."""
    fn = partial(_mark_probe, p=p, perturbed=perturbed, k=k)
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return [Estimate.from_samples(vals[:, j], name) for j, name in
            enumerate(("mark0", "mark_a2", "mark_a1"))]

"""One pass per realization for the Gibbs and window statistics together.

At the largest table sizes building the energy table dominates the cost, so
the overlap law, the ultrametric violation rate and the window scan are
read from a single sweep over the energies.
"""
from __future__ import annotations

from functools import partial

import numpy as np

from . import kernels
from .extremes import WindowScan, _interval, _shift, forbidden_pair_event, scan_window
from .gibbs import BINS, TABLE_CAP, GibbsTable
from .model import DisorderRealization, ModelParams, ResourceCapError
from .parallel import seed_values
from .stats import Estimate

FIELDS = BINS + ("violation", "forbidden_pair", "window_points")


def survey_realization(r: DisorderRealization, beta: float | None = None, perturbed: bool = True,
                       M=(-2.0, 2.0), cap: int = TABLE_CAP):
    p = r.params
    beta = p.beta if beta is None else float(beta)
    if p.N > cap:
        raise ResourceCapError(f"N={p.N} exceeds the table cap {cap}")
    lo, hi = _interval(M)
    if not perturbed or r.perturbation_scale == 0.0:
        return GibbsTable.build(r, beta, perturbed), scan_window(r, perturbed, M)
    a1, a2 = _shift(r, perturbed)
    out = kernels.survey_reduce(r.x1, r.x2, r.key("Xd"), r.perturbation_scale, beta,
                                a1, a2, lo, hi)
    lz, row, col, s2, s3, wrc, w2r, w2c = out[:8]
    cols, n, l1, h1, lr, hr = out[8:]
    g = GibbsTable(p, r.master_seed, beta, perturbed, float(lz), row, col, float(s2), float(s3),
                   float(wrc), float(w2r), float(w2c))
    return g, WindowScan(cols, int(n), (float(l1), float(h1)), (float(lr), float(hr)))


def _survey_probe(seed, p, beta, perturbed, M):
    g, scan = survey_realization(DisorderRealization(p, seed), beta, perturbed, M)
    return np.concatenate([g.overlap_law(),
                           [g.violation_rate(), float(forbidden_pair_event(scan)), scan.n_points]])


def gibbs_survey(p: ModelParams, beta: float | None = None, perturbed: bool = True,
                 M=(-2.0, 2.0), n_seeds: int = 100, master_seed: int = 0,
                 workers: int = 1) -> dict:
    """Estimates of the four overlap bins, the exact violation rate, the
    forbidden-pair frequency in M and the mean window count."""
    fn = partial(_survey_probe, p=p, beta=beta, perturbed=perturbed, M=tuple(M))
    vals = seed_values(fn, n_seeds, master_seed, workers=workers)
    return {name: Estimate.from_samples(vals[:, k], name) for k, name in enumerate(FIELDS)}

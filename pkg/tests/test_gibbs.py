import itertools
import math

import numpy as np
import pytest

from remlab.gibbs import (GibbsTable, analytic_free_energy, free_energy, free_energy_gap,
                          log_partition, overlap_histogram, overlap_observable,
                          overlap_profiles, replica_overlaps, sample_replicas, star_law,
                          ultrametric_violation_rate, violation_fraction)
from remlab.model import LOG2, Configuration, DisorderRealization, ModelParams, overlap
from remlab.rng import generator


def brute_law(r, beta, perturbed):
    """Two- and three-replica laws by explicit enumeration of all configurations."""
    p = r.params
    m = p.block_size
    confs = [Configuration(i, j) for i in range(m) for j in range(m)]
    e = np.array([r.energy(s, perturbed) for s in confs])
    w = np.exp(beta * e - (beta * e).max())
    w /= w.sum()
    vals = p.overlap_values
    Q = np.array([[vals.index(min(vals, key=lambda v: abs(v - overlap(s, t, p))))
                   for t in confs] for s in confs])
    P = np.zeros(4)
    J = np.zeros((4, 4))
    for a in range(len(confs)):
        P += np.bincount(Q[a], weights=w[a] * w, minlength=4)
        h = np.bincount(Q[a], weights=w, minlength=4)
        J += w[a] * np.outer(h, h)
    viol = 0.0
    d = np.sqrt(1.0 - np.array(vals))[Q]
    for a, b, c in itertools.product(range(len(confs)), repeat=3):
        x, y, z = d[a, b], d[a, c], d[b, c]
        if x > max(y, z) + 1e-12 or y > max(x, z) + 1e-12 or z > max(x, y) + 1e-12:
            viol += w[a] * w[b] * w[c]
    return P, J, viol


@pytest.mark.parametrize("perturbed", [True, False])
def test_exact_brackets_match_enumeration(perturbed):
    r = DisorderRealization(ModelParams(4), 3)
    g = GibbsTable.build(r, 1.3, perturbed, keep_table=True)
    P, J, viol = brute_law(r, 1.3, perturbed)
    np.testing.assert_allclose(g.overlap_law(), P, atol=1e-12)
    P2, J2 = g.star_law()
    np.testing.assert_allclose(P2, P, atol=1e-12)
    np.testing.assert_allclose(J2, J, atol=1e-12)
    assert g.violation_rate() == pytest.approx(viol, abs=1e-12)
    assert g.star_pattern() == pytest.approx(J[2, 1], abs=1e-12)


def test_product_and_table_paths_agree():
    r = DisorderRealization(ModelParams(12, delta=0.0), 5)
    a = GibbsTable.build(r, 2.0, True)
    b = GibbsTable.build(r, 2.0, True, keep_table=True)
    assert a.log_z == pytest.approx(b.log_z, rel=1e-13)
    np.testing.assert_allclose(a.overlap_law(), b.overlap_law(), atol=1e-13)
    assert a.violation_rate() == pytest.approx(b.violation_rate(), abs=1e-13)


def test_infinite_temperature():
    p = ModelParams(10)
    r = DisorderRealization(p, 1)
    assert log_partition(r, 0.0) == pytest.approx(p.N * LOG2, rel=1e-13)
    g = GibbsTable.build(r, 0.0)
    m = p.block_size
    np.testing.assert_allclose(g.overlap_law(),
                               [(1 - 1 / m) ** 2, (1 - 1 / m) / m, (1 - 1 / m) / m, 1 / m ** 2])


def test_free_energy_stable_at_low_temperature():
    r = DisorderRealization(ModelParams(12), 2)
    f = free_energy(r, 50.0)
    assert math.isfinite(f)
    assert f == pytest.approx(50.0 * r.table().max() / 12, rel=1e-3)


def test_analytic_free_energy():
    p = ModelParams(16)
    assert analytic_free_energy(2.0, p) == pytest.approx(2.3428956, abs=1e-7)
    assert analytic_free_energy(0.5, p) == pytest.approx(LOG2 + 0.5 * 0.25, abs=1e-12)


def test_sampled_replicas_follow_exact_law():
    r = DisorderRealization(ModelParams(10), 9)
    g = GibbsTable.build(r, 1.0, True, keep_table=True)
    labels = sample_replicas(g, 3, generator(1), 100_000)
    q = replica_overlaps(labels, r.params)
    emp = [np.mean(q[:, 0, 1] == v) for v in r.params.overlap_values]
    np.testing.assert_allclose(emp, g.overlap_law(), atol=0.006)
    assert violation_fraction(q).mean() == pytest.approx(g.violation_rate(), abs=0.006)
    single = sample_replicas(g, 2, generator(2))
    assert len(single) == 2 and isinstance(single[0], Configuration)


def test_profiles_sum_to_one():
    w = np.random.default_rng(0).random((8, 8))
    w /= w.sum()
    np.testing.assert_allclose(overlap_profiles(w).sum(axis=0), 1.0)
    P, J = star_law(w)
    np.testing.assert_allclose(J.sum(axis=1), P)


def test_histogram_and_observables():
    p = ModelParams(12)
    h = overlap_histogram(p, 2.0, True, n_seeds=20)
    assert len(h) == 4
    assert sum(e.mean for e in h) == pytest.approx(1.0, abs=1e-9)
    hs = overlap_histogram(p, 2.0, True, n_seeds=20, n_pairs=20_000)
    for a, b in zip(h, hs):
        assert abs(a.mean - b.mean) < 0.01
    q2 = overlap_observable(p, 2.0, {(1, 2): 2}, n_seeds=20)
    expect = sum(e.mean * v ** 2 for e, v in zip(h, p.overlap_values))
    assert q2.mean == pytest.approx(expect, rel=1e-10)
    one = overlap_observable(p, 2.0, {(1, 3): 0}, n_seeds=3)
    assert one.mean == 1.0


def test_violation_rate_zero_for_ultrametric_cases():
    # two replicas sharing block 1 only, third sharing block 2 only with one of them
    q = np.array([[[1.0, 0.6, 0.4], [0.6, 1.0, 0.0], [0.4, 0.0, 1.0]]])
    assert violation_fraction(q)[0] == 1.0
    q = np.array([[[1.0, 0.6, 0.0], [0.6, 1.0, 0.0], [0.0, 0.0, 1.0]]])
    assert violation_fraction(q)[0] == 0.0
    e = ultrametric_violation_rate(ModelParams(8), 2.0, True, n_seeds=5)
    assert 0.0 <= e.mean <= 1.0


def test_free_energy_gap_nonnegative_on_average():
    e = free_energy_gap(ModelParams(10), 1.0, n_seeds=200)
    assert e.mean > -3 * e.std_error

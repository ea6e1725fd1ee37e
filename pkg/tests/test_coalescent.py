import itertools
import math

import numpy as np
import pytest
from scipy import stats

from remlab.coalescent import (ABOVE_HORIZON, CoalescentTrajectory, assign_marks,
                               compose_ppp_coalescent, composition_overlap_law, mark_threshold,
                               merge_rate, pair_time, pair_time_law, sample_bs_coalescent,
                               sample_pd_points)
from remlab.model import ConfigError, ModelParams

P = ModelParams(16)


def test_merge_rates():
    assert merge_rate(2, 2) == pytest.approx(1.0)
    assert merge_rate(3, 2) == pytest.approx(0.5)
    assert merge_rate(3, 3) == pytest.approx(0.5)
    for b in (2, 5, 30):
        total = sum(math.comb(b, k) * merge_rate(b, k) for k in range(2, b + 1))
        assert total == pytest.approx(b - 1)


def test_two_leaves_exponential():
    rng = np.random.default_rng(0)
    t = np.array([sample_bs_coalescent(2, math.inf, rng).events[0][0] for _ in range(100_000)])
    assert abs(t.mean() - 1.0) < 3 * t.std() / math.sqrt(t.size)
    assert stats.kstest(t, "expon").statistic < 0.02


def test_three_leaves_first_event():
    rng = np.random.default_rng(1)
    trs = [sample_bs_coalescent(3, math.inf, rng) for _ in range(20_000)]
    t = np.array([tr.events[0][0] for tr in trs])
    assert abs(t.mean() - 0.5) < 3 * t.std() / math.sqrt(t.size)
    triple = np.mean([len(tr.events[0][1]) == 3 for tr in trs])
    assert triple == pytest.approx(0.25, abs=0.015)


def test_trajectory_invariants():
    rng = np.random.default_rng(2)
    tr = sample_bs_coalescent(30, math.inf, rng)
    assert tr.complete
    times = [s for s, _ in tr.events]
    assert all(a < b for a, b in zip(times, times[1:]))
    assert tr.partition_at(0.0) == [[i] for i in range(30)]
    prev = None
    for s in times:
        part = tr.partition_at(s)
        if prev is not None:
            # every old block sits inside a new one
            for blk in prev:
                assert any(set(blk) <= set(nb) for nb in part)
            assert len(part) < len(prev)
        prev = part
    assert tr.n_blocks_at(math.inf) == 1


def test_pair_time_replay_and_conventions():
    tr = CoalescentTrajectory(2, [(0.7, frozenset({0, 1}))], math.inf)
    assert pair_time(tr, 0, 1) == 0.7
    assert pair_time(tr, 1, 1) == 0.0
    with pytest.raises(ConfigError):
        pair_time(tr, 0, 2)
    short = CoalescentTrajectory(3, [], 0.1)
    assert pair_time(short, 0, 1) == ABOVE_HORIZON
    tr = sample_bs_coalescent(12, math.inf, np.random.default_rng(3))
    T = tr.merge_times()
    for i, j in itertools.combinations(range(12), 2):
        assert T[i, j] == pair_time(tr, i, j)


def test_exchangeability():
    # the law of the first merge time of leaves (0, 1) equals that of (3, 7)
    rng = np.random.default_rng(4)
    a, b = [], []
    for _ in range(4000):
        tr = sample_bs_coalescent(8, math.inf, rng)
        a.append(pair_time(tr, 0, 1))
        b.append(pair_time(tr, 3, 7))
    assert stats.ks_2samp(a, b).pvalue > 0.001
    law = pair_time_law(6, math.inf, 4000)
    assert abs(law[1].z_score(1.0)) < 4


def test_marks_ultrametric_and_threshold():
    rng = np.random.default_rng(5)
    t_star = mark_threshold(P.x1, P.x2)
    assert t_star == pytest.approx(0.5 * math.log(P.a1 / P.a2), rel=1e-12)
    for _ in range(5):
        tr = sample_bs_coalescent(25, t_star, rng)
        q = assign_marks(tr, t_star, P.a1)
        assert np.all(np.diag(q) == 1.0) and np.all(q == q.T)
        for i, j, k in itertools.product(range(25), repeat=3):
            assert q[i, j] >= min(q[i, k], q[k, j])
    q0 = assign_marks(sample_bs_coalescent(5, 1.0, rng), 0.0, P.a1)
    assert set(np.unique(q0)) <= {0.0, 1.0}
    with pytest.raises(ConfigError):
        assign_marks(sample_bs_coalescent(5, 0.1, rng), 0.5, P.a1)


def test_mark_a1_fraction_matches_cascade_conditional():
    # given distinct atoms, the cascade puts mark a1 with probability 1 - x1/x2
    rng = np.random.default_rng(6)
    t_star = mark_threshold(P.x1, P.x2)
    hits = [pair_time(sample_bs_coalescent(10, t_star, rng), 0, 1) <= t_star
            for _ in range(20000)]
    assert np.mean(hits) == pytest.approx(1 - P.x1 / P.x2, abs=0.01)


def test_pd_points_and_composition():
    rng = np.random.default_rng(7)
    pts, dm, dv = sample_pd_points(P.x2, 50, rng)
    assert np.all(np.diff(pts) < 0) and dm > 0 and dv > 0
    with pytest.raises(ConfigError):
        sample_pd_points(1.2, 10, rng)
    t_star = mark_threshold(P.x1, P.x2)
    tr = sample_bs_coalescent(52, t_star, rng)
    z = compose_ppp_coalescent(P.x2, 50, tr, t_star, P.a1, np.random.default_rng(8))
    assert z.values.sum() == pytest.approx(1.0, abs=1e-12)
    zt = compose_ppp_coalescent(P.x2, 50, tr, t_star, P.a1, np.random.default_rng(8),
                                with_dust=False)
    assert zt.values.sum() < 1.0
    with pytest.raises(ConfigError):
        compose_ppp_coalescent(P.x2, 60, tr, t_star, P.a1, rng)


def test_more_atoms_capture_more_mass():
    sums = []
    for n in (10, 100, 1000):
        pts, dm, _ = sample_pd_points(P.x2, n, np.random.default_rng(9))
        sums.append(pts.sum() / (pts.sum() + dm))
    assert sums[0] < sums[1] < sums[2] < 1


def test_composition_second_moment():
    law = composition_overlap_law(P, 2.0, 100, n_draws=3000, method="exact")
    assert abs(law[3].z_score(1 - P.x2)) < 4

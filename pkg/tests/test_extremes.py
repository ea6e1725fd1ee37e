import math

import numpy as np
import pytest

from remlab.extremes import (MarkedPointProcess, block_max_law, forbidden_pair_event,
                             forbidden_pair_rate, gumbel_cdf, localization_events,
                             localization_rate, scan_window, top_k_mark_law, top_k_shifted,
                             window_count, window_points, window_reference)
from remlab.model import ConfigError, DisorderRealization, ModelParams
from remlab.survey import gibbs_survey, survey_realization


def shifted_table(r, perturbed):
    c = r.centering
    a2 = c.aN2_delta if perturbed else c.aN2_delta - c.delta_aN2
    return r.table(perturbed) - c.aN1 - a2


def test_top_k_sorted_and_correct():
    r = DisorderRealization(ModelParams(12), 4)
    mpp = top_k_shifted(r, True, 30)
    full = np.sort(shifted_table(r, True).ravel())[::-1][:30]
    np.testing.assert_allclose(mpp.values, full, atol=1e-12)
    assert np.all(np.diff(mpp.values) <= 0)
    m = mpp.marks()
    assert np.allclose(np.diag(m), 1.0)
    i, j = 0, 1
    assert mpp.mark(i, j) == m[i, j]
    with pytest.raises(ConfigError):
        top_k_shifted(r, True, 0)


def test_marked_point_process_marks():
    mpp = MarkedPointProcess(np.zeros(4), np.array([[0, 0], [0, 1], [1, 0], [2, 2]]),
                             (1.0, 0.6, 0.4, 0.0))
    assert mpp.mark(0, 1) == 0.6 and mpp.mark(0, 2) == 0.4 and mpp.mark(0, 3) == 0.0
    assert mpp.pair_mark_counts() == {0.0: 4, 0.4: 1, 0.6: 1}


def test_window_points_bruteforce():
    p = ModelParams(12)
    for seed in range(5):
        r = DisorderRealization(p, seed)
        t = shifted_table(r, True)
        x1h = r.x1 - r.centering.aN1
        rest = t - x1h[:, None]
        inside = ((x1h[:, None] >= -1) & (x1h[:, None] <= 2) & (rest >= -1) & (rest <= 1))
        assert window_points(r, True, (-1, 2), (-1, 1)) == int(inside.sum())


@pytest.mark.parametrize("perturbed", [True, False])
def test_scan_window_bruteforce(perturbed):
    p = ModelParams(12)
    r = DisorderRealization(p, 7)
    t = shifted_table(r, perturbed)
    inside = (t >= -3) & (t <= 3)
    s = scan_window(r, perturbed, (-3, 3))
    np.testing.assert_array_equal(s.column_counts, inside.sum(axis=0))
    assert s.n_points == inside.sum()
    s2 = scan_window(r, perturbed, (-3, 3), table=r.table(perturbed))
    np.testing.assert_array_equal(s.column_counts, s2.column_counts)
    assert s.part1_range == pytest.approx(s2.part1_range)
    assert forbidden_pair_event(s) == bool(inside.sum(axis=0).max() >= 2)


def test_localization_events():
    r = DisorderRealization(ModelParams(12), 1)
    s = scan_window(r, True, (-3, 3))
    wide, narrow = localization_events(s, [(-100, 100), (0.0, 0.0)])
    assert not wide
    assert narrow == (s.n_points > 0)
    est = localization_rate(ModelParams(10), True, (-2, 2), [(-50, 50), (-1, 1)], n_seeds=10)
    assert est[0].mean == 0.0


def test_survey_matches_separate_paths():
    p = ModelParams(12)
    for pert in (True, False):
        r = DisorderRealization(p, 3)
        g, s = survey_realization(r, 2.0, pert, (-2, 2))
        s2 = scan_window(r, pert, (-2, 2))
        np.testing.assert_array_equal(s.column_counts, s2.column_counts)
    out = gibbs_survey(p, 2.0, True, (-2, 2), n_seeds=5)
    assert sum(out[k].mean for k in ("q0", "qa2", "qa1", "q1")) == pytest.approx(1.0)


def test_window_reference_values():
    p = ModelParams(16)
    bare = (1 - math.exp(-p.beta1)) / p.beta1 * (1 - math.exp(-p.beta2)) / p.beta2
    assert window_reference(p, (0, 1), (0, 1), prefactor=False) == pytest.approx(bare)
    assert window_reference(p, (0, 1), (0, 1)) == pytest.approx(bare * p.beta1 * p.beta2)
    with pytest.raises(ConfigError):
        window_reference(p, (0, math.inf), (0, 1))


def test_rates_in_unit_interval():
    p = ModelParams(10)
    e = forbidden_pair_rate(p, True, (-2, 2), n_seeds=20)
    assert 0 <= e.mean <= 1 and e.std_error >= 0
    w = window_count(p, True, n_seeds=20)
    assert w.estimate.mean >= 0
    for e in top_k_mark_law(p, True, 10, n_seeds=5):
        assert 0 <= e.mean <= 1


def test_gumbel_and_block_max():
    assert gumbel_cdf(0.0, 1.0) == pytest.approx(math.exp(-1))
    ks = block_max_law(ModelParams(12), 1, n_seeds=200)
    assert 0 <= ks.statistic <= 1 and ks.n == 200
    with pytest.raises(ConfigError):
        block_max_law(ModelParams(12), 3, n_seeds=10)

import itertools
import math

import numpy as np
import pytest

from remlab.cascade import (CascadeRealization, cascade_mark, cascade_overlap_law,
                            multiplicative_and_normalize, refine, sample_cascade, sample_ppp_exp)
from remlab.model import ConfigError, ModelParams

P = ModelParams(16)


def test_ppp_exp_counts():
    rng = np.random.default_rng(0)
    counts = [len(sample_ppp_exp(1.5, -1.0, rng)) for _ in range(20000)]
    assert np.mean(counts) == pytest.approx(math.exp(1.5), rel=0.02)
    x = sample_ppp_exp(1.5, -2.0, rng)
    assert np.all(np.diff(x) <= 0) and x.min() >= -2.0
    with pytest.raises(ConfigError):
        sample_ppp_exp(0.0, 0.0, rng)


def test_bound_and_weights():
    c = sample_cascade(P, 1e-3, np.random.default_rng(1))
    assert c.neglected_mass_bound <= 1e-3
    z = multiplicative_and_normalize(c)
    assert z.values.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(z.values >= 0) and np.all(np.diff(z.values) <= 0)
    atoms = multiplicative_and_normalize(c, with_dust=False)
    assert atoms.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_single_atom_weight_one():
    c = CascadeRealization(P, 2.0, 5.0, 5.0, np.array([3.0]), [np.array([10.0])])
    z = multiplicative_and_normalize(c, with_dust=False)
    assert z.values[0] == pytest.approx(1.0)


def test_shift_invariance():
    c = sample_cascade(P, 1e-2, np.random.default_rng(2))
    z = multiplicative_and_normalize(c, with_dust=False)
    shifted = CascadeRealization(P, c.beta, c.t + 3.7, c.L2, c.xi1 + 3.7, c.xi2)
    z2 = multiplicative_and_normalize(shifted, with_dust=False)
    np.testing.assert_allclose(z.values, z2.values, rtol=1e-12, atol=1e-15)


def test_marks_are_ultrametric():
    c = sample_cascade(P, 1e-2, np.random.default_rng(3))
    z = multiplicative_and_normalize(c, with_dust=False)
    n = min(len(z), 40)
    q = z.marks()[:n, :n]
    for i, j, k in itertools.product(range(n), repeat=3):
        assert q[i, j] >= min(q[i, k], q[k, j]) - 1e-12
    assert cascade_mark((1, 2), (1, 2), P) == 1.0
    assert cascade_mark((1, 2), (1, 3), P) == P.a1
    assert cascade_mark((1, 2), (0, 2), P) == 0.0


def test_refinement_extends_exactly():
    c = sample_cascade(P, 1e-2, np.random.default_rng(4))
    xi1, xi2 = c.xi1.copy(), [x.copy() for x in c.xi2]
    refine(c, c.t - 1.0, c.L2 - 0.5, np.random.default_rng(5))
    np.testing.assert_array_equal(c.xi1[:len(xi1)], xi1)
    for old, new in zip(xi2, c.xi2):
        np.testing.assert_array_equal(new[:len(old)], old)
    with pytest.raises(ConfigError):
        refine(c, c.t + 1.0, c.L2, np.random.default_rng(6))
    kept = c.child_cut(c.xi1)
    for s, ch, cut in zip(c.xi1, c.xi2, kept):
        assert np.all(ch >= cut - 1e-12)


def test_errors():
    with pytest.raises(ConfigError):
        sample_cascade(P, 1e-3, np.random.default_rng(0), beta=P.beta2)
    with pytest.raises(ConfigError):
        sample_cascade(P, 0.5)


def test_near_critical_and_frozen_limits():
    law = cascade_overlap_law(P, 1.33, 1e-2, n_draws=400, method="exact")
    assert law[2].mean < 0.05
    law = cascade_overlap_law(P, 100.0, 1e-2, n_draws=2000, method="exact")
    assert abs(law[2].mean - (1 - P.beta2 / 100)) < 3 * law[2].std_error + 1e-3


def test_two_replica_law_at_beta_two():
    law = cascade_overlap_law(P, 2.0, 1e-2, n_draws=3000, method="exact")
    expect = (P.x1, P.x2 - P.x1, 1 - P.x2)
    for e, v in zip(law[:3], expect):
        assert abs(e.z_score(v)) < 4
    assert sum(e.mean for e in law[:3]) == pytest.approx(1.0)

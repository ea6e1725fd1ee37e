import numpy as np
import pytest

from remlab.stats import Estimate, combined_z, mc_merge, merge_all


def test_merge_identity_and_pooling():
    x = np.random.default_rng(0).normal(size=10_000)
    full = Estimate.from_samples(x, "m")
    parts = [Estimate.from_samples(c, "m") for c in np.array_split(x, 7)]
    pooled = merge_all(parts)
    assert pooled.mean == pytest.approx(full.mean, rel=1e-12, abs=1e-15)
    assert pooled.std_error == pytest.approx(full.std_error, rel=1e-12)
    assert pooled.n_samples == full.n_samples
    assert mc_merge(full, Estimate.empty("m")) == full
    assert mc_merge(Estimate.empty(), full) == full


def test_merge_with_self():
    e = Estimate.from_samples(np.random.default_rng(1).normal(size=5000), "m")
    d = mc_merge(e, e)
    assert d.mean == pytest.approx(e.mean)
    assert d.std_error == pytest.approx(e.std_error / np.sqrt(2), rel=1e-3)


def test_merge_commutative_associative():
    rng = np.random.default_rng(2)
    a, b, c = (Estimate.from_samples(rng.normal(size=n), "m") for n in (10, 300, 77))
    ab_c = mc_merge(mc_merge(a, b), c)
    a_bc = mc_merge(a, mc_merge(b, c))
    assert ab_c.mean == pytest.approx(a_bc.mean, rel=1e-12)
    assert ab_c.std_error == pytest.approx(a_bc.std_error, rel=1e-12)
    assert mc_merge(a, b).mean == pytest.approx(mc_merge(b, a).mean, rel=1e-12)


def test_merge_rejects_mismatched_names():
    with pytest.raises(ValueError):
        mc_merge(Estimate.from_samples([1, 2], "x"), Estimate.from_samples([1, 2], "y"))


def test_z_scores():
    a = Estimate(1.0, 0.1, 10)
    assert a.z_score(0.5) == pytest.approx(5.0)
    assert combined_z(a, Estimate(1.0, 0.1, 10)) == 0.0

"""Monte-Carlo moment probes for the distribution menu."""
import numpy as np
import pytest

from momentsid.lds import DISTRIBUTION_KINDS, DistributionSpec
from momentsid.probes import (
    AntiConcentrationResult,
    anti_concentration_probe,
    hyper_ratio,
    hypercontractivity_probe,
)


def test_hyper_ratio_hand_case():
    """Two symmetric points give fourth moment equal to squared variance."""
    samples = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    dirs = np.array([[1.0]])
    assert hyper_ratio(samples, dirs) == pytest.approx(1.0)


def test_hyper_ratio_scaling_invariance():
    rng = np.random.default_rng(0)
    samples = rng.standard_normal((5000, 2))
    dirs = np.array([[1.0, 0.0], [0.0, 1.0]])
    base = hyper_ratio(samples, dirs)
    scaled = hyper_ratio(3.0 * samples, dirs)
    assert scaled == pytest.approx(base, rel=1e-12)


def test_hyper_ratio_rejects_degenerate_direction():
    samples = np.zeros((100, 2))
    samples[:, 0] = np.random.default_rng(1).standard_normal(100)
    with pytest.raises(ValueError):
        hyper_ratio(samples, np.array([[0.0, 1.0]]))


def test_hypercontractivity_gaussian_near_three():
    spec = DistributionSpec.menu("gaussian", 2, 1.0)
    k_hat = hypercontractivity_probe(spec, 25, 200_000, seed=3)
    assert 2.7 < k_hat < 3.3


def test_hypercontractivity_explicit_directions():
    spec = DistributionSpec.menu("rademacher", 2, 1.0)
    # along a coordinate axis the rademacher ratio is exactly 1
    k_axis = hypercontractivity_probe(spec, np.array([[1.0, 0.0]]), 50_000, seed=4)
    assert k_axis == pytest.approx(1.0)
    # the diagonal direction mixes two signs and pushes the ratio toward 2
    diag = np.array([[1.0, 1.0]]) / np.sqrt(2.0)
    k_diag = hypercontractivity_probe(spec, diag, 50_000, seed=4)
    assert 1.8 < k_diag < 2.2


def test_hypercontractivity_menu_within_declared_K():
    for kind in DISTRIBUTION_KINDS:
        spec = DistributionSpec.menu(kind, 3, 1.0)
        k_hat = hypercontractivity_probe(spec, 50, 100_000, seed=7)
        assert k_hat <= spec.K * 1.1, (kind, k_hat, spec.K)


def test_probe_determinism():
    spec = DistributionSpec.menu("uniform-box", 2, 1.0)
    a = hypercontractivity_probe(spec, 10, 5000, seed=9)
    b = hypercontractivity_probe(spec, 10, 5000, seed=9)
    assert a == b


def test_anti_concentration_gaussian():
    spec = DistributionSpec.menu("gaussian", 1, 1.0)
    betas = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    res = anti_concentration_probe(spec, betas, 200_000, seed=0)
    assert res.bound() == pytest.approx(1.0 - 1.0 / 30.0)
    # the widest hit sits at beta = 0: Pr[|z| <= 0.1] is about 0.0797
    assert res.max_probability == pytest.approx(0.0797, abs=0.005)
    assert res.probabilities.argmax() == 2
    assert res.max_probability <= res.bound()


def test_anti_concentration_rademacher_hits_half():
    spec = DistributionSpec.menu("rademacher", 1, 1.0)
    res = anti_concentration_probe(spec, [1.0], 100_000, seed=1)
    assert res.max_probability == pytest.approx(0.5, abs=0.01)
    assert res.max_probability <= res.bound()


def test_anti_concentration_requires_scalar_unit_variance():
    with pytest.raises(ValueError):
        anti_concentration_probe(DistributionSpec.menu("gaussian", 2, 1.0),
                                 [0.0], 1000, seed=0)
    with pytest.raises(ValueError):
        anti_concentration_probe(DistributionSpec.menu("gaussian", 1, 0.25),
                                 [0.0], 1000, seed=0)
    with pytest.raises(ValueError):
        anti_concentration_probe(DistributionSpec.menu("gaussian", 1, 1.0),
                                 [], 1000, seed=0)


def test_anti_concentration_result_fields():
    res = AntiConcentrationResult(
        beta_grid=np.array([0.0]),
        probabilities=np.array([0.1]),
        max_probability=0.1,
        K=6.0,
    )
    assert res.bound() == pytest.approx(1.0 - 1.0 / 60.0)

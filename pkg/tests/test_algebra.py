"""Structured-matrix helpers: stacks, annihilating polynomials, potentials."""
import numpy as np
import pytest

from momentsid.algebra import (
    condition_report,
    controllability_matrix,
    matrix_poly_F,
    observability_matrix,
    potential,
    power_norm_check,
    spectral_radius,
)
from momentsid.config import jordan_integrator
from momentsid.lds import SystemMatrices
from momentsid.stabilizer import oracle_alpha


def _random_system(seed, n=3, m=2, p=2, rho=0.9):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    A *= rho / spectral_radius(A)
    return SystemMatrices(
        A=A,
        B=rng.standard_normal((n, p)),
        C=rng.standard_normal((m, n)),
        D=rng.standard_normal((m, p)),
    )


def test_observability_stack_rows():
    sys1 = _random_system(0)
    O = observability_matrix(sys1, 3)
    assert O.shape == (6, 3)
    np.testing.assert_array_equal(O[:2], sys1.C)
    np.testing.assert_allclose(O[2:4], sys1.C @ sys1.A, atol=1e-14)
    np.testing.assert_allclose(O[4:6], sys1.C @ sys1.A @ sys1.A, atol=1e-14)


def test_controllability_stack_columns():
    sys1 = _random_system(1)
    Q = controllability_matrix(sys1, 3)
    assert Q.shape == (3, 6)
    np.testing.assert_array_equal(Q[:, :2], sys1.B)
    np.testing.assert_allclose(Q[:, 2:4], sys1.A @ sys1.B, atol=1e-14)
    np.testing.assert_allclose(Q[:, 4:6], sys1.A @ sys1.A @ sys1.B, atol=1e-14)


def test_spectral_radius_known_values():
    theta = 1.1
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    assert abs(spectral_radius(rot) - 1.0) < 1e-12
    assert abs(spectral_radius(0.5 * np.eye(3)) - 0.5) < 1e-12
    nilpotent = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert spectral_radius(nilpotent) < 1e-12


def test_matrix_poly_partials_against_direct_formula():
    """Partial evaluations match an independently coded definition."""
    sys1 = _random_system(2)
    rng = np.random.default_rng(3)
    s, k = 2, 5
    alpha = rng.standard_normal((s, sys1.m, sys1.m))
    F, partials = matrix_poly_F(sys1, alpha, k)
    assert len(partials) == k + s + 1
    powers = [sys1.C @ np.linalg.matrix_power(sys1.A, i) for i in range(k + s + 1)]
    for i in range(k + s + 1):
        expect = powers[i].copy()
        if i > k:
            for j in range(1, i - k + 1):
                expect = expect - alpha[j - 1] @ powers[i - k - j]
        np.testing.assert_allclose(partials[i], expect, atol=1e-10)
    np.testing.assert_allclose(F, partials[k + s], atol=0)


def test_matrix_poly_zero_alpha():
    sys1 = _random_system(4)
    alpha = np.zeros((2, sys1.m, sys1.m))
    F, partials = matrix_poly_F(sys1, alpha, 4)
    np.testing.assert_allclose(
        F, sys1.C @ np.linalg.matrix_power(sys1.A, 6), atol=1e-12
    )
    for i, P in enumerate(partials):
        np.testing.assert_allclose(
            P, sys1.C @ np.linalg.matrix_power(sys1.A, i), atol=1e-12
        )


def test_oracle_alpha_annihilates_jordan_family():
    """The least-squares coefficients drive F to exactly zero on the
    end-to-end demonstration family, whose depth-2 stack spans R^3."""
    sys1 = jordan_integrator()
    for k in (2, 4, 8):
        alpha = oracle_alpha(sys1, k, 2)
        F, _ = matrix_poly_F(sys1, alpha.blocks, k)
        assert np.max(np.abs(F)) < 1e-8


def test_potential_matches_direct_sum():
    sys1 = _random_system(5)
    rng = np.random.default_rng(6)
    alpha = rng.standard_normal((1, sys1.m, sys1.m))
    k, l = 3, 7
    val = potential(sys1, alpha, k, l)
    F, _ = matrix_poly_F(sys1, alpha, k)
    G = sum(
        np.sum((F @ np.linalg.matrix_power(sys1.A, i) @ sys1.B) ** 2)
        for i in range(l + 1)
    )
    H = sum(
        np.sum((F @ np.linalg.matrix_power(sys1.A, i)) ** 2) for i in range(l + 1)
    )
    assert abs(val.G - G) < 1e-9 * max(1.0, G)
    assert abs(val.H - H) < 1e-9 * max(1.0, H)
    assert val.horizon == l


def test_potential_vanishes_for_annihilating_alpha():
    sys1 = jordan_integrator()
    alpha = oracle_alpha(sys1, 4, 2)
    val = potential(sys1, alpha.blocks, 4, 50)
    assert val.G < 1e-12
    assert val.H < 1e-12


def test_power_norm_check_small_exponent():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((3, 3))
    A *= 0.95 / spectral_radius(A)
    chk = power_norm_check(A, 8)
    direct = np.linalg.norm(np.linalg.matrix_power(A, 8), 2)
    assert abs(chk.actual - direct) < 1e-9 * max(1.0, direct)
    assert chk.log_actual <= chk.log_bound
    n, L = 3, 8
    expect_bound = np.log(n) + n * np.log(2.0 * (1.0 + np.linalg.norm(A, 2)) * L)
    assert abs(chk.log_bound - expect_bound) < 1e-12


def test_power_norm_check_marginal_jordan():
    """A marginally stable Jordan block grows polynomially; the certificate
    must still dominate it at L = 1000."""
    A = np.eye(4) + np.diag(np.ones(3), 1)
    chk = power_norm_check(A, 1000)
    assert chk.log_actual <= chk.log_bound
    # the actual growth is around L^3 / 6, far below the certificate
    assert chk.log_actual > 3.0 * np.log(1000.0) - np.log(7.0)


def test_power_norm_check_rejects_unstable():
    with pytest.raises(ValueError):
        power_norm_check(1.5 * np.eye(2), 10)


def test_condition_report_flags():
    good = SystemMatrices(
        A=np.eye(2), B=np.eye(2), C=np.eye(2), D=np.zeros((2, 2))
    )
    rep = condition_report(good, 2, kappa=10.0)
    assert rep.well_behaved
    assert not rep.degenerate
    assert rep.spectral_radius == pytest.approx(1.0)

    flat = SystemMatrices(
        A=np.eye(2),
        B=np.eye(2),
        C=np.array([[1.0, 0.0], [0.0, 0.0]]),
        D=np.zeros((2, 2)),
    )
    rep2 = condition_report(flat, 2, kappa=10.0)
    assert rep2.degenerate
    assert not rep2.well_behaved


def test_condition_report_kappa_threshold():
    sys1 = jordan_integrator()
    loose = condition_report(sys1, 2, kappa=np.inf)
    assert not loose.degenerate
    tight = condition_report(sys1, 2, kappa=1.0 + 1e-9)
    assert not tight.well_behaved

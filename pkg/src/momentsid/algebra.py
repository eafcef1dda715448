"""Structural operators: observability/controllability stacks, conditioning,
the stabilizing matrix polynomial, its potentials, and power-norm certificates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .lds import SystemMatrices

#: spectral-radius slack used by every marginal-stability check
RHO_TOL = 1e-9


def observability_matrix(system: SystemMatrices, s: int) -> np.ndarray:
    """Stack [C; CA; ...; C A^{s-1}], shape (s*m, n)."""
    if s < 1:
        raise ValueError("s must be >= 1")
    blocks = []
    M = system.C
    for _ in range(s):
        blocks.append(M)
        M = M @ system.A
    return np.vstack(blocks)


def controllability_matrix(system: SystemMatrices, s: int) -> np.ndarray:
    """Stack [B, AB, ..., A^{s-1} B], shape (n, s*p)."""
    if s < 1:
        raise ValueError("s must be >= 1")
    blocks = []
    M = system.B
    for _ in range(s):
        blocks.append(M)
        M = system.A @ M
    return np.hstack(blocks)


def spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(A, float)))))


@dataclass(frozen=True)
class ConditionReport:
    """Conditioning summary used by the well-behavedness verdict."""

    s: int
    kappa: float
    spectral_radius: float
    norm_B: float
    norm_C: float
    sigma_max_obs: float   # sigma_max of the depth-2s observability stack
    sigma_min_obs: float   # sigma_min of the depth-s stack
    sigma_max_ctrl: float
    sigma_min_ctrl: float
    kappa_obs: float
    kappa_ctrl: float
    well_behaved: bool
    degenerate: bool


def condition_report(system: SystemMatrices, s: int, kappa: float) -> ConditionReport:
    """Evaluate the well-behavedness conditions at depth ``s`` against ``kappa``.

    The verdict requires ||B|| >= 1, ||C|| >= 1, spectral radius <= 1 (with
    RHO_TOL slack), and both conditioning ratios
    sigma_max(depth 2s) / sigma_min(depth s) <= kappa.  A rank-deficient stack
    makes the ratio infinite and flags the report degenerate rather than
    raising.
    """
    O_s = observability_matrix(system, s)
    O_2s = observability_matrix(system, 2 * s)
    Q_s = controllability_matrix(system, s)
    Q_2s = controllability_matrix(system, 2 * s)

    smin_o = float(np.linalg.svd(O_s, compute_uv=False)[-1])
    smax_o = float(np.linalg.svd(O_2s, compute_uv=False)[0])
    smin_c = float(np.linalg.svd(Q_s, compute_uv=False)[-1])
    smax_c = float(np.linalg.svd(Q_2s, compute_uv=False)[0])

    kappa_obs = smax_o / smin_o if smin_o > 0 else np.inf
    kappa_ctrl = smax_c / smin_c if smin_c > 0 else np.inf
    degenerate = not (np.isfinite(kappa_obs) and np.isfinite(kappa_ctrl))

    rho = spectral_radius(system.A)
    norm_B = float(np.linalg.norm(system.B, 2))
    norm_C = float(np.linalg.norm(system.C, 2))
    well = (
        norm_B >= 1.0
        and norm_C >= 1.0
        and rho <= 1.0 + RHO_TOL
        and kappa_obs <= kappa
        and kappa_ctrl <= kappa
    )
    return ConditionReport(
        s=int(s),
        kappa=float(kappa),
        spectral_radius=rho,
        norm_B=norm_B,
        norm_C=norm_C,
        sigma_max_obs=smax_o,
        sigma_min_obs=smin_o,
        sigma_max_ctrl=smax_c,
        sigma_min_ctrl=smin_c,
        kappa_obs=float(kappa_obs),
        kappa_ctrl=float(kappa_ctrl),
        well_behaved=bool(well),
        degenerate=degenerate,
    )


def _alpha_array(alpha, m: int) -> np.ndarray:
    blocks = getattr(alpha, "blocks", alpha)
    arr = np.asarray(blocks, dtype=float)
    if arr.ndim != 3 or arr.shape[1:] != (m, m):
        raise ValueError(
            f"alpha must be s coefficient matrices of shape ({m}, {m}); got {arr.shape}"
        )
    return arr


def matrix_poly_F(
    system: SystemMatrices, alpha, k: int
) -> Tuple[np.ndarray, list]:
    """Stabilizing polynomial F and its partial evaluations.

    With s coefficient matrices alpha_1..alpha_s,

        F = C A^{s+k} - sum_{j=1}^{s} alpha_j C A^{s-j}

    and the partial list holds, for i = 0..k+s,

        partial[i] = C A^i                                        (i <= k)
        partial[i] = C A^i - sum_{j=1}^{i-k} alpha_j C A^{i-k-j}  (i > k)

    so partial[k+s] equals F.  These are exactly the moving-average weights of
    the stabilized observation's leading window.

    Returns
    -------
    (F, partials) : F of shape (m, n), list of k+s+1 arrays.
    """
    alpha = _alpha_array(alpha, system.m)
    s = alpha.shape[0]
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    CA = [system.C]
    for _ in range(k + s):
        CA.append(CA[-1] @ system.A)
    partials = []
    for i in range(k + s + 1):
        if i <= k:
            partials.append(CA[i])
        else:
            term = CA[i].copy()
            for j in range(1, i - k + 1):
                term -= alpha[j - 1] @ CA[i - k - j]
            partials.append(term)
    return partials[k + s], partials


@dataclass(frozen=True)
class PotentialValue:
    """Accumulated squared Frobenius mass of F A^i B (G) and F A^i (H)."""

    G: float
    H: float
    horizon: int


def potential(system: SystemMatrices, alpha, k: int, l: int) -> PotentialValue:
    """Potentials G_{alpha,l} = sum_{i=0}^{l} ||F A^i B||_F^2 and the
    B-free analogue H_{alpha,l}.

    G is exactly the trace of the covariance of the stabilized observation's
    tail driven by inputs; H plays the same role for process noise.
    """
    if l < 0:
        raise ValueError("l must be nonnegative")
    F, _ = matrix_poly_F(system, alpha, k)
    G = 0.0
    H = 0.0
    M = F
    for _ in range(l + 1):
        G += float(np.sum((M @ system.B) ** 2))
        H += float(np.sum(M**2))
        M = M @ system.A
    return PotentialValue(G=G, H=H, horizon=int(l))


@dataclass(frozen=True)
class PowerNormCheck:
    """Measured operator norm of A^L against the marginal-stability bound."""

    actual: float
    bound: float
    log_actual: float
    log_bound: float


def power_norm_check(A: np.ndarray, L: int) -> PowerNormCheck:
    """Compare ||A^L||_2 with the certificate n * (2 (1 + ||A||) L)^n.

    Requires every eigenvalue magnitude <= 1 (tolerance RHO_TOL); raises
    otherwise.  Both sides are computed in log space: the power by repeated
    squaring with running rescaling, the bound directly, so the comparison
    stays meaningful far beyond float overflow.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    L = int(L)
    if L < 1:
        raise ValueError("L must be >= 1")
    if spectral_radius(A) > 1.0 + RHO_TOL:
        raise ValueError("power_norm_check requires spectral radius <= 1")

    # scaled binary powering: (M, c) represents M * e^c
    def _rescale(M: np.ndarray, c: float) -> Tuple[np.ndarray, float]:
        scale = float(np.max(np.abs(M)))
        if scale == 0.0:
            return M, c
        return M / scale, c + np.log(scale)

    result = np.eye(n)
    rlog = 0.0
    base, blog = _rescale(A.copy(), 0.0)
    e = L
    while e > 0:
        if e & 1:
            result, rlog = _rescale(result @ base, rlog + blog)
        e >>= 1
        if e:
            base, blog = _rescale(base @ base, 2.0 * blog)

    norm = float(np.linalg.norm(result, 2))
    log_actual = -np.inf if norm == 0.0 else float(np.log(norm) + rlog)
    normA = float(np.linalg.norm(A, 2))
    log_bound = float(np.log(n) + n * np.log(2.0 * (1.0 + normA) * L))
    with np.errstate(over="ignore"):
        actual = float(np.exp(log_actual))
        bound = float(np.exp(log_bound))
    return PowerNormCheck(
        actual=actual, bound=bound, log_actual=log_actual, log_bound=log_bound
    )

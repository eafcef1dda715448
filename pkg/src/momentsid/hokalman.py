"""Balanced realization of impulse-response blocks (Ho-Kalman with a rank-n
SVD truncation, so it tolerates moment-estimation noise) and similarity-aware
comparison of a recovered system against ground truth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .algebra import observability_matrix
from .lds import SystemMatrices
from .markov import MarkovEstimate, true_markov

# relative singular-value cutoff for the pseudo-inverses in the A-step
_PINV_RCOND = 1e-10
# similarity transforms worse conditioned than this are alignment failures
_COND_LIMIT = 1e8


@dataclass(frozen=True, eq=False)
class HankelPair:
    """Block Hankel matrix of X_1..X_{2s} with its two shifted views."""

    H: np.ndarray  # (s*m, (s+1)*p)
    s: int
    m: int
    p: int

    @property
    def H_minus(self) -> np.ndarray:
        """First s block columns: equals O_s C_s for an exact system."""
        return self.H[:, : self.s * self.p]

    @property
    def H_plus(self) -> np.ndarray:
        """Last s block columns: equals O_s A C_s for an exact system."""
        return self.H[:, self.p :]


@dataclass(frozen=True, eq=False)
class Realization:
    """Recovered (A, B, C, D) with the balanced factors that produced it.

    degenerate is set when the n-th singular value of the minus Hankel falls
    below the pseudo-inverse cutoff; the matrices are still the best effort.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    O_hat: np.ndarray  # (s*m, n) balanced observability factor
    Q_hat: np.ndarray  # (n, s*p) balanced controllability factor
    singular_values: np.ndarray  # full spectrum of the minus Hankel
    s: int
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def system(self) -> SystemMatrices:
        return SystemMatrices(A=self.A, B=self.B, C=self.C, D=self.D)


def hankel_from_markov(blocks: Union[MarkovEstimate, np.ndarray], s: int) -> HankelPair:
    """Arrange X_1..X_{2s} into the s-by-(s+1) block Hankel matrix."""
    if isinstance(blocks, MarkovEstimate):
        blocks = blocks.blocks
    blocks = np.asarray(blocks, float)
    if blocks.ndim != 3:
        raise ValueError("blocks must be (k+1, m, p)")
    s = int(s)
    if s < 1:
        raise ValueError("s must be positive")
    if blocks.shape[0] < 2 * s + 1:
        raise ValueError(
            f"need {2 * s + 1} impulse-response blocks for depth {s}, "
            f"got {blocks.shape[0]}"
        )
    _, m, p = blocks.shape
    H = np.empty((s * m, (s + 1) * p))
    for i in range(s):
        for j in range(s + 1):
            H[i * m : (i + 1) * m, j * p : (j + 1) * p] = blocks[i + j + 1]
    return HankelPair(H=H, s=s, m=m, p=p)


def _deterministic_svd(M: np.ndarray):
    """SVD with each left singular vector's largest-magnitude entry positive."""
    U, sv, Vt = np.linalg.svd(M, full_matrices=False)
    for i in range(U.shape[1]):
        col = U[:, i]
        j = int(np.argmax(np.abs(col)))
        if col[j] < 0:
            U[:, i] = -col
            Vt[i, :] = -Vt[i, :]
    return U, sv, Vt


def ho_kalman(
    estimate: Union[MarkovEstimate, np.ndarray], s: int, n: int
) -> Realization:
    """Rank-n realization of estimated impulse-response blocks.

    The minus Hankel is truncated to its top n singular directions, the
    balanced square-root factors give C (first block row) and B (first block
    column), and A solves the shift equation through pseudo-inverses of the
    factors.  With exact blocks of an order-n system this recovers (A, B, C, D)
    up to similarity; with noisy blocks the truncation keeps the recovery
    stable.
    """
    blocks = estimate.blocks if isinstance(estimate, MarkovEstimate) else estimate
    blocks = np.asarray(blocks, float)
    n, s = int(n), int(s)
    if n < 1:
        raise ValueError("state dimension must be positive")
    pair = hankel_from_markov(blocks, s)
    m, p = pair.m, pair.p
    if n > min(pair.H_minus.shape):
        raise ValueError(
            f"rank {n} exceeds the {pair.H_minus.shape} minus-Hankel dimensions"
        )
    U, sv, Vt = _deterministic_svd(pair.H_minus)
    degenerate = bool(sv[n - 1] <= _PINV_RCOND * sv[0])
    root = np.sqrt(sv[:n])
    O_hat = U[:, :n] * root
    Q_hat = root[:, None] * Vt[:n, :]
    C_hat = O_hat[:m, :]
    B_hat = Q_hat[:, :p]
    A_hat = np.linalg.pinv(O_hat, rcond=_PINV_RCOND) @ pair.H_plus @ np.linalg.pinv(
        Q_hat, rcond=_PINV_RCOND
    )
    return Realization(
        A=A_hat,
        B=B_hat,
        C=C_hat,
        D=blocks[0].copy(),
        O_hat=O_hat,
        Q_hat=Q_hat,
        singular_values=sv,
        s=s,
        degenerate=degenerate,
    )


def realization_from_system(system: SystemMatrices, s: int) -> Realization:
    """Balanced realization of a known system from its exact blocks."""
    return ho_kalman(true_markov(system, 2 * s), s=s, n=system.n)


def markov_distance(
    sys_a: SystemMatrices, sys_b: SystemMatrices, horizon: int
) -> float:
    """Sum over j = 0..horizon of ||X_j(sys_a) - X_j(sys_b)||_F.

    Similarity-invariant; zero exactly when the two systems share all
    impulse-response blocks up to the horizon.  State dimensions may differ,
    input/output dimensions may not.
    """
    if (sys_a.m, sys_a.p) != (sys_b.m, sys_b.p):
        raise ValueError(
            f"output/input dimensions differ: {(sys_a.m, sys_a.p)} vs "
            f"{(sys_b.m, sys_b.p)}"
        )
    horizon = int(horizon)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    xa = true_markov(sys_a, horizon)
    xb = true_markov(sys_b, horizon)
    return float(sum(np.linalg.norm(xa[j] - xb[j]) for j in range(horizon + 1)))


def realization_error_bound(n: int, dist: float) -> float:
    """Coarse scale on parameter error after alignment, 5 sqrt(n * dist)."""
    return 5.0 * math.sqrt(max(int(n), 0) * max(float(dist), 0.0))


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Parameter residuals after the best similarity transform found.

    markov_error aggregates the impulse-response mismatch over lags 0..2s and
    does not depend on the transform; the per-matrix residuals do.  When no
    candidate transform is invertible to within the condition limit, the
    residuals come from a pseudo-inverse and alignment_failed is set.
    """

    markov_error: float
    r_A: float
    r_B: float
    r_C: float
    r_D: float
    U: np.ndarray
    alignment_failed: bool = False

    @property
    def total(self) -> float:
        return float(
            math.sqrt(self.r_A**2 + self.r_B**2 + self.r_C**2 + self.r_D**2)
        )


def _joint_similarity(truth: SystemMatrices, real: Realization) -> np.ndarray:
    """Least-squares U for A U = U A_hat, U B_hat = B, C U = C_hat jointly."""
    n = truth.n
    eye = np.eye(n)
    rows = [
        np.kron(eye, truth.A) - np.kron(real.A.T, eye),
        np.kron(real.B.T, eye),
        np.kron(eye, truth.C),
    ]
    rhs = [
        np.zeros(n * n),
        truth.B.reshape(-1, order="F"),
        real.C.reshape(-1, order="F"),
    ]
    sol = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)[0]
    return sol.reshape(n, n, order="F")


def align_similarity(truth: SystemMatrices, real: Realization) -> EvalReport:
    """Residuals of the recovered system against truth, up to similarity.

    A first transform comes from regressing the estimated balanced
    observability factor onto the true depth-s observability matrix; a joint
    linear refinement then balances the A, B, C equations simultaneously.
    Residuals are reported under the convention truth ~ (U A U^{-1}, U B,
    C U^{-1}) applied to the realization; the candidate with the smaller
    total residual wins.
    """
    if real.n != truth.n:
        raise ValueError(f"state dimensions differ: {truth.n} vs {real.n}")
    merr = markov_distance(truth, real.system, 2 * real.s)
    O_truth = observability_matrix(truth, real.s)
    U0 = np.linalg.lstsq(O_truth, real.O_hat, rcond=None)[0]
    U1 = _joint_similarity(truth, real)
    best = None
    for U in (U1, U0):
        if not np.all(np.isfinite(U)) or np.linalg.cond(U) > _COND_LIMIT:
            continue
        report = _residual_report(truth, real, U, merr, failed=False)
        if best is None or report.total < best.total:
            best = report
    if best is not None:
        return best
    # neither transform is trustworthy; report pseudo-inverse residuals and
    # flag the failure rather than raising
    fallback = U1 if np.all(np.isfinite(U1)) else U0
    return _residual_report(truth, real, fallback, merr, failed=True)


def _residual_report(
    truth: SystemMatrices,
    real: Realization,
    U: np.ndarray,
    markov_error: float,
    failed: bool,
) -> EvalReport:
    Uinv = np.linalg.pinv(U)
    A_al = U @ real.A @ Uinv
    C_al = real.C @ Uinv
    B_al = U @ real.B
    return EvalReport(
        markov_error=markov_error,
        r_A=float(np.linalg.norm(truth.A - A_al)),
        r_B=float(np.linalg.norm(truth.B - B_al)),
        r_C=float(np.linalg.norm(truth.C - C_al)),
        r_D=float(np.linalg.norm(truth.D - real.D)),
        U=U,
        alignment_failed=failed,
    )

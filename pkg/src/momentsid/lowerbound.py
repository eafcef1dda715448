"""Constructions of nearly unobservable (or nearly uncontrollable) systems
whose input/output path distributions are provably close while the parameters
stay far apart, together with the exact joint path covariance that certifies
the closeness.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hokalman import align_similarity, markov_distance, realization_from_system
from .lds import SystemMatrices
from .rng import substream

_KINDS = ("unobservable", "uncontrollable")
# stream id for the construction's random basis draws
_STREAM_BUILD = 31
# absolute float slack when verifying the suppressed-direction invariant
_VERIFY_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class UnobservablePair:
    """A system with a direction v the outputs (or inputs) barely see.

    kind "unobservable":   ||C A^s v|| <= delta for all s
    kind "uncontrollable": ||(A^s B)^T v|| <= delta for all s
    """

    sys: SystemMatrices
    v: np.ndarray
    delta: float
    kind: str

    def __post_init__(self):
        v = np.asarray(self.v, float).reshape(-1)
        if v.shape[0] != self.sys.n:
            raise ValueError("v must have the state dimension")
        if abs(np.linalg.norm(v) - 1.0) > 1e-8:
            raise ValueError("v must be a unit vector")
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "delta", float(self.delta))


def verify_pair(pair: UnobservablePair, s_max: int = 50) -> float:
    """Largest suppressed-direction leakage over powers s = 0..s_max."""
    A, B, C = pair.sys.A, pair.sys.B, pair.sys.C
    worst = 0.0
    if pair.kind == "unobservable":
        w = pair.v.copy()
        for _ in range(s_max + 1):
            worst = max(worst, float(np.linalg.norm(C @ w)))
            w = A @ w
    else:
        w = pair.v.copy()
        for _ in range(s_max + 1):
            worst = max(worst, float(np.linalg.norm(B.T @ w)))
            w = A.T @ w
    return worst


def _haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    G = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.diag(R))


def _complete_basis(rng: np.random.Generator, v: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of unit vector v, shape (n, n-1)."""
    n = v.shape[0]
    M = rng.standard_normal((n, n))
    M[:, 0] = v
    Q, _ = np.linalg.qr(M)
    return Q[:, 1:]


def build_unobservable(
    n: int,
    delta: float,
    lam: float,
    seed: int,
    kind: str = "unobservable",
) -> UnobservablePair:
    """A hard instance: v is invariant under A (A v = lam v) and the output
    map attenuates it to delta, so ||C A^s v|| = |lam|^s delta for every s.

    A acts as a random rotation on the complement of v, which keeps the
    spectral radius at 1 and leaves plenty of room for generic perturbation
    directions.  B is square (p = n) and D = 0.  The uncontrollable kind is
    the transposed construction (inputs barely reach v instead).
    """
    n = int(n)
    if n < 3:
        raise ValueError("need n >= 3 for the genericity arguments downstream")
    delta = float(delta)
    if not 0.0 <= delta < 0.1:
        raise ValueError("delta must lie in [0, 0.1)")
    lam = float(lam)
    if abs(lam) > 1.0:
        raise ValueError("lam must lie in [-1, 1]")
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")

    rng = substream(seed, _STREAM_BUILD)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    Q = _complete_basis(rng, v)
    R = _haar_orthogonal(rng, n - 1)
    A = lam * np.outer(v, v) + Q @ R @ Q.T

    if kind == "unobservable":
        C = np.vstack([delta * v[None, :], Q.T])
        B = np.eye(n)
    else:
        B = np.hstack([delta * v[:, None], Q])
        C = np.eye(n)
    D = np.zeros((C.shape[0], B.shape[1]))
    pair = UnobservablePair(
        sys=SystemMatrices(A=A, B=B, C=C, D=D), v=v, delta=delta, kind=kind
    )
    worst = verify_pair(pair, s_max=50)
    if worst > delta + _VERIFY_SLACK:
        raise ValueError(
            f"construction leaked {worst:.3e} along v, above delta={delta:.3e}"
        )
    return pair


def perturbed_system(pair: UnobservablePair, u_vec: np.ndarray) -> SystemMatrices:
    """Rank-one perturbation along the suppressed direction.

    unobservable:   B' = B + v u^T   (each impulse block moves by at most
                                      ||C A^j v||*||u|| <= delta*||u||)
    uncontrollable: C' = C + u v^T
    """
    u_vec = np.asarray(u_vec, float).reshape(-1)
    sys = pair.sys
    if pair.kind == "unobservable":
        if u_vec.shape[0] != sys.p:
            raise ValueError(f"u_vec must have length p={sys.p}")
        return SystemMatrices(
            A=sys.A, B=sys.B + np.outer(pair.v, u_vec), C=sys.C, D=sys.D
        )
    if u_vec.shape[0] != sys.m:
        raise ValueError(f"u_vec must have length m={sys.m}")
    return SystemMatrices(
        A=sys.A, B=sys.B, C=sys.C + np.outer(u_vec, pair.v), D=sys.D
    )


def toeplitz_P(system: SystemMatrices, T: int) -> np.ndarray:
    """Block lower-triangular path map from inputs (u_0..u_T) to the input
    contribution of outputs (y_0..y_T): block (i, j) = C A^{i-j-1} B for
    i > j, zero on and above the diagonal.
    """
    T = int(T)
    if T < 0:
        raise ValueError("T must be nonnegative")
    m, p = system.m, system.p
    P = np.zeros((m * (T + 1), p * (T + 1)))
    if T == 0:
        return P
    powers = []
    M = system.C
    for _ in range(T):
        powers.append(M @ system.B)
        M = M @ system.A
    for i in range(1, T + 1):
        for j in range(i):
            P[i * m : (i + 1) * m, j * p : (j + 1) * p] = powers[i - j - 1]
    return P


@dataclass(frozen=True, eq=False)
class ProcessCovariance:
    """Exact joint covariance of the stacked path (u_0..u_T, y_0..y_T).

    The input block comes first; within each block time runs forward.
    """

    sigma: np.ndarray
    T: int
    m: int
    p: int

    def __post_init__(self):
        sig = np.asarray(self.sigma, float)
        d = (self.m + self.p) * (self.T + 1)
        if sig.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {sig.shape}")
        if np.max(np.abs(sig - sig.T)) > 1e-12:
            raise ValueError("sigma must be symmetric to 1e-12")
        if float(np.linalg.eigvalsh(sig)[0]) < -1e-10:
            raise ValueError("sigma must be positive semidefinite to 1e-10")
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)

    @property
    def dim(self) -> int:
        return (self.m + self.p) * (self.T + 1)

    @property
    def input_block(self) -> np.ndarray:
        c = self.p * (self.T + 1)
        return self.sigma[:c, :c]

    @property
    def output_block(self) -> np.ndarray:
        c = self.p * (self.T + 1)
        return self.sigma[c:, c:]

    @property
    def cross_block(self) -> np.ndarray:
        """Cov(y-path, u-path), shape m(T+1) x p(T+1)."""
        c = self.p * (self.T + 1)
        return self.sigma[c:, :c]


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    lam, V = np.linalg.eigh(M)
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def process_covariance(
    system: SystemMatrices, sigma_w: np.ndarray, T: int
) -> ProcessCovariance:
    """Joint path covariance for standard normal inputs and observation
    noise, process noise of covariance sigma_w, and x_0 = 0.

        Sigma = [I; P][I, P^T] + [0; P_w][0, P_w^T] + diag(0, I)

    with P the input path map and P_w its analogue driven by sigma_w^{1/2}.
    Requires D = 0, which keeps the map strictly lower triangular.
    """
    if np.any(system.D != 0):
        raise ValueError("process covariance is defined for D = 0 only")
    sigma_w = np.asarray(sigma_w, float)
    n = system.n
    if sigma_w.shape != (n, n):
        raise ValueError(f"sigma_w must be {n}x{n}")
    if np.max(np.abs(sigma_w - sigma_w.T)) > 1e-10:
        raise ValueError("sigma_w must be symmetric")
    if float(np.linalg.eigvalsh(sigma_w)[0]) < -1e-10:
        raise ValueError("sigma_w must be positive semidefinite")
    T = int(T)
    m, p = system.m, system.p
    P = toeplitz_P(system, T)
    noise_sys = SystemMatrices(
        A=system.A, B=_psd_sqrt(sigma_w), C=system.C, D=np.zeros((m, n))
    )
    P_w = toeplitz_P(noise_sys, T)
    pu = p * (T + 1)
    mu = m * (T + 1)
    sigma = np.empty((pu + mu, pu + mu))
    sigma[:pu, :pu] = np.eye(pu)
    sigma[:pu, pu:] = P.T
    sigma[pu:, :pu] = P
    sigma[pu:, pu:] = P @ P.T + P_w @ P_w.T + np.eye(mu)
    sigma = (sigma + sigma.T) / 2.0
    return ProcessCovariance(sigma=sigma, T=T, m=m, p=p)


@dataclass(frozen=True)
class ClosenessReport:
    """Spectral closeness of two path covariances.

    mult_factor is the smallest eta with (1-eta) S1 <= S2 <= (1+eta) S1 in
    the positive semidefinite order; tv_upper is a standard Gaussian
    total-variation bound, half the Frobenius norm of the whitened deviation.
    predicted_bound, when set, carries the theory value 6 (T+1) ||u|| delta
    the factor is compared against.
    """

    mult_factor: float
    tv_upper: float
    predicted_bound: Optional[float] = None

    def to_dict(self) -> dict:
        out = {"mult_factor": self.mult_factor, "tv_upper": self.tv_upper}
        if self.predicted_bound is not None:
            out["predicted_bound"] = self.predicted_bound
        return out


def indistinguishability_bound(T: int, u_norm: float, delta: float) -> float:
    """Theory ceiling 6 (T+1) ||u|| delta on the multiplicative factor."""
    return 6.0 * (int(T) + 1) * float(u_norm) * float(delta)


def covariance_closeness(
    s1: ProcessCovariance,
    s2: ProcessCovariance,
    predicted_bound: Optional[float] = None,
) -> ClosenessReport:
    """Whiten s2 by s1 and measure the worst relative eigenvalue deviation."""
    if s1.sigma.shape != s2.sigma.shape:
        raise ValueError(
            f"covariance sizes differ: {s1.sigma.shape} vs {s2.sigma.shape}"
        )
    lam, V = np.linalg.eigh(s1.sigma)
    if lam[0] < 1e-12:
        lam = lam + 1e-12
    W = (V / np.sqrt(lam)) @ V.T
    M = W @ s2.sigma @ W
    M = (M + M.T) / 2.0
    dev = M - np.eye(M.shape[0])
    mult = float(np.max(np.abs(np.linalg.eigvalsh(dev))))
    tv = 0.5 * float(np.linalg.norm(dev))
    return ClosenessReport(
        mult_factor=mult, tv_upper=tv, predicted_bound=predicted_bound
    )


@dataclass(frozen=True, eq=False)
class GenericityWitness:
    """Outcome of the genericity search: unit u, w with u orthogonal to both
    v and w and <u, A w> as large as possible."""

    ok: bool
    value: float
    norm_A: float
    c: float
    u: np.ndarray
    w: np.ndarray

    def __bool__(self) -> bool:
        return self.ok

    @property
    def ratio(self) -> float:
        """Best achieved <u, A w> / ||A||, the largest certified c."""
        return self.value / self.norm_A if self.norm_A > 0 else 0.0


def _best_w(A: np.ndarray, u: np.ndarray) -> np.ndarray:
    g = A.T @ u
    g = g - u * (u @ g)
    norm = np.linalg.norm(g)
    return g / norm if norm > 0 else np.zeros_like(g)


def _best_u(A: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    h = A @ w
    h = h - v * (v @ h)
    w_perp = w - v * (v @ w)
    norm_wp = np.linalg.norm(w_perp)
    if norm_wp > 1e-14:
        w_perp = w_perp / norm_wp
        h = h - w_perp * (w_perp @ h)
    norm = np.linalg.norm(h)
    return h / norm if norm > 0 else np.zeros_like(h)


def c_generic_check(A: np.ndarray, v: np.ndarray, c: float) -> GenericityWitness:
    """Search for unit u, w with <u,v> = 0, <u,w> = 0, <u, A w> >= c ||A||.

    For fixed u the best w is the normalized projection of A^T u off u, and
    for fixed w the best u is the projection of A w off span(v, w), so the
    search seeds u from the left singular vectors of A compressed to the
    complement of v and alternates those two closed-form steps.  Equality is
    admitted up to a relative float slack.
    """
    A = np.asarray(A, float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    v = np.asarray(v, float).reshape(-1)
    if v.shape[0] != n:
        raise ValueError("v must match A's dimension")
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise ValueError("v must be a unit vector")
    c = float(c)
    norm_A = float(np.linalg.norm(A, 2))
    zero = np.zeros(n)
    if n < 3 or norm_A == 0.0:
        return GenericityWitness(ok=False, value=0.0, norm_A=norm_A, c=c,
                                 u=zero, w=zero)

    basis = np.eye(n)
    basis[:, 0] = v
    Q, _ = np.linalg.qr(basis)
    Q = Q[:, 1:]
    lefts, _, _ = np.linalg.svd(Q.T @ A)
    best_val, best_u, best_w = -1.0, zero, zero
    for a in lefts.T:
        u = Q @ a
        w = _best_w(A, u)
        val = float(u @ A @ w)
        for _ in range(25):
            u_new = _best_u(A, v, w)
            if np.linalg.norm(u_new) == 0:
                break
            w_new = _best_w(A, u_new)
            val_new = float(u_new @ A @ w_new)
            if val_new <= val + 1e-14:
                break
            u, w, val = u_new, w_new, val_new
        if val > best_val:
            best_val, best_u, best_w = val, u, w
    ok = best_val >= c * norm_A * (1.0 - 1e-9)
    return GenericityWitness(ok=bool(ok), value=best_val, norm_A=norm_A, c=c,
                             u=best_u, w=best_w)


@dataclass(frozen=True)
class DemoRow:
    """One row of the indistinguishability demo table.

    tv_upper rides along for the JSON closeness report; the CSV carries the
    six headline columns only.
    """

    delta: float
    T: int
    mult_factor: float
    predicted_bound: float
    markov_dist: float
    parameter_gap: float
    tv_upper: float = 0.0


def demo_row(pair: UnobservablePair, u_vec: np.ndarray, T: int) -> DemoRow:
    """Distributional closeness vs parameter distance for one perturbation.

    Both covariances share the base system's process noise BB^T, per the
    construction's requirement that the noise dominate the input map.
    """
    sys1 = pair.sys
    sys2 = perturbed_system(pair, u_vec)
    sigma_w = sys1.B @ sys1.B.T
    s1 = process_covariance(sys1, sigma_w, T)
    s2 = process_covariance(sys2, sigma_w, T)
    u_norm = float(np.linalg.norm(np.asarray(u_vec, float)))
    bound = indistinguishability_bound(T, u_norm, pair.delta)
    close = covariance_closeness(s1, s2, predicted_bound=bound)
    dist = markov_distance(sys1, sys2, T)
    real2 = realization_from_system(sys2, s=sys2.n)
    gap = align_similarity(sys1, real2).total
    return DemoRow(
        delta=pair.delta,
        T=int(T),
        mult_factor=close.mult_factor,
        predicted_bound=bound,
        markov_dist=dist,
        parameter_gap=gap,
        tv_upper=close.tv_upper,
    )

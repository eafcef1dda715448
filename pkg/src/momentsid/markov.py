"""Moment estimation of the impulse-response blocks X_0 = D, X_j = C A^{j-1} B
from one trajectory, both naive (raw observations) and stabilized (lag-filtered
observations), plus the scalar variance-divergence experiment that motivates
the stabilized form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lds import NoiseModel, SystemMatrices, Trajectory
from .rng import STREAM_INPUT, STREAM_OBSERVATION, STREAM_PROCESS, substream, trial_seeds
from .stabilizer import StabilizerCoefficients


@dataclass(frozen=True, eq=False)
class MarkovEstimate:
    """Estimated impulse-response blocks X_0..X_k."""

    blocks: np.ndarray  # (k+1, m, p)
    k: int
    sample_count: int
    kind: str = "stabilized"

    def __post_init__(self):
        arr = np.asarray(self.blocks, float)
        if arr.ndim != 3 or arr.shape[0] != self.k + 1:
            raise ValueError(f"blocks must be (k+1, m, p), got {arr.shape}")
        object.__setattr__(self, "blocks", arr)

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def p(self) -> int:
        return self.blocks.shape[2]

    def to_dict(self) -> dict:
        return {"k": self.k, "blocks": self.blocks.tolist()}

    @classmethod
    def from_dict(cls, data: dict, kind: str = "stabilized") -> "MarkovEstimate":
        blocks = np.asarray(data["blocks"], float)
        k = int(data["k"])
        return cls(blocks=blocks, k=k, sample_count=int(data.get("sample_count", 0)),
                   kind=kind)


def _alpha_blocks(alpha) -> np.ndarray:
    if isinstance(alpha, StabilizerCoefficients):
        return alpha.blocks
    arr = np.asarray(alpha, float)
    if arr.ndim != 3:
        raise ValueError("alpha must be (s, m, m)")
    return arr


def stabilized_observations(traj: Trajectory, alpha, k: int):
    """The lag-filtered sequence yhat_t = y_t - sum_i alpha_i y_{t-k-i}.

    Defined for t = k+s+1 .. T.  Returns (yhat, t0) where yhat[i] is the value
    at absolute time t0 + i.
    """
    a = _alpha_blocks(alpha)
    s = a.shape[0]
    k = int(k)
    if k < s:
        raise ValueError("k must be >= s")
    T = traj.horizon
    t0 = k + s + 1
    if T < t0:
        raise ValueError(f"horizon {T} too short; need at least {t0}")
    Y = traj.observations
    out = Y[t0:].copy()
    for i in range(1, s + 1):
        out -= Y[t0 - k - i : T + 1 - k - i] @ a[i - 1].T
    return out, t0


def estimate_markov(traj: Trajectory, alpha, k: int) -> MarkovEstimate:
    """Window-averaged cross moments of the stabilized sequence.

        Xhat_j = mean over t of  yhat_t u_{t-j}^T,   j = 0..k

    The average runs over every admissible t; each block is unbiased for the
    true X_j because inputs are isotropic and independent across time.
    """
    yhat, t0 = stabilized_observations(traj, alpha, k)
    U = traj.inputs
    T = traj.horizon
    N = T + 1 - t0
    blocks = np.empty((k + 1, traj.m, traj.p))
    for j in range(k + 1):
        blocks[j] = yhat.T @ U[t0 - j : T + 1 - j] / N
    return MarkovEstimate(blocks=blocks, k=int(k), sample_count=N, kind="stabilized")


def windowed_median_estimate(
    traj: Trajectory, alpha, k: int, windows: int
) -> MarkovEstimate:
    """Median-of-means variant of estimate_markov.

    Splits the admissible time range into `windows` contiguous chunks, takes
    the per-chunk mean of yhat_t u_{t-j}^T, and returns the entrywise median
    across chunks.  A robustness extra; the plain full average is the primary
    estimator.
    """
    windows = int(windows)
    if windows < 1:
        raise ValueError("windows must be >= 1")
    yhat, t0 = stabilized_observations(traj, alpha, k)
    U = traj.inputs
    T = traj.horizon
    N = T + 1 - t0
    if windows > N:
        raise ValueError(f"{windows} windows but only {N} admissible steps")
    edges = np.linspace(0, N, windows + 1).astype(int)
    blocks = np.empty((k + 1, traj.m, traj.p))
    means = np.empty((windows, traj.m, traj.p))
    for j in range(k + 1):
        Uj = U[t0 - j : T + 1 - j]
        for w in range(windows):
            lo, hi = edges[w], edges[w + 1]
            means[w] = yhat[lo:hi].T @ Uj[lo:hi] / (hi - lo)
        blocks[j] = np.median(means, axis=0)
    return MarkovEstimate(blocks=blocks, k=int(k), sample_count=N,
                          kind="median-of-means")


def naive_estimate(traj: Trajectory, k: int) -> MarkovEstimate:
    """Raw cross moments  mean_t y_{t+j} u_t^T  without stabilization."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    T = traj.horizon
    if T < k:
        raise ValueError("horizon shorter than the requested lag")
    Y, U = traj.observations, traj.inputs
    blocks = np.empty((k + 1, traj.m, traj.p))
    for j in range(k + 1):
        N = T - j + 1
        blocks[j] = Y[j : T + 1].T @ U[: N] / N
    return MarkovEstimate(blocks=blocks, k=k, sample_count=T + 1, kind="naive")


def true_markov(system: SystemMatrices, k: int) -> np.ndarray:
    """Ground-truth blocks [D, CB, CAB, ..., C A^{k-1} B]."""
    blocks = np.empty((k + 1, system.m, system.p))
    blocks[0] = system.D
    M = system.C
    for j in range(1, k + 1):
        blocks[j] = M @ system.B
        M = M @ system.A
    return blocks


@dataclass(frozen=True)
class VarianceReport:
    """Second moment of the scalar demo's estimation error."""

    kind: str  # "naive" or "stabilized"
    T: int
    trials: int
    second_moment: float


def demo_system() -> SystemMatrices:
    """The scalar divergence demo: A = B = C = D = 1."""
    one = np.eye(1)
    return SystemMatrices(A=one, B=one, C=one, D=one)


def demo_noise() -> NoiseModel:
    """Unit-variance input and observation noise, variance-100 process noise,
    deterministic zero initial state."""
    return NoiseModel.iid_gaussian(n=1, m=1, p=1, sigma_w=10.0, sigma_z=1.0,
                                   sigma_x0=0.0)


def _demo_observations(U: np.ndarray, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Vectorized demo rollout matching simulate()'s arithmetic order."""
    trials, cols = U.shape
    Y = np.empty_like(U)
    x = np.zeros(trials)
    for t in range(cols):
        Y[:, t] = (x + U[:, t]) + Z[:, t]
        x = (x + U[:, t]) + W[:, t]
    return Y

# keep per-chunk memory for the demo experiments around ~100 MB
_CHUNK_VALUES = 4_000_000


def variance_blowup_experiment(T: int, trials: int, seed: int) -> VarianceReport:
    """Second moment of the naive error Q_T = (1/T) sum_{t=1}^T y_t u_t - 1
    on the scalar demo system.

    The marginally stable state accumulates the variance-100 process noise,
    so E[Q_T^2] stays bounded away from zero (around 50) no matter how large
    T grows; this is the divergence the stabilized estimator removes.
    """
    T, trials = int(T), int(trials)
    if T < 1 or trials < 1:
        raise ValueError("need T >= 1 and trials >= 1")
    chunk = max(1, _CHUNK_VALUES // (T + 1))
    total = 0.0
    seeds = trial_seeds(seed, trials)
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        U = np.empty((hi - lo, T + 1))
        W = np.empty((hi - lo, T + 1))
        Z = np.empty((hi - lo, T + 1))
        for i, s_i in enumerate(seeds[lo:hi]):
            U[i] = substream(int(s_i), STREAM_INPUT).standard_normal(T + 1)
            W[i] = substream(int(s_i), STREAM_PROCESS).standard_normal(T + 1) * 10.0
            Z[i] = substream(int(s_i), STREAM_OBSERVATION).standard_normal(T + 1)
        Y = _demo_observations(U, W, Z)
        Q = np.mean(Y[:, 1 : T + 1] * U[:, 1 : T + 1], axis=1) - 1.0
        total += float(np.sum(Q**2))
    return VarianceReport(kind="naive", T=T, trials=trials,
                          second_moment=total / trials)


def stabilized_demo_experiment(
    T: int, trials: int, seed: int, k: int = 10
) -> VarianceReport:
    """Stabilized counterpart on the demo system with the oracle coefficient.

    With s = 1 and A = 1 the annihilating coefficient is alpha_1 = 1, so
    yhat_t = y_t - y_{t-k-1}; the report carries the second moment of
    Xhat_1 - 1 over trials.
    """
    T, trials, k = int(T), int(trials), int(k)
    if T < k + 3 or trials < 1:
        raise ValueError("need T >= k + 3 and trials >= 1")
    chunk = max(1, _CHUNK_VALUES // (T + 1))
    total = 0.0
    seeds = trial_seeds(seed, trials)
    t0 = k + 2  # k + s + 1 with s = 1
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        U = np.empty((hi - lo, T + 1))
        W = np.empty((hi - lo, T + 1))
        Z = np.empty((hi - lo, T + 1))
        for i, s_i in enumerate(seeds[lo:hi]):
            U[i] = substream(int(s_i), STREAM_INPUT).standard_normal(T + 1)
            W[i] = substream(int(s_i), STREAM_PROCESS).standard_normal(T + 1) * 10.0
            Z[i] = substream(int(s_i), STREAM_OBSERVATION).standard_normal(T + 1)
        Y = _demo_observations(U, W, Z)
        yhat = Y[:, t0:] - Y[:, t0 - k - 1 : T - k]
        Q = np.mean(yhat * U[:, t0 - 1 : T], axis=1) - 1.0
        total += float(np.sum(Q**2))
    return VarianceReport(kind="stabilized", T=T, trials=trials,
                          second_moment=total / trials)

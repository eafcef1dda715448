"""Linear dynamical system model, noise menu, and trajectory simulation.

The model throughout the package is

    x_{t+1} = A x_t + B u_t + w_t        (state,       x_t in R^n)
    y_t     = C x_t + D u_t + z_t        (observation, y_t in R^m)

driven by inputs u_t in R^p, process noise w_t and observation noise z_t,
all mean zero.  :func:`simulate` produces a single trajectory with the
hidden channels recorded; :func:`closed_form_y` evaluates the unrolled
moving-average form of the same observation and is used as the simulator's
independent oracle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .rng import (
    STREAM_INITIAL,
    STREAM_INPUT,
    STREAM_OBSERVATION,
    STREAM_PROCESS,
    substream,
)

DISTRIBUTION_KINDS = (
    "gaussian",
    "laplace",
    "rademacher",
    "uniform-box",
    "scaled-mixture",
)

# Declared fourth-moment ratios for the menu.  The anti-concentration bound
# needs K >= 3, so kinds whose true ratio is below 3 declare the floor.
DEFAULT_K = {
    "gaussian": 3.0,
    "laplace": 6.0,
    "rademacher": 3.0,
    "uniform-box": 3.0,
    "scaled-mixture": 3.75,
}

_RNG_OR_SEED = Union[int, np.random.Generator]


def _as_rng(seed: _RNG_OR_SEED) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """State-space parameters (A, B, C, D) with consistent dimensions."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        C = _as_matrix(self.C, "C")
        D = _as_matrix(self.D, "D")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(
                f"D must be {C.shape[0]}x{B.shape[1]} to match C and B, got {D.shape}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "p": self.p,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SystemMatrices":
        sys = cls(
            A=np.asarray(data["A"], float),
            B=np.asarray(data["B"], float),
            C=np.asarray(data["C"], float),
            D=np.asarray(data["D"], float),
        )
        for key in ("n", "m", "p"):
            if key in data and int(data[key]) != getattr(sys, key):
                raise ValueError(
                    f"declared {key}={data[key]} disagrees with matrix shapes"
                )
        return sys


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """A mean-zero law: menu kind, covariance, declared fourth-moment constant.

    Sampling draws iid standardized coordinates of the given kind and shapes
    them by the symmetric square root of ``covariance``, so the covariance is
    exact for every kind.  ``K`` upper-bounds E<v,x>^4 / (E<v,x>^2)^2 over all
    directions v; it must be at least 3 (the gaussian floor used by the
    anti-concentration bound), and linear images keep the same constant.
    """

    kind: str
    covariance: np.ndarray
    K: float

    def __post_init__(self):
        if self.kind not in DISTRIBUTION_KINDS:
            raise ValueError(
                f"unknown distribution kind {self.kind!r}; "
                f"expected one of {DISTRIBUTION_KINDS}"
            )
        cov = _as_matrix(self.covariance, "covariance")
        if cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be square, got {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh(cov)
        if eigs.size and eigs.min() < -1e-10 * max(1.0, eigs.max()):
            raise ValueError("covariance must be positive semidefinite")
        if not np.isfinite(self.K) or self.K < 3.0:
            raise ValueError(f"K must be >= 3, got {self.K}")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "K", float(self.K))

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    def sqrt_covariance(self) -> np.ndarray:
        """Symmetric PSD square root of the covariance."""
        vals, vecs = np.linalg.eigh(self.covariance)
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    @classmethod
    def menu(cls, kind: str, dim: int, variance: float = 1.0) -> "DistributionSpec":
        """Isotropic menu distribution with per-coordinate variance."""
        if variance < 0:
            raise ValueError("variance must be nonnegative")
        if kind not in DEFAULT_K:
            raise ValueError(
                f"unknown distribution kind {kind!r}; expected one of "
                f"{DISTRIBUTION_KINDS}"
            )
        return cls(kind, variance * np.eye(dim), DEFAULT_K[kind])

    @classmethod
    def gaussian(cls, covariance) -> "DistributionSpec":
        return cls("gaussian", np.asarray(covariance, float), DEFAULT_K["gaussian"])


def _standard_coordinates(kind: str, rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """iid mean-zero unit-variance coordinates of the requested kind."""
    shape = (count, dim)
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "laplace":
        # unit variance requires scale 1/sqrt(2)
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), shape)
    if kind == "rademacher":
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    if kind == "uniform-box":
        half = np.sqrt(3.0)
        return rng.uniform(-half, half, shape)
    if kind == "scaled-mixture":
        # gaussian scale mixture: r^2 in {0.5, 1.5} equally likely (E r^2 = 1),
        # one scale per vector so the ratio is direction-free (K = 3.75)
        g = rng.standard_normal(shape)
        r2 = np.where(rng.random((count, 1)) < 0.5, 0.5, 1.5)
        return g * np.sqrt(r2)
    raise ValueError(f"unknown distribution kind {kind!r}")


def sample_distribution(spec: DistributionSpec, count: int, seed: _RNG_OR_SEED) -> np.ndarray:
    """Draw ``count`` iid vectors from ``spec``.

    Parameters
    ----------
    spec : DistributionSpec
    count : int
        Number of vectors.
    seed : int or numpy Generator
        Integer seeds open a fresh root stream; passing a Generator continues
        an existing substream.

    Returns
    -------
    ndarray of shape (count, spec.dim)
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = _as_rng(seed)
    xi = _standard_coordinates(spec.kind, rng, int(count), spec.dim)
    return xi @ spec.sqrt_covariance().T


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Laws for the four stochastic channels of one simulation.

    The input channel must have identity covariance; the estimators' moment
    identities are stated for isotropic inputs and the constraint calibration
    relies on it.
    """

    input: DistributionSpec
    process: DistributionSpec
    observation: DistributionSpec
    initial: DistributionSpec

    def __post_init__(self):
        eye = np.eye(self.input.dim)
        if not np.allclose(self.input.covariance, eye, atol=1e-12):
            raise ValueError("input distribution must have identity covariance")

    @classmethod
    def iid_gaussian(
        cls,
        n: int,
        m: int,
        p: int,
        sigma_w: float = 1.0,
        sigma_z: float = 1.0,
        sigma_x0: float = 0.0,
    ) -> "NoiseModel":
        return cls(
            input=DistributionSpec.gaussian(np.eye(p)),
            process=DistributionSpec.gaussian(sigma_w**2 * np.eye(n)),
            observation=DistributionSpec.gaussian(sigma_z**2 * np.eye(m)),
            initial=DistributionSpec.gaussian(sigma_x0**2 * np.eye(n)),
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One simulated rollout, hidden channels included.

    ``states`` runs one step past the horizon (the recursion's final write),
    so ``states[t+1] = A states[t] + B inputs[t] + process_noise[t]`` holds for
    every t in [0, horizon].
    """

    horizon: int
    inputs: np.ndarray
    observations: np.ndarray
    states: Optional[np.ndarray] = None
    process_noise: Optional[np.ndarray] = None
    observation_noise: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        T = int(self.horizon)
        if T < 0:
            raise ValueError("horizon must be nonnegative")
        if self.inputs.shape[0] != T + 1:
            raise ValueError(f"inputs must have {T + 1} rows, got {self.inputs.shape}")
        if self.observations.shape[0] != T + 1:
            raise ValueError(
                f"observations must have {T + 1} rows, got {self.observations.shape}"
            )
        if self.states is not None and self.states.shape[0] != T + 2:
            raise ValueError(f"states must have {T + 2} rows, got {self.states.shape}")
        for name in ("process_noise", "observation_noise"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[0] != T + 1:
                raise ValueError(f"{name} must have {T + 1} rows")

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    @property
    def m(self) -> int:
        return self.observations.shape[1]


def simulate(
    system: SystemMatrices,
    noise: NoiseModel,
    horizon: int,
    seed: int,
    inputs: Optional[np.ndarray] = None,
) -> Trajectory:
    """Roll out a single trajectory of the system.

    Parameters
    ----------
    system : SystemMatrices
    noise : NoiseModel
        Channel laws; dimensions must match the system.
    horizon : int
        Final time index T; the trajectory covers t = 0..T.
    seed : int
        Master seed.  Each channel draws from its own substream, so identical
        (seed, arguments) reproduce the rollout bit for bit and disjoint time
        windows use independent draws.
    inputs : ndarray of shape (horizon+1, p), optional
        Explicit input sequence; when given, the input channel is not drawn.

    Returns
    -------
    Trajectory with states, process and observation noise recorded.
    """
    T = int(horizon)
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    n, m, p = system.n, system.m, system.p
    for name, spec, dim in (
        ("input", noise.input, p),
        ("process", noise.process, n),
        ("observation", noise.observation, m),
        ("initial", noise.initial, n),
    ):
        if spec.dim != dim:
            raise ValueError(
                f"{name} distribution has dimension {spec.dim}, system needs {dim}"
            )

    if inputs is None:
        u = sample_distribution(noise.input, T + 1, substream(seed, STREAM_INPUT))
    else:
        u = np.asarray(inputs, float)
        if u.shape != (T + 1, p):
            raise ValueError(f"inputs must have shape {(T + 1, p)}, got {u.shape}")
    w = sample_distribution(noise.process, T + 1, substream(seed, STREAM_PROCESS))
    z = sample_distribution(noise.observation, T + 1, substream(seed, STREAM_OBSERVATION))
    x0 = sample_distribution(noise.initial, 1, substream(seed, STREAM_INITIAL))[0]

    A, B, C, D = system.A, system.B, system.C, system.D
    x = np.empty((T + 2, n))
    y = np.empty((T + 1, m))
    x[0] = x0
    for t in range(T + 1):
        y[t] = (C @ x[t] + D @ u[t]) + z[t]
        x[t + 1] = (A @ x[t] + B @ u[t]) + w[t]
    return Trajectory(
        horizon=T,
        inputs=u,
        observations=y,
        states=x,
        process_noise=w,
        observation_noise=z,
        seed=int(seed),
    )


def closed_form_y(
    system: SystemMatrices,
    inputs: np.ndarray,
    process_noise: np.ndarray,
    observation_noise: np.ndarray,
    x0: np.ndarray,
    t: int,
) -> np.ndarray:
    """Observation at time t from the unrolled moving-average form.

    Evaluates

        y_t = D u_t + z_t + sum_{i=1}^{t} C A^{i-1} (B u_{t-i} + w_{t-i}) + C A^t x_0

    by accumulating C A^{i-1} one multiplication at a time; no state recursion
    is involved, which makes this an independent check of :func:`simulate`.
    """
    t = int(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    u = np.asarray(inputs, float)
    w = np.asarray(process_noise, float)
    z = np.asarray(observation_noise, float)
    if max(t, 0) >= u.shape[0] or t >= z.shape[0]:
        raise ValueError("time index exceeds the supplied channel arrays")
    acc = system.D @ u[t] + z[t]
    lead = system.C.copy()  # C A^{i-1} for the current i
    for i in range(1, t + 1):
        acc = acc + lead @ (system.B @ u[t - i] + w[t - i])
        lead = lead @ system.A
    return acc + lead @ np.asarray(x0, float)

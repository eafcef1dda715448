"""Monte-Carlo diagnostics for the distribution menu: directional
fourth-moment ratios and anti-concentration frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .lds import DistributionSpec, sample_distribution
from .rng import substream

_DIRECTION_STREAM = 21
_SAMPLE_STREAM = 22


def hyper_ratio(samples: np.ndarray, directions: np.ndarray) -> float:
    """max over rows v of directions of  E<v,x>^4 / (E<v,x>^2)^2.

    Raises if some direction sees (numerically) zero empirical variance.
    """
    samples = np.asarray(samples, float)
    directions = np.asarray(directions, float)
    proj = samples @ directions.T  # (N, d)
    m2 = np.mean(proj**2, axis=0)
    m4 = np.mean(proj**4, axis=0)
    floor = 1e-12 * max(1.0, float(np.max(m2, initial=0.0)))
    if np.any(m2 <= floor):
        raise ValueError("a probe direction has (near) zero empirical variance")
    return float(np.max(m4 / m2**2))


def _unit_directions(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    dirs = rng.standard_normal((count, dim))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return dirs / norms


def hypercontractivity_probe(
    spec: DistributionSpec,
    directions: Union[int, np.ndarray],
    samples: int,
    seed: int,
) -> float:
    """Estimate the worst directional fourth-moment ratio of ``spec``.

    ``directions`` is either a count of random unit directions (the coordinate
    axes are always added) or an explicit (d, dim) array.  Returns K_hat, the
    maximum empirical ratio over the probed directions.
    """
    if isinstance(directions, (int, np.integer)):
        dirs = _unit_directions(
            int(directions), spec.dim, substream(seed, _DIRECTION_STREAM)
        )
        dirs = np.vstack([dirs, np.eye(spec.dim)])
    else:
        dirs = np.asarray(directions, float)
        if dirs.ndim != 2 or dirs.shape[1] != spec.dim:
            raise ValueError(f"directions must be (d, {spec.dim})")
    X = sample_distribution(spec, int(samples), substream(seed, _SAMPLE_STREAM))
    return hyper_ratio(X, dirs)


@dataclass(frozen=True)
class AntiConcentrationResult:
    """Empirical hit frequencies of the radius-0.1 balls around each beta."""

    beta_grid: np.ndarray
    probabilities: np.ndarray
    max_probability: float
    K: float

    def bound(self) -> float:
        """The 1 - 1/(10 K) level the max frequency is compared against."""
        return 1.0 - 1.0 / (10.0 * self.K)


def anti_concentration_probe(
    spec: DistributionSpec,
    beta_grid: Sequence[float],
    samples: int,
    seed: int,
) -> AntiConcentrationResult:
    """Empirical Pr[|z - beta| <= 0.1] over a grid of shifts beta.

    ``spec`` must be scalar and normalized (mean zero by construction,
    variance >= 1, fourth moment <= K); the declared K is carried into the
    result so callers can compare against 1 - 1/(10 K).
    """
    if spec.dim != 1:
        raise ValueError("anti-concentration probe needs a scalar distribution")
    if spec.covariance[0, 0] < 1.0 - 1e-12:
        raise ValueError("probe requires variance >= 1")
    betas = np.asarray(list(beta_grid), float)
    if betas.size == 0:
        raise ValueError("beta grid is empty")
    z = sample_distribution(spec, int(samples), substream(seed, _SAMPLE_STREAM))[:, 0]
    probs = np.array([np.mean(np.abs(z - b) <= 0.1) for b in betas])
    return AntiConcentrationResult(
        beta_grid=betas,
        probabilities=probs,
        max_probability=float(probs.max()),
        K=spec.K,
    )

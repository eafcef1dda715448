"""Stabilizing-coefficient search: a convex feasibility program over the lag
coefficients alpha_1..alpha_s, solved by projected subgradient descent.

The program constrains each ||alpha_j||_F inside a ball of radius P0 and, at a
sparse set of checkpoint times t, the stabilized residual

    y_{t+k} - sum_j alpha_j y_{t-j}

inside a ball of radius P1*log(1/eps).  On a marginally stable system the raw
observations grow, so late checkpoints force the coefficients toward the lag
polynomial that annihilates C A^{s+k}; the moment estimator then runs on the
stabilized sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .algebra import condition_report, matrix_poly_F
from .lds import NoiseModel, SystemMatrices, Trajectory


@dataclass(frozen=True, eq=False)
class StabilizerCoefficients:
    """The s lag coefficient matrices, each m x m."""

    blocks: np.ndarray  # (s, m, m)

    def __post_init__(self):
        arr = np.asarray(self.blocks, dtype=float)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"blocks must be (s, m, m), got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "blocks", arr)

    @property
    def s(self) -> int:
        return self.blocks.shape[0]

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    def flatten(self) -> np.ndarray:
        return self.blocks.reshape(-1).copy()

    @classmethod
    def zeros(cls, s: int, m: int) -> "StabilizerCoefficients":
        return cls(np.zeros((s, m, m)))

    @classmethod
    def from_flat(cls, x: np.ndarray, s: int, m: int) -> "StabilizerCoefficients":
        return cls(np.asarray(x, float).reshape(s, m, m))


@dataclass(frozen=True)
class ConstraintConfig:
    """Geometry of the feasibility program.

    Checkpoints sit at base times t = i*L for i = 1..num_checkpoints; the
    residual at a checkpoint reads y_{t+k} against the s lagged observations,
    so the derived ``checkpoint_indices`` are the residual times i*L + k.
    """

    s: int
    k: int
    P0: float
    P1: float
    L: int
    num_checkpoints: int
    eps: float

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.k < self.s:
            raise ValueError("k must be >= s (the estimator reads lags up to k)")
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if self.P0 <= 0 or self.P1 <= 0:
            raise ValueError("P0 and P1 must be positive")
        if self.L < self.s:
            raise ValueError("checkpoint spacing L must be >= s")
        if self.num_checkpoints < 1:
            raise ValueError("need at least one checkpoint")

    @property
    def residual_radius(self) -> float:
        return self.P1 * math.log(1.0 / self.eps)

    def checkpoint_indices(self) -> List[int]:
        """Residual times {i*L + k : i = 1..num_checkpoints}."""
        return [i * self.L + self.k for i in range(1, self.num_checkpoints + 1)]


@dataclass(frozen=True, eq=False)
class Constraint:
    """||M x - b||_2 <= radius, with x the flattened coefficient vector."""

    M: np.ndarray
    b: np.ndarray
    radius: float
    kind: str  # "coefficient-ball" or "checkpoint"
    index: int  # ball: j (1-based); checkpoint: base time t

    def violation(self, x: np.ndarray) -> float:
        return max(0.0, float(np.linalg.norm(self.M @ x - self.b)) - self.radius)


@dataclass(eq=False)
class ConstraintSystem:
    config: ConstraintConfig
    constraints: List[Constraint]
    dim: int
    m: int

    def violations(self, coeffs) -> np.ndarray:
        x = _flat(coeffs, self.config.s, self.m)
        return np.array([c.violation(x) for c in self.constraints])

    def max_violation(self, coeffs) -> float:
        return float(self.violations(coeffs).max())


def _flat(coeffs, s: int, m: int) -> np.ndarray:
    if isinstance(coeffs, StabilizerCoefficients):
        return coeffs.flatten()
    arr = np.asarray(coeffs, float)
    if arr.shape == (s, m, m):
        return arr.reshape(-1)
    if arr.shape == (s * m * m,):
        return arr.copy()
    raise ValueError(f"cannot interpret coefficients of shape {arr.shape}")


def build_constraints(traj: Trajectory, config: ConstraintConfig) -> ConstraintSystem:
    """Assemble the feasibility program from one trajectory.

    Every checkpoint needs y_{t+k} and the s lags y_{t-1}..y_{t-s} inside the
    horizon; a config whose checkpoints overrun the trajectory is rejected.
    """
    m = traj.m
    s, k = config.s, config.k
    dim = s * m * m
    last = config.num_checkpoints * config.L
    if last + k > traj.horizon:
        raise ValueError(
            f"checkpoints reach index {last + k} but the trajectory ends at "
            f"{traj.horizon}; shrink L or num_checkpoints"
        )
    if config.L - s < 0:
        raise ValueError("first checkpoint has no room for the s lags")

    Y = traj.observations
    constraints: List[Constraint] = []
    for j in range(1, s + 1):
        M = np.zeros((m * m, dim))
        off = (j - 1) * m * m
        M[:, off : off + m * m] = np.eye(m * m)
        constraints.append(
            Constraint(M=M, b=np.zeros(m * m), radius=config.P0,
                       kind="coefficient-ball", index=j)
        )
    radius = config.residual_radius
    for i in range(1, config.num_checkpoints + 1):
        t = i * config.L
        M = np.zeros((m, dim))
        for j in range(1, s + 1):
            off = (j - 1) * m * m
            lag = Y[t - j]
            for r in range(m):
                M[r, off + r * m : off + (r + 1) * m] = lag
        constraints.append(
            Constraint(M=M, b=Y[t + k].copy(), radius=radius,
                       kind="checkpoint", index=t)
        )
    return ConstraintSystem(config=config, constraints=constraints, dim=dim, m=m)


@dataclass(frozen=True)
class FeasibilitySolution:
    coefficients: StabilizerCoefficients
    max_violation: float
    iterations: int
    feasible: bool


def _project_balls(x: np.ndarray, s: int, m: int, P0: float) -> np.ndarray:
    blocks = x.reshape(s, m * m)
    norms = np.linalg.norm(blocks, axis=1)
    over = norms > P0
    if np.any(over):
        blocks = blocks.copy()
        blocks[over] *= (P0 / norms[over])[:, None]
        return blocks.reshape(-1)
    return x


def solve_feasibility(
    system: ConstraintSystem,
    tol: float = 1e-8,
    max_iters: int = 100_000,
) -> FeasibilitySolution:
    """Projected subgradient descent on the worst constraint violation.

    Minimizes f(x) = max_c (||M_c x - b_c|| - r_c)_+ inside the coefficient
    balls, stepping along the normalized subgradient of the currently worst
    constraint with step length diameter/sqrt(iter), tracking the best
    iterate.  Returns the first iterate with f <= tol, or the best iterate
    found with feasible=False.
    """
    cfg = system.config
    s, m = cfg.s, system.m
    dim = system.dim

    # group constraints by residual dimension so evaluation is a couple of
    # batched matmuls instead of a python loop per iterate
    groups = {}
    for idx, c in enumerate(system.constraints):
        groups.setdefault(c.M.shape[0], []).append(idx)
    stacked = []
    for rows, idxs in groups.items():
        Ms = np.stack([system.constraints[i].M for i in idxs])
        bs = np.stack([system.constraints[i].b for i in idxs])
        radii = np.array([system.constraints[i].radius for i in idxs])
        stacked.append((np.array(idxs), Ms, bs, radii))

    def evaluate(x: np.ndarray):
        worst_idx, worst_f, worst_res = -1, -np.inf, None
        for idxs, Ms, bs, radii in stacked:
            res = Ms @ x - bs
            norms = np.linalg.norm(res, axis=1)
            viols = norms - radii
            j = int(np.argmax(viols))
            if viols[j] > worst_f:
                worst_f = float(viols[j])
                worst_idx = int(idxs[j])
                worst_res = res[j]
        return max(worst_f, 0.0), worst_idx, worst_res

    diameter = 2.0 * cfg.P0 * math.sqrt(s)
    x = np.zeros(dim)
    f, worst, resid = evaluate(x)
    best_x = x.copy()
    best_f = f
    iters = 0
    while best_f > tol and iters < max_iters:
        iters += 1
        rnorm = float(np.linalg.norm(resid))
        if rnorm == 0:
            break
        g = system.constraints[worst].M.T @ (resid / rnorm)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0:
            break
        x = _project_balls(x - (diameter / math.sqrt(iters)) * (g / gnorm),
                           s, m, cfg.P0)
        f, worst, resid = evaluate(x)
        if f < best_f:
            best_f = f
            best_x = x.copy()
    return FeasibilitySolution(
        coefficients=StabilizerCoefficients.from_flat(best_x, s, m),
        max_violation=best_f,
        iterations=iters,
        feasible=bool(best_f <= tol),
    )


def oracle_alpha(system: SystemMatrices, k: int, s: int) -> StabilizerCoefficients:
    """Ground-truth coefficients: least-squares solution of
    C A^{k+s} = sum_j alpha_j C A^{s-j} against the observability stack.

    Requires sigma_min of the depth-s stack above 1e-10.  The minimum-norm
    solution keeps every ||alpha_j||_F below kappa * ||C A^{k+s}||_F on
    well-conditioned systems.
    """
    if s < 1 or k < s:
        raise ValueError("need k >= s >= 1")
    m, n = system.m, system.n
    # rows of the stacked regressor: block j holds C A^{s-j}
    blocks = []
    M = system.C
    powers = [M]
    for _ in range(k + s):
        M = M @ system.A
        powers.append(M)
    target = powers[k + s]
    O_rev = np.vstack([powers[s - j] for j in range(1, s + 1)])  # (s*m, n)
    smin = np.linalg.svd(O_rev, compute_uv=False)[-1]
    if smin <= 1e-10:
        raise ValueError("observability stack is numerically rank deficient")
    sol = target @ np.linalg.pinv(O_rev)  # (m, s*m), blocks [alpha_1 .. alpha_s]
    blocks = np.stack([sol[:, (j - 1) * m : j * m] for j in range(1, s + 1)])
    return StabilizerCoefficients(blocks)


def least_squares_alpha(traj: Trajectory, k: int, s: int) -> StabilizerCoefficients:
    """Regression polish: fit y_{t+k} on [y_{t-1}, ..., y_{t-s}] over every
    admissible t in the trajectory.

    On marginally stable data the growing lag energy pins the fit near the
    annihilating coefficients far more tightly than checkpoint feasibility
    alone; the identify pipeline runs this after the subgradient phase and
    keeps the result only if it satisfies the constraint system.
    """
    Y = traj.observations
    T = traj.horizon
    m = traj.m
    if T < k + s + 1:
        raise ValueError("trajectory too short for the requested lags")
    # base times t = s .. T-k
    rows = np.hstack([Y[s - j : T - k + 1 - j] for j in range(1, s + 1)])
    target = Y[s + k : T + 1]
    coef, *_ = np.linalg.lstsq(rows, target, rcond=None)  # (s*m, m)
    blocks = np.stack([coef[(j - 1) * m : j * m, :].T for j in range(1, s + 1)])
    return StabilizerCoefficients(blocks)


def stabilized_second_moment(
    system: SystemMatrices,
    alpha: StabilizerCoefficients,
    k: int,
    process_cov: np.ndarray,
    observation_cov: np.ndarray,
    tail: int = 0,
) -> float:
    """Exact E||yhat_t||^2 for the stabilized observation at large t.

    Sums the observation-noise, feedthrough, and leading-window contributions
    from the polynomial partials, plus ``tail`` terms of the F-driven series
    (zero for annihilating coefficients; the initial state is assumed drawn
    with F-invisible mean, i.e. its term vanishes when F does).
    """
    a = alpha.blocks
    s = alpha.s
    Sz = np.asarray(observation_cov, float)
    Sw = np.asarray(process_cov, float)
    V = float(np.trace(Sz))
    for j in range(s):
        V += float(np.trace(a[j] @ Sz @ a[j].T))
    V += float(np.sum(system.D**2))
    for j in range(s):
        V += float(np.sum((a[j] @ system.D) ** 2))
    F, partials = matrix_poly_F(system, a, k)
    for i in range(1, k + s + 1):
        P = partials[i - 1]
        V += float(np.sum((P @ system.B) ** 2))
        V += float(np.trace(P @ Sw @ P.T))
    M = F
    for _ in range(int(tail)):
        V += float(np.sum((M @ system.B) ** 2))
        V += float(np.trace(M @ Sw @ M.T))
        M = M @ system.A
    return V


# calibration defaults (desk-scale; see the project ledger for rationale)
_C_P0 = 2.0
_C_P1 = 25.0


def calibrate(
    system: Optional[SystemMatrices],
    noise: Optional[NoiseModel],
    s: int,
    horizon: int,
    k: Optional[int] = None,
    eps: float = 0.1,
    mode: str = "practical",
    c0: float = 20.0,
    P0: Optional[float] = None,
    P1: Optional[float] = None,
    P2: Optional[float] = None,
) -> ConstraintConfig:
    """Derive a ConstraintConfig from a known calibration system.

    P0 is the feasibility bound kappa * ||C A^{k+s}||_F (times a small safety
    factor); P1 is a multiple of the oracle residual's root second moment, so
    the residual balls are comfortably feasible for the annihilating
    coefficients yet exclude alpha = 0 once the raw observations outgrow
    them.  Checkpoint spacing: paper mode uses L = P2 log^2(1/eps) / eps^2
    with num_checkpoints = 100 s n m^2 K log L; practical mode keeps that L
    as a cap but spreads ceil(c0 log L) checkpoints across the horizon.
    Explicit P0/P1/P2 values override the calibrated ones; with P0 and P1
    both pinned (paper mode also needs P2 left to its P1 default or pinned),
    no reference system or noise model is consulted and both may be None.
    """
    if mode not in ("practical", "paper"):
        raise ValueError(f"mode must be 'practical' or 'paper', got {mode!r}")
    if k is None:
        k = 10 * s
    k = int(k)

    if P0 is None or P1 is None:
        if system is None or noise is None:
            raise ValueError(
                "calibration needs a reference system and noise model unless "
                "P0 and P1 are given explicitly"
            )
        report = condition_report(system, s, kappa=np.inf)
        if report.degenerate:
            raise ValueError(
                "calibration system has a rank-deficient depth-s stack"
            )
        kappa = max(report.kappa_obs, report.kappa_ctrl)
        M = system.C
        for _ in range(k + s):
            M = M @ system.A
        if P0 is None:
            P0 = _C_P0 * kappa * float(np.linalg.norm(M, "fro"))
        if P1 is None:
            alpha_star = oracle_alpha(system, k, s)
            V = stabilized_second_moment(
                system,
                alpha_star,
                k,
                process_cov=noise.process.covariance,
                observation_cov=noise.observation.covariance,
            )
            P1 = _C_P1 * math.sqrt(max(V, 1e-30))
    if P2 is None:
        P2 = 10.0 * P1

    L_paper = max(int(math.ceil(P2 * math.log(1.0 / eps) ** 2 / eps**2)), s + 1)
    if mode == "paper":
        if system is None or noise is None:
            raise ValueError("paper-mode checkpoint counts need system and noise")
        K = noise.input.K
        num = int(math.ceil(100 * s * system.n * system.m**2 * K * math.log(L_paper)))
        L = L_paper
    else:
        num = max(int(math.ceil(c0 * math.log(L_paper))), 1)
        L = min(L_paper, (horizon - k - s) // num)
    if L < s:
        raise ValueError(
            f"horizon {horizon} cannot fit {num} checkpoints with lag s={s}, k={k}"
        )
    return ConstraintConfig(
        s=s, k=k, P0=float(P0), P1=float(P1), L=int(L),
        num_checkpoints=int(num), eps=float(eps),
    )

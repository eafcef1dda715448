"""Ten end-to-end acceptance checks, each reporting one pass/fail line.

Every check times itself against a pinned runtime budget and records the
measured quantity next to its tolerance, so the terminal summary reads as a
scorecard.  Statistical checks run on fixed seeds; sampling checks were sized
so the measured statistic sits well inside its tolerance (3 or 5 standard
errors), not at the boundary.
"""
import math
import time

import numpy as np
import pytest

from momentsid.algebra import (
    condition_report,
    potential,
    power_norm_check,
    spectral_radius,
)
from momentsid.config import StabilizerSettings, make_family
from momentsid.hokalman import (
    ho_kalman,
    markov_distance,
    realization_error_bound,
)
from momentsid.lds import (
    DISTRIBUTION_KINDS,
    DistributionSpec,
    NoiseModel,
    SystemMatrices,
    closed_form_y,
    sample_distribution,
    simulate,
)
from momentsid.lowerbound import (
    build_unobservable,
    c_generic_check,
    demo_row,
    indistinguishability_bound,
    process_covariance,
)
from momentsid.markov import (
    MarkovEstimate,
    stabilized_demo_experiment,
    true_markov,
    variance_blowup_experiment,
)
from momentsid.pipeline import run_identify
from momentsid.probes import anti_concentration_probe
from momentsid.stabilizer import oracle_alpha


def _verdict(ok: bool) -> str:
    return "pass" if ok else "FAIL"


# --- 1: simulator fidelity -------------------------------------------------


def test_simulate_matches_moving_average_form(criterion_line):
    start = time.perf_counter()
    gen = np.random.default_rng(1001)
    worst = 0.0
    for trial in range(100):
        n = int(gen.integers(1, 5))
        m = int(gen.integers(1, 4))
        p = int(gen.integers(1, 4))
        T = int(gen.integers(1, 51))
        A = gen.standard_normal((n, n))
        rho = spectral_radius(A)
        if rho < 1e-12:
            A, rho = np.eye(n), 1.0
        # stay in the marginally stable regime so 50 steps of two different
        # evaluation orders cannot amplify rounding past the tolerance
        A *= (1.0 if trial % 4 == 0 else float(gen.uniform(0.2, 1.0))) / rho
        system = SystemMatrices(
            A=A,
            B=gen.standard_normal((n, p)),
            C=gen.standard_normal((m, n)),
            D=gen.standard_normal((m, p)),
        )
        noise = NoiseModel.iid_gaussian(
            n, m, p, sigma_w=0.7, sigma_z=1.3, sigma_x0=2.0
        )
        traj = simulate(system, noise, T, seed=trial)
        for t in range(T + 1):
            y = closed_form_y(
                system,
                traj.inputs,
                traj.process_noise,
                traj.observation_noise,
                traj.states[0],
                t,
            )
            worst = max(worst, float(np.max(np.abs(traj.observations[t] - y))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10.0
    criterion_line(
        f"criterion  1 simulator vs closed form: {_verdict(ok)} "
        f"(100 systems, max|diff|={worst:.2e} <= 1e-10, {elapsed:.1f}s < 10s)"
    )
    assert worst <= 1e-10
    assert elapsed < 10.0


# --- 2: moment-identity unbiasedness ---------------------------------------


def _rotation_system() -> SystemMatrices:
    th = 0.7
    return SystemMatrices(
        A=np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]]),
        B=np.array([[1.0], [0.4]]),
        C=np.array([[1.0, 0.0], [0.5, 1.0]]),
        D=np.array([[0.2], [-0.1]]),
    )


def test_cross_covariance_identity_unbiased(criterion_line):
    """Across 1e4 independent rollouts the mean of yhat_{t+j} u_t^T must hit
    the true impulse-response block X_j inside 3 standard errors for every
    j <= 5, on gaussian and laplace inputs alike."""
    start = time.perf_counter()
    k, trials, seed = 5, 10_000, 7
    scalar = SystemMatrices(A=np.eye(1), B=np.eye(1), C=np.eye(1), D=np.eye(1))
    jordan, _ = make_family({"family": "jordan-integrator"})
    cases = ((scalar, 1), (_rotation_system(), 2), (jordan, 3))
    worst = 0.0
    for system, s in cases:
        n, m, p = system.n, system.m, system.p
        t_u = k + s + 1
        T = t_u + 5
        alpha = oracle_alpha(system, k, s)
        X = true_markov(system, k)
        for kind in ("gaussian", "laplace"):
            spec = DistributionSpec.menu(kind, p)
            U = sample_distribution(spec, trials * (T + 1), seed)
            U = U.reshape(trials, T + 1, p)
            g = np.random.default_rng(seed + 1)
            W = 0.5 * g.standard_normal((trials, T + 1, n))
            Z = 0.8 * g.standard_normal((trials, T + 1, m))
            Y = np.empty((trials, T + 1, m))
            x = np.zeros((trials, n))
            for t in range(T + 1):
                Y[:, t] = x @ system.C.T + U[:, t] @ system.D.T + Z[:, t]
                x = x @ system.A.T + U[:, t] @ system.B.T + W[:, t]
            for j in range(6):
                tau = t_u + j
                yhat = Y[:, tau].copy()
                for i in range(1, s + 1):
                    yhat -= Y[:, tau - k - i] @ alpha.blocks[i - 1].T
                V = yhat[:, :, None] * U[:, t_u][:, None, :]
                mean = V.mean(axis=0)
                se = math.sqrt(float(np.sum(V.var(axis=0, ddof=1))) / trials)
                dev = float(np.linalg.norm(mean - X[j]))
                worst = max(worst, dev / (3.0 * se))
    elapsed = time.perf_counter() - start
    ok = worst <= 1.0 and elapsed < 120.0
    criterion_line(
        f"criterion  2 cross-covariance unbiased: {_verdict(ok)} "
        f"(3 systems x 2 input laws x j<=5, worst dev/(3 SE)={worst:.2f} <= 1, "
        f"{elapsed:.1f}s < 120s)"
    )
    assert worst <= 1.0
    assert elapsed < 120.0


# --- 3: variance divergence and the stabilized fix -------------------------


def test_naive_divergence_and_stabilized_accuracy(criterion_line):
    start = time.perf_counter()
    naive = {
        T: variance_blowup_experiment(T, trials=2000, seed=0).second_moment
        for T in (100, 1000, 10_000)
    }
    stab = stabilized_demo_experiment(100_000, trials=200, seed=0)
    rms = math.sqrt(stab.second_moment)
    elapsed = time.perf_counter() - start
    ok = min(naive.values()) >= 15.0 and rms <= 0.5 and elapsed < 300.0
    naive_str = ", ".join(f"{t:g}:{v:.1f}" for t, v in naive.items())
    criterion_line(
        f"criterion  3 variance divergence: {_verdict(ok)} "
        f"(naive E[Q^2] {{{naive_str}}} >= 15; stabilized rms error "
        f"{rms:.3f} <= 0.5 at T=1e5, {elapsed:.1f}s < 300s)"
    )
    assert min(naive.values()) >= 15.0
    assert rms <= 0.5
    assert elapsed < 300.0


# --- 4: power-norm certificate ---------------------------------------------


def test_power_norm_bound_holds_exactly(criterion_line):
    start = time.perf_counter()
    gen = np.random.default_rng(4004)
    worst_margin = math.inf
    for i in range(100):
        n = int(gen.integers(1, 6))
        A = gen.standard_normal((n, n))
        rho = spectral_radius(A)
        if rho < 1e-12:
            A, rho = np.eye(n), 1.0
        target = 1.0 if i % 3 == 0 else float(gen.uniform(0.2, 1.0))
        A = A * (target / rho)
        for L in (10, 100, 1000):
            chk = power_norm_check(A, L)
            worst_margin = min(worst_margin, chk.log_bound - chk.log_actual)
    elapsed = time.perf_counter() - start
    ok = worst_margin >= 0.0 and elapsed < 30.0
    criterion_line(
        f"criterion  4 power-norm bound: {_verdict(ok)} "
        f"(100 matrices x L in {{10,100,1000}}, min log margin "
        f"{worst_margin:.2f} >= 0, {elapsed:.1f}s < 30s)"
    )
    assert worst_margin >= 0.0
    assert elapsed < 30.0


# --- 5: anti-concentration across the distribution menu --------------------


def test_menu_distributions_anti_concentrate(criterion_line):
    start = time.perf_counter()
    betas = (-1.0, -0.5, 0.0, 0.5, 1.0)
    worst = 0.0
    for kind in DISTRIBUTION_KINDS:
        spec = DistributionSpec.menu(kind, 1)
        res = anti_concentration_probe(spec, betas, samples=100_000, seed=55)
        worst = max(worst, res.max_probability / res.bound())
    elapsed = time.perf_counter() - start
    ok = worst <= 1.0 and elapsed < 60.0
    criterion_line(
        f"criterion  5 anti-concentration: {_verdict(ok)} "
        f"({len(DISTRIBUTION_KINDS)} laws x 5 shifts, worst prob/bound="
        f"{worst:.3f} <= 1, {elapsed:.1f}s < 60s)"
    )
    assert worst <= 1.0
    assert elapsed < 60.0


# --- 6: realization exactness and perturbation shape ------------------------


def test_realization_exact_and_perturbation_scale(criterion_line):
    start = time.perf_counter()
    n = s = 3
    m = p = 2
    k = 2 * s
    gen = np.random.default_rng(66)
    accepted = tries = 0
    worst_exact = 0.0
    worst_ratio = 0.0
    while accepted < 20 and tries < 400:
        tries += 1
        A = gen.standard_normal((n, n))
        A *= gen.uniform(0.3, 0.95) / spectral_radius(A)
        B = gen.standard_normal((n, p))
        B *= gen.uniform(1.0, 2.0) / np.linalg.norm(B, 2)
        C = gen.standard_normal((m, n))
        C *= gen.uniform(1.0, 2.0) / np.linalg.norm(C, 2)
        system = SystemMatrices(A=A, B=B, C=C, D=gen.standard_normal((m, p)))
        if not condition_report(system, s, kappa=50.0).well_behaved:
            continue
        accepted += 1
        blocks = true_markov(system, k)
        real = ho_kalman(
            MarkovEstimate(blocks=blocks, k=k, sample_count=0, kind="exact"),
            s=s,
            n=n,
        )
        worst_exact = max(
            worst_exact, markov_distance(system, real.system, 2 * s)
        )
        for eta in (1e-6, 1e-4, 1e-2):
            E = gen.standard_normal(blocks.shape)
            E *= eta / np.linalg.norm(E)
            dist_in = float(sum(np.linalg.norm(E[j]) for j in range(k + 1)))
            noisy = ho_kalman(
                MarkovEstimate(blocks=blocks + E, k=k, sample_count=0),
                s=s,
                n=n,
            )
            dist_out = markov_distance(system, noisy.system, 2 * s)
            worst_ratio = max(
                worst_ratio, dist_out / realization_error_bound(n, dist_in)
            )
    elapsed = time.perf_counter() - start
    ok = (
        accepted == 20
        and worst_exact <= 1e-8
        and worst_ratio <= 10.0
        and elapsed < 60.0
    )
    criterion_line(
        f"criterion  6 realization recovery: {_verdict(ok)} "
        f"(20 systems, exact max dist {worst_exact:.1e} <= 1e-8; perturbed "
        f"dist/scale <= {worst_ratio:.2f} (limit 10), {elapsed:.1f}s < 60s)"
    )
    assert accepted == 20
    assert worst_exact <= 1e-8
    assert worst_ratio <= 10.0
    assert elapsed < 60.0


# --- 7 and 8 share five seeded end-to-end runs ------------------------------


@pytest.fixture(scope="session")
def jordan_runs():
    """Identification runs on the marginally stable 3-state family: seeds
    0..4, horizons 2e4 and 2e5, practical mode, unit noise."""
    system, _ = make_family({"family": "jordan-integrator"})
    noise = NoiseModel.iid_gaussian(n=3, m=2, p=2, sigma_w=1.0, sigma_z=1.0)
    settings = StabilizerSettings(s=2, k=4)
    start = time.perf_counter()
    runs = {}
    for seed in range(5):
        for T in (20_000, 200_000):
            traj = simulate(system, noise, T, seed=seed)
            runs[(seed, T)] = run_identify(
                traj,
                settings,
                order=3,
                mode="practical",
                truth=system,
                noise=noise,
                seed=seed,
            )
    return {
        "system": system,
        "runs": runs,
        "elapsed": time.perf_counter() - start,
    }


def test_identification_error_halves_with_horizon(criterion_line, jordan_runs):
    runs = jordan_runs["runs"]
    ratios = []
    dists = []
    for seed in range(5):
        e_small = runs[(seed, 20_000)].report.truth_eval["max_block_error"]
        e_large = runs[(seed, 200_000)].report.truth_eval["max_block_error"]
        ratios.append(e_large / e_small)
        dists.append(runs[(seed, 200_000)].report.truth_eval["markov_distance"])
    med_ratio = float(np.median(ratios))
    med_dist = float(np.median(dists))
    elapsed = jordan_runs["elapsed"]
    ok = med_ratio <= 0.5 and med_dist <= 0.2 and elapsed < 900.0
    criterion_line(
        f"criterion  7 end-to-end identification: {_verdict(ok)} "
        f"(5 seeds, median error ratio 2e5/2e4 = {med_ratio:.2f} <= 0.5, "
        f"median markov distance {med_dist:.3f} <= 0.2, "
        f"{elapsed:.0f}s < 900s)"
    )
    assert med_ratio <= 0.5
    assert med_dist <= 0.2
    assert elapsed < 900.0


def test_solved_coefficients_control_potential(criterion_line, jordan_runs):
    start = time.perf_counter()
    system = jordan_runs["system"]
    worst = 0.0
    for result in jordan_runs["runs"].values():
        cfg = result.constraint_config
        value = potential(system, result.alpha, cfg.k, cfg.L).G
        bound = system.m * (200.0 * cfg.P1 * math.log(1.0 / cfg.eps)) ** 2
        worst = max(worst, value / bound)
    elapsed = time.perf_counter() - start
    ok = worst <= 1.0
    criterion_line(
        f"criterion  8 potential control: {_verdict(ok)} "
        f"(10 runs, worst G/(m (200 P1 log(1/eps))^2) = {worst:.2e} <= 1, "
        f"{elapsed:.1f}s)"
    )
    assert worst <= 1.0


# --- 9: distributional closeness, exact and sampled -------------------------


def test_path_covariance_closeness_and_fidelity(criterion_line):
    start = time.perf_counter()
    T = 10
    worst_mult = 0.0
    for delta in (1e-2, 1e-3, 1e-4):
        pair = build_unobservable(3, delta, 1.0, seed=0)
        witness = c_generic_check(pair.sys.A, pair.v, 0.4)
        row = demo_row(pair, witness.u, T)
        bound = indistinguishability_bound(T, 1.0, delta)
        # the witness direction is unit up to float rounding
        assert math.isclose(row.predicted_bound, bound, rel_tol=1e-12)
        worst_mult = max(worst_mult, row.mult_factor / bound)

    # scalar path covariance at T = 3: exact enumeration, then Monte Carlo
    a, b, c, sw = 0.8, 0.9, 1.1, 0.5
    scalar = SystemMatrices(A=[[a]], B=[[b]], C=[[c]], D=[[0.0]])
    cov = process_covariance(scalar, np.array([[sw**2]]), 3)

    def weight(t, i):
        return c * a ** (t - 1 - i) if i < t else 0.0

    direct = np.zeros((8, 8))
    direct[:4, :4] = np.eye(4)
    for t in range(4):
        for i in range(4):
            direct[4 + t, i] = direct[i, 4 + t] = weight(t, i) * b
        for t2 in range(4):
            acc = sum(
                weight(t, i) * weight(t2, i) * (b**2 + sw**2) for i in range(4)
            )
            direct[4 + t, 4 + t2] = acc + (1.0 if t == t2 else 0.0)
    exact_err = float(np.max(np.abs(cov.sigma - direct)))

    N = 200_000
    g = np.random.default_rng(909)
    U = g.standard_normal((N, 4))
    W = sw * g.standard_normal((N, 4))
    Z = g.standard_normal((N, 4))
    Y = np.empty((N, 4))
    x = np.zeros(N)
    for t in range(4):
        Y[:, t] = c * x + Z[:, t]
        x = a * x + b * U[:, t] + W[:, t]
    V = np.hstack([U, Y])
    emp = V.T @ V / N
    se = np.sqrt(
        (np.outer(np.diag(cov.sigma), np.diag(cov.sigma)) + cov.sigma**2) / N
    )
    mc_ratio = float(np.max(np.abs(emp - cov.sigma) / (5.0 * se)))

    elapsed = time.perf_counter() - start
    ok = (
        worst_mult <= 1.0
        and exact_err <= 1e-10
        and mc_ratio <= 1.0
        and elapsed < 120.0
    )
    criterion_line(
        f"criterion  9 covariance closeness: {_verdict(ok)} "
        f"(mult/bound <= {worst_mult:.3f} over three deltas; scalar T=3 "
        f"exact err {exact_err:.1e} <= 1e-10, MC dev/(5 SE)={mc_ratio:.2f} "
        f"<= 1, {elapsed:.1f}s < 120s)"
    )
    assert worst_mult <= 1.0
    assert exact_err <= 1e-10
    assert mc_ratio <= 1.0
    assert elapsed < 120.0


# --- 10: parameter gap despite near-identical behavior ----------------------


def test_parameter_gap_survives_indistinguishability(criterion_line):
    start = time.perf_counter()
    delta, c = 1e-4, 0.4
    pair = build_unobservable(3, delta, 1.0, seed=0)
    witness = c_generic_check(pair.sys.A, pair.v, c)
    row = demo_row(pair, witness.u, 10)
    gap_floor = 0.4 * c**2
    elapsed = time.perf_counter() - start
    ok = (
        witness.ok
        and row.markov_dist <= 11.0 * delta
        and row.parameter_gap > gap_floor
        and elapsed < 60.0
    )
    criterion_line(
        f"criterion 10 gap vs indistinguishability: {_verdict(ok)} "
        f"(markov dist {row.markov_dist:.2e} <= 11 delta = {11 * delta:.1e}; "
        f"aligned gap {row.parameter_gap:.3f} > 0.4 c^2 = {gap_floor:.3f}, "
        f"{elapsed:.1f}s < 60s)"
    )
    assert witness.ok
    assert row.markov_dist <= 11.0 * delta
    assert row.parameter_gap > gap_floor
    assert elapsed < 60.0

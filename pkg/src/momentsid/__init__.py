"""Moment-based identification of marginally stable linear dynamical systems
from a single input/output trajectory, plus the constructions showing where
identification must fail.
"""
import os as _os

# honor SYSID_THREADS before numpy configures its BLAS thread pools; values
# the user already exported win
_threads = _os.environ.get("SYSID_THREADS", "")
if _threads.isdigit() and int(_threads) > 0:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)

from .algebra import (
    ConditionReport,
    PotentialValue,
    PowerNormCheck,
    condition_report,
    controllability_matrix,
    matrix_poly_F,
    observability_matrix,
    potential,
    power_norm_check,
    spectral_radius,
)
from .config import ConfigError, StabilizerSettings, jordan_integrator, random_stable
from .hokalman import (
    EvalReport,
    HankelPair,
    Realization,
    align_similarity,
    hankel_from_markov,
    ho_kalman,
    markov_distance,
    realization_error_bound,
    realization_from_system,
)
from .lds import (
    DEFAULT_K,
    DISTRIBUTION_KINDS,
    DistributionSpec,
    NoiseModel,
    SystemMatrices,
    Trajectory,
    closed_form_y,
    sample_distribution,
    simulate,
)
from .lowerbound import (
    ClosenessReport,
    DemoRow,
    GenericityWitness,
    ProcessCovariance,
    UnobservablePair,
    build_unobservable,
    c_generic_check,
    covariance_closeness,
    demo_row,
    indistinguishability_bound,
    perturbed_system,
    process_covariance,
    toeplitz_P,
    verify_pair,
)
from .markov import (
    MarkovEstimate,
    VarianceReport,
    demo_noise,
    demo_system,
    estimate_markov,
    naive_estimate,
    stabilized_demo_experiment,
    stabilized_observations,
    true_markov,
    variance_blowup_experiment,
    windowed_median_estimate,
)
from .pipeline import IdentifyResult, PipelineError, RunReport, run_identify
from .probes import (
    AntiConcentrationResult,
    anti_concentration_probe,
    hyper_ratio,
    hypercontractivity_probe,
)
from .rng import substream, trial_seeds
from .stabilizer import (
    Constraint,
    ConstraintConfig,
    ConstraintSystem,
    FeasibilitySolution,
    StabilizerCoefficients,
    build_constraints,
    calibrate,
    least_squares_alpha,
    oracle_alpha,
    solve_feasibility,
    stabilized_second_moment,
)

__version__ = "0.1.0"

__all__ = [
    "AntiConcentrationResult",
    "ClosenessReport",
    "ConditionReport",
    "ConfigError",
    "Constraint",
    "ConstraintConfig",
    "ConstraintSystem",
    "DEFAULT_K",
    "DISTRIBUTION_KINDS",
    "DemoRow",
    "DistributionSpec",
    "EvalReport",
    "FeasibilitySolution",
    "GenericityWitness",
    "HankelPair",
    "IdentifyResult",
    "MarkovEstimate",
    "NoiseModel",
    "PipelineError",
    "PotentialValue",
    "PowerNormCheck",
    "ProcessCovariance",
    "Realization",
    "RunReport",
    "StabilizerCoefficients",
    "StabilizerSettings",
    "SystemMatrices",
    "Trajectory",
    "UnobservablePair",
    "VarianceReport",
    "align_similarity",
    "anti_concentration_probe",
    "build_constraints",
    "build_unobservable",
    "c_generic_check",
    "calibrate",
    "closed_form_y",
    "condition_report",
    "controllability_matrix",
    "covariance_closeness",
    "demo_noise",
    "demo_row",
    "demo_system",
    "estimate_markov",
    "hankel_from_markov",
    "ho_kalman",
    "hyper_ratio",
    "hypercontractivity_probe",
    "indistinguishability_bound",
    "jordan_integrator",
    "least_squares_alpha",
    "markov_distance",
    "matrix_poly_F",
    "naive_estimate",
    "observability_matrix",
    "oracle_alpha",
    "perturbed_system",
    "potential",
    "power_norm_check",
    "process_covariance",
    "random_stable",
    "realization_error_bound",
    "realization_from_system",
    "run_identify",
    "sample_distribution",
    "simulate",
    "solve_feasibility",
    "spectral_radius",
    "stabilized_demo_experiment",
    "stabilized_observations",
    "stabilized_second_moment",
    "substream",
    "toeplitz_P",
    "trial_seeds",
    "true_markov",
    "variance_blowup_experiment",
    "verify_pair",
    "windowed_median_estimate",
]

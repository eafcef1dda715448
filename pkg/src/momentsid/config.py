"""Experiment configuration: one JSON document (key ``schema: 1``) shared by
every subcommand, each of which reads only the sections it needs.  Validation
errors carry the offending key path; parse errors keep the line/column from
the JSON decoder.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .algebra import spectral_radius
from .lds import DISTRIBUTION_KINDS, DistributionSpec, NoiseModel, SystemMatrices
from .lowerbound import build_unobservable
from .markov import demo_system
from .rng import substream

SCHEMA_VERSION = 1
FAMILIES = ("random-stable", "jordan-integrator", "appendix-scalar", "unobservable")
# stream id for the random-stable family's matrix draws
_STREAM_FAMILY = 41


class ConfigError(Exception):
    """Invalid configuration; the message names the key path or line."""


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _expect(cfg: dict, path: str, key: str, types, default=None, required=False):
    if key not in cfg:
        if required:
            _fail(f"{path}.{key}" if path else key, "missing required key")
        return default
    value = cfg[key]
    if types is not None and not isinstance(value, types):
        names = (
            types.__name__
            if isinstance(types, type)
            else "/".join(t.__name__ for t in types)
        )
        _fail(f"{path}.{key}" if path else key,
              f"expected {names}, got {type(value).__name__}")
    return value


def load_config(path) -> dict:
    """Parse and schema-check one JSON config document."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    schema = cfg.get("schema")
    if schema != SCHEMA_VERSION:
        raise ConfigError(
            f"schema: expected {SCHEMA_VERSION}, got {schema!r}"
        )
    return cfg


def jordan_integrator() -> SystemMatrices:
    """The end-to-end demonstration family: a single eigenvalue-1 Jordan
    block (written with coupling 0.12, a diagonal rescaling of the classical
    form), two outputs reading the first two states, inputs driving the last
    two.  The coupling and the output/feedthrough scales 0.4 and 0.1 trade
    off the annihilator's noise amplification against the conditioning of
    the depth-2 Hankel; see the calibration notes in the identify pipeline.
    """
    A = np.eye(3)
    A[0, 1] = 0.12
    A[1, 2] = 0.12
    B = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    C = 0.4 * np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    D = 0.1 * np.eye(2)
    return SystemMatrices(A=A, B=B, C=C, D=D)


def random_stable(
    n: int, m: int, p: int, seed: int, spectral_radius_cap: float = 1.0
) -> SystemMatrices:
    """Entrywise standard normal matrices with A rescaled under the cap."""
    rng = substream(seed, _STREAM_FAMILY)
    A = rng.standard_normal((n, n))
    rho = spectral_radius(A)
    if rho > 0:
        A = A * (spectral_radius_cap / (rho * (1.0 + 1e-6)))
    B = rng.standard_normal((n, p))
    C = rng.standard_normal((m, n))
    D = rng.standard_normal((m, p))
    return SystemMatrices(A=A, B=B, C=C, D=D)


def make_family(spec: dict, path: str = "system") -> Tuple[SystemMatrices, dict]:
    """Instantiate a generator-family spec; returns (system, resolved echo)."""
    family = _expect(spec, path, "family", str, required=True)
    if family not in FAMILIES:
        _fail(f"{path}.family", f"unknown family {family!r}; expected {FAMILIES}")
    if family == "appendix-scalar":
        return demo_system(), {"family": family, "n": 1, "m": 1, "p": 1}
    if family == "jordan-integrator":
        sys = jordan_integrator()
        return sys, {"family": family, "n": sys.n, "m": sys.m, "p": sys.p}
    if family == "random-stable":
        n = int(_expect(spec, path, "n", int, required=True))
        m = int(_expect(spec, path, "m", int, default=n))
        p = int(_expect(spec, path, "p", int, default=n))
        seed = int(_expect(spec, path, "seed", int, default=0))
        cap = float(_expect(spec, path, "spectral_radius_cap", (int, float),
                            default=1.0))
        if min(n, m, p) < 1:
            _fail(path, "dimensions must be positive")
        if not 0 < cap <= 1.0 + 1e-9:
            _fail(f"{path}.spectral_radius_cap", "must lie in (0, 1]")
        sys = random_stable(n, m, p, seed, cap)
        return sys, {"family": family, "n": n, "m": m, "p": p, "seed": seed,
                     "spectral_radius_cap": cap}
    # unobservable
    n = int(_expect(spec, path, "n", int, default=3))
    delta = float(_expect(spec, path, "delta", (int, float), default=1e-4))
    lam = float(_expect(spec, path, "lambda", (int, float), default=1.0))
    seed = int(_expect(spec, path, "seed", int, default=0))
    kind = _expect(spec, path, "kind", str, default="unobservable")
    try:
        pair = build_unobservable(n, delta, lam, seed, kind=kind)
    except ValueError as exc:
        _fail(path, str(exc))
    return pair.sys, {"family": family, "n": n, "delta": delta, "lambda": lam,
                      "seed": seed, "kind": kind}


def resolve_system(cfg: dict, required: bool = True):
    """The configured system: explicit matrices or a generator family.

    Returns (SystemMatrices or None, echo dict or None).
    """
    spec = _expect(cfg, "", "system", dict)
    if spec is None:
        if required:
            _fail("system", "missing required key")
        return None, None
    if "family" in spec:
        return make_family(spec)
    for key in ("A", "B", "C", "D"):
        _expect(spec, "system", key, list, required=True)
    try:
        sys = SystemMatrices.from_dict(spec)
    except (ValueError, KeyError) as exc:
        _fail("system", str(exc))
    return sys, sys.to_dict()


def resolve_noise(cfg: dict, system: SystemMatrices):
    """Noise section: iid channels with scalar deviations and a chosen
    input distribution kind (identity covariance always)."""
    spec = _expect(cfg, "", "noise", dict, default={})
    path = "noise"
    sigma_w = float(_expect(spec, path, "sigma_w", (int, float), default=1.0))
    sigma_z = float(_expect(spec, path, "sigma_z", (int, float), default=1.0))
    sigma_x0 = float(_expect(spec, path, "sigma_x0", (int, float), default=0.0))
    kind = _expect(spec, path, "input_kind", str, default="gaussian")
    if kind not in DISTRIBUTION_KINDS:
        _fail(f"{path}.input_kind",
              f"unknown kind {kind!r}; expected {DISTRIBUTION_KINDS}")
    if min(sigma_w, sigma_z, sigma_x0) < 0:
        _fail(path, "deviations must be nonnegative")
    noise = NoiseModel(
        input=DistributionSpec.menu(kind, system.p, 1.0),
        process=DistributionSpec.gaussian(sigma_w**2 * np.eye(system.n)),
        observation=DistributionSpec.gaussian(sigma_z**2 * np.eye(system.m)),
        initial=DistributionSpec.gaussian(sigma_x0**2 * np.eye(system.n)),
    )
    echo = {"sigma_w": sigma_w, "sigma_z": sigma_z, "sigma_x0": sigma_x0,
            "input_kind": kind}
    return noise, echo


@dataclass(frozen=True)
class StabilizerSettings:
    """Raw stabilizer knobs; calibration turns them into a ConstraintConfig."""

    s: int
    k: Optional[int] = None
    eps: float = 0.1
    c0: float = 20.0
    P0: Optional[float] = None
    P1: Optional[float] = None
    P2: Optional[float] = None
    tol: float = 1e-8
    max_iters: int = 100_000

    def echo(self) -> dict:
        return {
            "s": self.s,
            "k": self.k,
            "eps": self.eps,
            "c0": self.c0,
            "P0": self.P0,
            "P1": self.P1,
            "P2": self.P2,
            "tol": self.tol,
            "max_iters": self.max_iters,
        }


def resolve_stabilizer(cfg: dict) -> StabilizerSettings:
    spec = _expect(cfg, "", "stabilizer", dict, required=True)
    path = "stabilizer"
    s = int(_expect(spec, path, "s", int, required=True))
    if s < 1:
        _fail(f"{path}.s", "must be positive")
    k = _expect(spec, path, "k", int)
    eps = float(_expect(spec, path, "eps", (int, float), default=0.1))
    if not 0 < eps < 1:
        _fail(f"{path}.eps", "must lie in (0, 1)")
    c0 = float(_expect(spec, path, "c0", (int, float), default=20.0))
    overrides = {}
    for key in ("P0", "P1", "P2"):
        val = _expect(spec, path, key, (int, float))
        overrides[key] = None if val is None else float(val)
    tol = float(_expect(spec, path, "tol", (int, float), default=1e-8))
    max_iters = int(_expect(spec, path, "max_iters", int, default=100_000))
    return StabilizerSettings(
        s=s, k=None if k is None else int(k), eps=eps, c0=c0,
        P0=overrides["P0"], P1=overrides["P1"], P2=overrides["P2"],
        tol=tol, max_iters=max_iters,
    )


def resolve_mode(cfg: dict) -> str:
    mode = _expect(cfg, "", "mode", str, default="practical")
    if mode not in ("practical", "paper"):
        _fail("mode", f"expected 'practical' or 'paper', got {mode!r}")
    return mode


def resolve_horizon(cfg: dict) -> int:
    horizon = _expect(cfg, "", "horizon", int, required=True)
    if horizon < 1:
        _fail("horizon", "must be at least 1")
    return int(horizon)


def resolve_order(cfg: dict, system: Optional[SystemMatrices]) -> int:
    order = _expect(cfg, "", "order", int)
    if order is None:
        if system is None:
            _fail("order", "required when no system is configured")
        return system.n
    if order < 1:
        _fail("order", "must be positive")
    return int(order)


def resolve_seed(cfg: dict, override: Optional[int] = None) -> int:
    if override is not None:
        return int(override)
    return int(_expect(cfg, "", "seed", int, default=0))


def lowerbound_section(cfg: dict) -> dict:
    spec = _expect(cfg, "", "lowerbound", dict, default={})
    path = "lowerbound"
    n = int(_expect(spec, path, "n", int, default=3))
    deltas = _expect(spec, path, "deltas", list, default=[1e-2, 1e-3, 1e-4])
    t_grid = _expect(spec, path, "T_grid", list, default=[10])
    lam = float(_expect(spec, path, "lambda", (int, float), default=1.0))
    kind = _expect(spec, path, "kind", str, default="unobservable")
    c = float(_expect(spec, path, "c", (int, float), default=0.0))
    seed = _expect(spec, path, "seed", int)
    for name, grid in (("deltas", deltas), ("T_grid", t_grid)):
        if not grid or not all(isinstance(x, (int, float)) for x in grid):
            _fail(f"{path}.{name}", "must be a nonempty list of numbers")
    if any(t < 0 for t in t_grid):
        _fail(f"{path}.T_grid", "horizons must be nonnegative")
    return {
        "n": n,
        "deltas": [float(d) for d in deltas],
        "T_grid": [int(t) for t in t_grid],
        "lambda": lam,
        "kind": kind,
        "c": c,
        "seed": None if seed is None else int(seed),
    }


def variance_section(cfg: dict) -> dict:
    spec = _expect(cfg, "", "variance", dict, default={})
    path = "variance"
    t_grid = _expect(spec, path, "T_grid", list, default=[100, 1000, 10000])
    trials = int(_expect(spec, path, "trials", int, default=2000))
    k = int(_expect(spec, path, "k", int, default=10))
    stabilized_T = _expect(spec, path, "stabilized_T", int)
    if not t_grid or not all(isinstance(x, int) and x >= 1 for x in t_grid):
        _fail(f"{path}.T_grid", "must be a nonempty list of positive integers")
    if trials < 1:
        _fail(f"{path}.trials", "must be positive")
    return {
        "T_grid": [int(t) for t in t_grid],
        "trials": trials,
        "k": k,
        "stabilized_T": None if stabilized_T is None else int(stabilized_T),
    }


def probe_section(cfg: dict) -> dict:
    spec = _expect(cfg, "", "probe", dict, default={})
    path = "probe"
    kind = _expect(spec, path, "kind", str, default="all")
    if kind != "all" and kind not in DISTRIBUTION_KINDS:
        _fail(f"{path}.kind",
              f"unknown kind {kind!r}; expected 'all' or {DISTRIBUTION_KINDS}")
    dim = int(_expect(spec, path, "dim", int, default=3))
    samples = int(_expect(spec, path, "samples", int, default=100_000))
    directions = int(_expect(spec, path, "directions", int, default=50))
    beta_grid = _expect(spec, path, "beta_grid", list,
                        default=[-1.0, -0.5, 0.0, 0.5, 1.0])
    if dim < 1 or samples < 10 or directions < 1:
        _fail(path, "dim/samples/directions out of range")
    if not all(isinstance(b, (int, float)) for b in beta_grid):
        _fail(f"{path}.beta_grid", "must be a list of numbers")
    return {
        "kind": kind,
        "dim": dim,
        "samples": samples,
        "directions": directions,
        "beta_grid": [float(b) for b in beta_grid],
    }

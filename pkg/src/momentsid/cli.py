"""Command-line entry point.

    sysid simulate|identify|lowerbound|variance-demo|probe
        --config <path> [--seed N] [--out <dir>] [--no-plot]

Every command reads one JSON config document (schema 1) and writes
deterministic CSV/JSON files (17-significant-digit floats) plus rendered
figures into the output directory.
"""
from __future__ import annotations

import functools
from pathlib import Path

import click
import numpy as np

from . import config as cfgmod
from . import persist, plots
from .lds import DISTRIBUTION_KINDS, DistributionSpec, simulate
from .lowerbound import build_unobservable, c_generic_check, demo_row
from .markov import stabilized_demo_experiment, variance_blowup_experiment
from .pipeline import PipelineError, run_identify
from .probes import anti_concentration_probe, hypercontractivity_probe


@click.group()
def main():
    """Moment-based identification of marginally stable linear systems."""


def _common(fn):
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False),
                  help="JSON experiment config (schema 1).")
    @click.option("--seed", type=int, default=None,
                  help="Override the config seed.")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False),
                  default=None, help="Output directory (default: config "
                  "'out' key, else current directory).")
    @click.option("--no-plot", is_flag=True, help="Skip figure rendering.")
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (cfgmod.ConfigError, PipelineError, ValueError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _prepare(config_path, seed, out_dir):
    cfg = cfgmod.load_config(config_path)
    seed = cfgmod.resolve_seed(cfg, seed)
    out = Path(out_dir or cfg.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return cfg, seed, out


@main.command(name="simulate")
@_common
def simulate_cmd(config_path, seed, out_dir, no_plot):
    """Roll out one trajectory and write its CSV (plus hidden channels on
    request)."""
    cfg, seed, out = _prepare(config_path, seed, out_dir)
    system, sys_echo = cfgmod.resolve_system(cfg)
    noise, _ = cfgmod.resolve_noise(cfg, system)
    horizon = cfgmod.resolve_horizon(cfg)
    traj = simulate(system, noise, horizon, seed)
    persist.save_trajectory(traj, out / "trajectory.csv")
    persist.save_system(system, out / "system.json")
    if cfg.get("write_hidden"):
        persist.save_hidden(traj, out / "hidden.csv")
    if not no_plot:
        plots.plot_trajectory(traj, out / "trajectory.png")
    u_rms = float(np.sqrt(np.mean(traj.inputs**2)))
    y_rms = float(np.sqrt(np.mean(traj.observations**2)))
    click.echo(
        f"simulated family={sys_echo.get('family', 'explicit')} T={horizon} "
        f"seed={seed} rms(u)={u_rms:.4g} rms(y)={y_rms:.4g} -> "
        f"{out / 'trajectory.csv'}"
    )


@main.command()
@_common
def identify(config_path, seed, out_dir, no_plot):
    """Learn (A, B, C, D) from a trajectory file.

    Reads the trajectory from the config's 'trajectory' key, else from
    <out>/trajectory.csv (the simulate default).
    """
    cfg, seed, out = _prepare(config_path, seed, out_dir)
    truth, sys_echo = cfgmod.resolve_system(cfg, required=False)
    noise = noise_echo = None
    if truth is not None:
        noise, noise_echo = cfgmod.resolve_noise(cfg, truth)
    settings = cfgmod.resolve_stabilizer(cfg)
    mode = cfgmod.resolve_mode(cfg)
    order = cfgmod.resolve_order(cfg, truth)
    traj_path = Path(cfg.get("trajectory") or out / "trajectory.csv")
    if not traj_path.exists():
        raise click.ClickException(
            f"no trajectory at {traj_path}; run `sysid simulate` first or set "
            "the 'trajectory' config key"
        )
    traj = persist.load_trajectory(traj_path)
    echo = {
        "system": sys_echo,
        "noise": noise_echo,
        "stabilizer": settings.echo(),
        "order": order,
        "mode": mode,
        "horizon": traj.horizon,
        "trajectory": str(traj_path),
    }
    result = run_identify(
        traj,
        settings,
        order=order,
        mode=mode,
        truth=truth,
        noise=noise,
        include_naive=truth is not None,
        seed=seed,
        config_echo=echo,
    )
    persist.dump_json(result.report.to_dict(), out / "report.json")
    persist.save_system(result.realization.system, out / "realization.json")
    persist.save_markov(result.estimate, out / "markov.json")
    if not no_plot:
        plots.plot_singular_values(
            result.realization.singular_values, order,
            out / "singular_values.png",
        )
        if result.report.truth_eval is not None:
            te = result.report.truth_eval
            plots.plot_block_errors(
                te["block_errors"], out / "block_errors.png",
                naive_errors=te.get("naive_block_errors"),
            )
    feas = result.report.feasibility
    line = (
        f"identified order={order} k={result.constraint_config.k} "
        f"feasible={feas['feasible']} refined={feas['refined']} "
        f"max_violation={feas['max_violation']:.3e}"
    )
    if result.report.truth_eval is not None:
        te = result.report.truth_eval
        line += (
            f" max_block_error={te['max_block_error']:.4g} "
            f"markov_distance={te['markov_distance']:.4g} "
            f"residual_total={te['residuals']['total']:.4g}"
        )
    click.echo(line)
    click.echo(f"report -> {out / 'report.json'}")


@main.command()
@_common
def lowerbound(config_path, seed, out_dir, no_plot):
    """Indistinguishability demo: close distributions, distant parameters."""
    cfg, seed, out = _prepare(config_path, seed, out_dir)
    sec = cfgmod.lowerbound_section(cfg)
    build_seed = sec["seed"] if sec["seed"] is not None else seed
    rows = []
    closeness = []
    for delta in sec["deltas"]:
        pair = build_unobservable(
            sec["n"], delta, sec["lambda"], build_seed, kind=sec["kind"]
        )
        witness = c_generic_check(pair.sys.A, pair.v, sec["c"])
        if sec["c"] > 0 and not witness.ok:
            raise click.ClickException(
                f"construction at delta={delta} is not {sec['c']}-generic "
                f"(best ratio {witness.ratio:.4f})"
            )
        for T in sec["T_grid"]:
            row = demo_row(pair, witness.u, T)
            rows.append(row)
            closeness.append(
                {
                    "delta": row.delta,
                    "T": row.T,
                    "mult_factor": row.mult_factor,
                    "tv_upper": row.tv_upper,
                    "predicted_bound": row.predicted_bound,
                }
            )
        click.echo(
            f"delta={delta:g}: generic ratio c={witness.ratio:.4f}, "
            f"{len(sec['T_grid'])} horizon(s)"
        )
    persist.save_demo_rows(rows, out / "lowerbound.csv")
    persist.dump_json(closeness, out / "closeness.json")
    if not no_plot:
        plots.plot_lowerbound(rows, out / "lowerbound.png")
    click.echo(f"{len(rows)} rows -> {out / 'lowerbound.csv'}")


@main.command(name="variance-demo")
@_common
def variance_demo(config_path, seed, out_dir, no_plot):
    """Second moment of the scalar demo's error: naive vs stabilized."""
    cfg, seed, out = _prepare(config_path, seed, out_dir)
    sec = cfgmod.variance_section(cfg)
    reports = []
    for T in sec["T_grid"]:
        reports.append(variance_blowup_experiment(T, sec["trials"], seed))
        if T >= sec["k"] + 3:
            reports.append(
                stabilized_demo_experiment(T, sec["trials"], seed, k=sec["k"])
            )
    if sec["stabilized_T"] is not None:
        reports.append(
            stabilized_demo_experiment(
                sec["stabilized_T"], sec["trials"], seed, k=sec["k"]
            )
        )
    persist.save_variance_rows(reports, out / "variance.csv")
    if not no_plot:
        plots.plot_variance(reports, out / "variance.png")
    for r in reports:
        click.echo(
            f"{r.kind:<11} T={r.T:<8} trials={r.trials} "
            f"E[err^2]={r.second_moment:.6g}"
        )
    click.echo(f"{len(reports)} rows -> {out / 'variance.csv'}")


@main.command()
@_common
def probe(config_path, seed, out_dir, no_plot):
    """Monte-Carlo checks of the input-distribution menu's moment bounds."""
    cfg, seed, out = _prepare(config_path, seed, out_dir)
    sec = cfgmod.probe_section(cfg)
    kinds = DISTRIBUTION_KINDS if sec["kind"] == "all" else (sec["kind"],)
    hyper = []
    anti = []
    for kind in kinds:
        spec = DistributionSpec.menu(kind, sec["dim"], 1.0)
        k_hat = hypercontractivity_probe(
            spec, sec["directions"], sec["samples"], seed
        )
        hyper.append(
            {"kind": kind, "dim": sec["dim"], "K_hat": k_hat, "K": spec.K,
             "ok": bool(k_hat <= spec.K * 1.05)}
        )
        scalar = DistributionSpec.menu(kind, 1, 1.0)
        res = anti_concentration_probe(
            scalar, np.array(sec["beta_grid"]), sec["samples"], seed
        )
        anti.append(
            {
                "kind": kind,
                "beta_grid": list(res.beta_grid),
                "probabilities": list(res.probabilities),
                "max_probability": res.max_probability,
                "bound": res.bound(),
                "ok": bool(res.max_probability <= res.bound()),
            }
        )
        click.echo(
            f"{kind:<14} K_hat={k_hat:.3f} (K={spec.K:g})  "
            f"max_hit={res.max_probability:.4f} <= {res.bound():.4f}: "
            f"{'yes' if res.max_probability <= res.bound() else 'NO'}"
        )
    persist.dump_json(
        {"hypercontractivity": hyper, "anti_concentration": anti},
        out / "probes.json",
    )
    if not no_plot:
        plots.plot_probe(hyper, anti, out / "probe.png")
    click.echo(f"probes -> {out / 'probes.json'}")

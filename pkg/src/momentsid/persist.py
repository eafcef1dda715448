"""File formats: CSV tables (RFC 4180 via the csv module) and JSON documents,
both carrying floats at 17 significant digits so every value round-trips to
the exact same double.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from .lds import SystemMatrices, Trajectory
from .markov import MarkovEstimate, VarianceReport

PathLike = Union[str, Path]


def format_float(x) -> str:
    """Shortest decimal form with 17 significant digits (exact round trip)."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


class SignificantFloatEncoder(json.JSONEncoder):
    """JSONEncoder whose float cells carry 17 significant digits."""

    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, (np.integer,)):
            return int(o)
        return super().default(o)

    def iterencode(self, o, _one_shot=False):
        markers = {} if self.check_circular else None
        encoder = (
            json.encoder.encode_basestring_ascii
            if self.ensure_ascii
            else json.encoder.encode_basestring
        )

        def floatstr(x):
            if not math.isfinite(x):
                raise ValueError(f"cannot serialize non-finite float {x!r}")
            return format(x, ".17g")

        indent = self.indent
        if indent is not None and not isinstance(indent, str):
            indent = " " * indent
        return json.encoder._make_iterencode(
            markers,
            self.default,
            encoder,
            indent,
            floatstr,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            _one_shot,
        )(o, 0)


def dumps_json(obj) -> str:
    return json.dumps(obj, cls=SignificantFloatEncoder, indent=2)


def dump_json(obj, path: PathLike) -> None:
    Path(path).write_text(dumps_json(obj) + "\n", encoding="utf-8")


def load_json(path: PathLike):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_system(system: SystemMatrices, path: PathLike) -> None:
    dump_json(system.to_dict(), path)


def load_system(path: PathLike) -> SystemMatrices:
    return SystemMatrices.from_dict(load_json(path))


def save_markov(est: MarkovEstimate, path: PathLike) -> None:
    dump_json(est.to_dict(), path)


def load_markov(path: PathLike) -> MarkovEstimate:
    return MarkovEstimate.from_dict(load_json(path))


def _write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[str]]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def save_trajectory(traj: Trajectory, path: PathLike) -> None:
    """Visible channels as CSV with columns t, u_1..u_p, y_1..y_m."""
    header = (
        ["t"]
        + [f"u_{i + 1}" for i in range(traj.p)]
        + [f"y_{i + 1}" for i in range(traj.m)]
    )

    def rows():
        for t in range(traj.horizon + 1):
            yield [str(t)] + [format_float(v) for v in traj.inputs[t]] + [
                format_float(v) for v in traj.observations[t]
            ]

    _write_csv(path, header, rows())


def save_hidden(traj: Trajectory, path: PathLike) -> None:
    """Hidden channels as CSV: states x_1..x_n for t = 0..T+1 plus the noise
    draws w_*, z_* (blank on the final row, which only the state reaches)."""
    if traj.states is None or traj.process_noise is None:
        raise ValueError("trajectory carries no hidden channels")
    n = traj.states.shape[1]
    header = (
        ["t"]
        + [f"x_{i + 1}" for i in range(n)]
        + [f"w_{i + 1}" for i in range(n)]
        + [f"z_{i + 1}" for i in range(traj.m)]
    )

    def rows():
        for t in range(traj.horizon + 2):
            row = [str(t)] + [format_float(v) for v in traj.states[t]]
            if t <= traj.horizon:
                row += [format_float(v) for v in traj.process_noise[t]]
                row += [format_float(v) for v in traj.observation_noise[t]]
            else:
                row += [""] * (n + traj.m)
            yield row

    _write_csv(path, header, rows())


def load_trajectory(path: PathLike) -> Trajectory:
    """Rebuild the visible channels of a trajectory CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        p = sum(1 for h in header if h.startswith("u_"))
        m = sum(1 for h in header if h.startswith("y_"))
        if header[0] != "t" or p == 0 or m == 0 or len(header) != 1 + p + m:
            raise ValueError(f"unrecognized trajectory header {header!r}")
        inputs: List[List[float]] = []
        observations: List[List[float]] = []
        for t, row in enumerate(reader):
            if int(row[0]) != t:
                raise ValueError(f"time column out of order at row {t}")
            values = [float(v) for v in row[1:]]
            inputs.append(values[:p])
            observations.append(values[p:])
    if not inputs:
        raise ValueError("trajectory file has no data rows")
    return Trajectory(
        horizon=len(inputs) - 1,
        inputs=np.array(inputs),
        observations=np.array(observations),
    )


def save_variance_rows(reports: Sequence[VarianceReport], path: PathLike) -> None:
    header = ["kind", "T", "trials", "second_moment"]
    rows = [
        [r.kind, str(r.T), str(r.trials), format_float(r.second_moment)]
        for r in reports
    ]
    _write_csv(path, header, rows)


def save_demo_rows(rows, path: PathLike) -> None:
    """Indistinguishability demo table; one row per (delta, T)."""
    header = [
        "delta",
        "T",
        "mult_factor",
        "predicted_bound",
        "markov_distance",
        "parameter_gap",
    ]
    out = [
        [
            format_float(r.delta),
            str(r.T),
            format_float(r.mult_factor),
            format_float(r.predicted_bound),
            format_float(r.markov_dist),
            format_float(r.parameter_gap),
        ]
        for r in rows
    ]
    _write_csv(path, header, out)

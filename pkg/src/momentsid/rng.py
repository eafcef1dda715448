"""Deterministic substream derivation on top of numpy's SeedSequence.

Every random draw in the package flows through :func:`substream`, so any
statistic is a pure function of the master seed plus a tuple of integer
stream ids.  Distinct id tuples give statistically independent streams and
can be consumed in any order (or in parallel) without interfering.
"""
from __future__ import annotations

import numpy as np

# Stream ids for the simulation channels.
STREAM_INPUT = 1
STREAM_PROCESS = 2
STREAM_OBSERVATION = 3
STREAM_INITIAL = 4
# Namespace for per-trial seeds in Monte-Carlo experiments.
STREAM_TRIALS = 9


def substream(seed: int, *ids: int) -> np.random.Generator:
    """Return the generator for the substream identified by ``(seed, *ids)``.

    The same arguments always produce a generator in the same state.
    """
    key = tuple(int(i) for i in ids)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def trial_seeds(seed: int, trials: int) -> np.ndarray:
    """Integer seeds for ``trials`` independent Monte-Carlo repetitions.

    Each returned value can be passed straight back to :func:`substream` (or
    to ``simulate``), which is how experiments keep per-trial draws disjoint
    from one another and from the master stream.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAM_TRIALS,))
    return ss.generate_state(int(trials), np.uint64)

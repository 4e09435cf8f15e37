"""Reproducible per-trial random streams.

Each trial owns an independent Philox stream keyed by ``(master_seed,
trial_index)``; Philox is counter based, so distinct keys give independent
streams and no trial's draws depend on how trials are scheduled.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable

import numpy as np

DEFAULT_SEED = 12345
SEED_ENV = "QSIM_SEED"
_U64 = 2**64


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _U64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def derive_stream(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent, reproducible generator for one trial."""
    key = np.array([check_seed(master_seed), check_seed(trial_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def subseed(master_seed: int, *labels: int) -> int:
    """Derive a new master seed for a named sub-experiment."""
    ss = np.random.SeedSequence(check_seed(master_seed), spawn_key=tuple(labels))
    return int(ss.generate_state(1, np.uint64)[0])


def trial_uniforms(master_seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """The first ``width`` uniforms of every trial stream in ``[start, stop)``.

    Row ``i`` equals ``width`` successive ``derive_stream(seed, start + i).random()``
    calls, so batched kernels can replay scalar trials bit for bit.
    """
    out = np.empty((stop - start, width))
    for row, idx in enumerate(range(start, stop)):
        out[row] = derive_stream(master_seed, idx).random(width)
    return out


def resolve_seed(flag: int | None) -> int:
    """Explicit flag wins; otherwise ``$QSIM_SEED``; otherwise the default."""
    if flag is not None:
        return check_seed(flag)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return check_seed(int(env, 0))
    return DEFAULT_SEED


def chunk_bounds(trials: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]


def fold_chunks(
    kernel: Callable[[int, int], np.ndarray],
    trials: int,
    workers: int = 1,
    chunk: int = 20_000,
) -> np.ndarray:
    """Sum ``kernel(start, stop)`` count vectors over all trial chunks.

    ``kernel`` must be picklable when ``workers > 1``. Counts are integers, so
    the fold is exact and independent of scheduling.
    """
    bounds = chunk_bounds(trials, chunk)
    if workers <= 1 or len(bounds) <= 1:
        parts = [kernel(lo, hi) for lo, hi in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(partial(_call, kernel), bounds))
    return np.sum(parts, axis=0)


def _call(kernel, bounds):
    return kernel(*bounds)

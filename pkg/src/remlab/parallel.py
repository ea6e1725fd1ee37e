"""Disorder-parallel evaluation.

Work is a list of disorder indices, statically cut into contiguous chunks.
Each index is evaluated independently from its own derived seed, and the
per-seed result vectors are reassembled in index order, so the output does
not depend on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .rng import disorder_seed


def _run_chunk(fn, master_seed, tag, indices):
    return [np.atleast_1d(np.asarray(fn(disorder_seed(master_seed, d, tag)), dtype=np.float64))
            for d in indices]


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def seed_values(fn, n_seeds: int, master_seed: int, tag: str = "disorder",
                workers: int = 1, start: int = 0) -> np.ndarray:
    """Evaluate ``fn(seed)`` for disorder indices ``start .. start+n_seeds-1``.

    ``fn`` must be picklable when ``workers > 1`` (a module-level function or
    a ``functools.partial`` of one).  Returns an (n_seeds, k) array.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    indices = list(range(start, start + n_seeds))
    if workers <= 1:
        rows = _run_chunk(fn, master_seed, tag, indices)
    else:
        bounds = np.linspace(0, n_seeds, min(workers, n_seeds) + 1).astype(int)
        chunks = [indices[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = pool.map(_run_chunk, [fn] * len(chunks), [master_seed] * len(chunks),
                             [tag] * len(chunks), chunks)
            rows = [r for part in parts for r in part]
    return np.vstack(rows)

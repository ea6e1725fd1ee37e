"""Seed derivation.

Every random quantity in the package is addressed by a tuple of labels
(master seed, experiment, disorder index, purpose tag, ...).  The tuple is
hashed to a 64-bit key; disorder fields feed that key to the counter-based
stream in ``kernels``, everything else seeds a numpy ``Generator`` with it.
Nothing ever draws from a shared sequential stream, so results do not depend
on how seeds are spread over workers.
"""
import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_key(*parts) -> int:
    h = hashlib.blake2b(digest_size=8, person=b"remlab-v1")
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def generator(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_key(*parts))


def disorder_seed(master_seed: int, index: int, tag: str = "disorder") -> int:
    """Seed of the ``index``-th disorder realization of an experiment."""
    return derive_key(int(master_seed) & MASK64, tag, int(index))

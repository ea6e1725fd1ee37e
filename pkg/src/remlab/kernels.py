"""Dispatch to the active kernel backend (see ``remlab._backend``)."""
import numpy as np

from ._backend import USE_NUMBA, backend_name
from . import _kernels_numpy as numpy_kernels

if USE_NUMBA:
    from . import _kernels_numba as _active
else:
    _active = numpy_kernels

gibbs_reduce = _active.gibbs_reduce
window_scan = _active.window_scan


# keys are 64-bit unsigned; plain Python ints above 2**63 would not fit the
# int64 signatures numba infers, so coerce them once here
def uniform_stream(key, start, count):
    return _active.uniform_stream(np.uint64(key), start, count)


def normal_stream(key, start, count):
    return _active.normal_stream(np.uint64(key), start, count)


def normal_at(key, idx):
    return _active.normal_at(np.uint64(key), np.ascontiguousarray(idx, dtype=np.int64))


def energy_table(x1, x2, key, scale):
    return _active.energy_table(np.ascontiguousarray(x1), np.ascontiguousarray(x2),
                                np.uint64(key), float(scale))


def top_k(x1, x2, key, scale, k):
    return _active.top_k(np.ascontiguousarray(x1), np.ascontiguousarray(x2),
                         np.uint64(key), float(scale), int(k))


def survey_reduce(x1, x2, key, scale, beta, a_n1, a_n2, lo, hi):
    """gibbs_reduce and window_scan of the energy table without storing it."""
    return _active.survey_reduce(np.ascontiguousarray(x1), np.ascontiguousarray(x2),
                                 np.uint64(key), float(scale), float(beta), float(a_n1),
                                 float(a_n2), float(lo), float(hi))


class DiscreteSampler:
    """Repeated draws from a fixed discrete law.

    Uses a Vose alias table on the numba path (O(1) per draw) and a cumulative
    table with binary search on the numpy path.
    """

    def __init__(self, p):
        p = np.ascontiguousarray(p, dtype=np.float64).ravel()
        if p.size == 0 or not np.all(p >= 0) or p.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        self.size = p.size
        if USE_NUMBA:
            self._prob, self._alias = _active.alias_build(p)
        else:
            self._cum = np.cumsum(p)

    def draw(self, u):
        u = np.ascontiguousarray(u, dtype=np.float64)
        if USE_NUMBA:
            return _active.alias_draw(self._prob, self._alias, u)
        return numpy_kernels.cumulative_draw(self._cum, u)


__all__ = [
    "USE_NUMBA", "backend_name", "numpy_kernels", "uniform_stream", "normal_stream", "normal_at",
    "energy_table", "gibbs_reduce", "survey_reduce", "window_scan", "top_k", "DiscreteSampler",
]

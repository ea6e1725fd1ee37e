"""Pure-numpy implementations of the hot kernels (fallback path)."""
import numpy as np

from . import _normal as nc

_U64 = np.uint64
_GAMMA = _U64(nc.GAMMA)
_M1 = _U64(nc.M1)
_M2 = _U64(nc.M2)
_S30, _S27, _S31, _S11 = _U64(30), _U64(27), _U64(31), _U64(11)

# rows per chunk when streaming a 2^N table through memory
_CHUNK = 1 << 20


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def uniform_at(key, idx):
    idx = np.asarray(idx).astype(np.uint64) + _U64(1)
    with np.errstate(over="ignore"):
        z = _mix(_U64(key) + idx * _GAMMA)
    return ((z >> _S11).astype(np.float64) + 0.5) * nc.INV_2_53


def uniform_stream(key, start, count):
    return uniform_at(key, np.arange(start, start + count, dtype=np.uint64))


def normal_at(key, idx):
    return ndtri(uniform_at(key, idx))


def _poly(coef, r):
    out = np.full_like(r, coef[7])
    for c in coef[6::-1]:
        out = out * r + c
    return out


def ndtri(p):
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= nc.SPLIT1
    if central.any():
        qc = q[central]
        r = nc.CONST1 - qc * qc
        out[central] = qc * _poly(nc.A, r) / _poly(nc.B, r)
    tail = ~central
    if tail.any():
        qt = q[tail]
        r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
        r = np.sqrt(-np.log(r))
        near = r <= nc.SPLIT2
        x = np.empty_like(r)
        rn = r[near] - nc.CONST2
        x[near] = _poly(nc.C, rn) / _poly(nc.D, rn)
        rf = r[~near] - nc.SPLIT2
        x[~near] = _poly(nc.E, rf) / _poly(nc.F, rf)
        out[tail] = np.where(qt < 0.0, -x, x)
    return out


def normal_stream(key, start, count):
    return ndtri(uniform_stream(key, start, count))


def energy_table(x1, x2, key, scale):
    m1, m2 = x1.shape[0], x2.shape[0]
    out = np.add.outer(x1, x2)
    if scale != 0.0:
        rows = max(1, _CHUNK // m2)
        for i0 in range(0, m1, rows):
            i1 = min(m1, i0 + rows)
            g = normal_stream(key, i0 * m2, (i1 - i0) * m2).reshape(i1 - i0, m2)
            out[i0:i1] += scale * g
    return out


def gibbs_reduce(table, beta):
    """Exact Gibbs sufficient statistics of one energy table.

    Returns ``(log_z, row, col, s2, s3, wrc, w2r, w2c)``: the log partition
    function, both marginals, sum w^2, sum w^3, sum w_ij row_i col_j,
    sum w_ij^2 row_i and sum w_ij^2 col_j for the normalized weights w.
    """
    lw = beta * table
    m = lw.max()
    w = np.exp(lw - m)
    z = w.sum()
    w /= z
    row = w.sum(axis=1)
    col = w.sum(axis=0)
    w2 = w * w
    s2 = w2.sum()
    s3 = (w2 * w).sum()
    wrc = float(row @ (w @ col))
    w2r = float(row @ w2.sum(axis=1))
    w2c = float(w2.sum(axis=0) @ col)
    return m + np.log(z), row, col, s2, s3, wrc, w2r, w2c


def window_scan(table, x1, a_n1, a_n2, lo, hi):
    """Column counts of shifted energies in [lo, hi], their total, and the
    range of both shifted parts (block 1 and the rest) over those points."""
    shifted = table - (a_n1 + a_n2)
    inside = (shifted >= lo) & (shifted <= hi)
    cols = inside.sum(axis=0).astype(np.int64)
    n_in = int(cols.sum())
    if n_in == 0:
        return cols, 0, np.inf, -np.inf, np.inf, -np.inf
    ii, jj = np.nonzero(inside)
    part1 = x1[ii] - a_n1
    rest = shifted[ii, jj] - part1
    return cols, n_in, part1.min(), part1.max(), rest.min(), rest.max()


def top_k(x1, x2, key, scale, k):
    """Flat indices of the k largest energies, descending, ties by index."""
    m1, m2 = x1.shape[0], x2.shape[0]
    rows = max(1, _CHUNK // m2)
    best_v = np.empty(0)
    best_i = np.empty(0, dtype=np.int64)
    for i0 in range(0, m1, rows):
        i1 = min(m1, i0 + rows)
        block = energy_table(x1[i0:i1], x2, 0, 0.0)
        if scale != 0.0:
            block += scale * normal_stream(key, i0 * m2, (i1 - i0) * m2).reshape(i1 - i0, m2)
        v = np.concatenate([best_v, block.ravel()])
        ids = np.concatenate([best_i, np.arange(i0 * m2, i1 * m2, dtype=np.int64)])
        order = np.lexsort((ids, -v))[:k]
        best_v, best_i = v[order], ids[order]
    return best_i, best_v


def cumulative_draw(cum, u):
    return np.minimum(np.searchsorted(cum, u * cum[-1], side="right"), cum.shape[0] - 1)


def survey_reduce(x1, x2, key, scale, beta, a_n1, a_n2, lo, hi):
    table = energy_table(x1, x2, key, scale)
    return gibbs_reduce(table, beta) + window_scan(table, x1, a_n1, a_n2, lo, hi)

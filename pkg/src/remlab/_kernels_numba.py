"""numba-compiled implementations of the hot kernels.

The AS241 polynomials are unrolled into scalar Horner chains (coefficients
from ``_normal``); keep them in sync if that table changes.
"""
import math

import numba
import numpy as np

from . import _normal as nc

_GAMMA = np.uint64(nc.GAMMA)
_M1 = np.uint64(nc.M1)
_M2 = np.uint64(nc.M2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV = nc.INV_2_53

_jit = numba.njit(cache=True, nogil=True)


@_jit
def _uniform_at(key, idx):
    z = key + np.uint64(idx + 1) * _GAMMA
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return (np.float64(np.int64(z >> _S11)) + 0.5) * _INV


@_jit
def _ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((2509.0809287301227 * r + 33430.57558358813) * r + 67265.7709270087) * r + 45921.95393154987) * r + 13731.69376550946) * r + 1971.5909503065513) * r + 133.14166789178438) * r + 3.3871328727963665) / (((((((5226.495278852854 * r + 28729.085735721943) * r + 39307.89580009271) * r + 21213.794301586597) * r + 5394.196021424751) * r + 687.1870074920579) * r + 42.31333070160091) * r + 1.0)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        x = (((((((0.0007745450142783414 * r + 0.022723844989269184) * r + 0.2417807251774506) * r + 1.2704582524523684) * r + 3.6478483247632045) * r + 5.769497221460691) * r + 4.630337846156546) * r + 1.4234371107496835) / (((((((1.0507500716444169e-09 * r + 0.0005475938084995345) * r + 0.015198666563616457) * r + 0.14810397642748008) * r + 0.6897673349851) * r + 1.6763848301838038) * r + 2.053191626637759) * r + 1.0)
    else:
        r -= 5.0
        x = (((((((2.0103343992922881e-07 * r + 2.7115555687434876e-05) * r + 0.0012426609473880784) * r + 0.026532189526576124) * r + 0.29656057182850487) * r + 1.7848265399172913) * r + 5.463784911164114) * r + 6.657904643501103) / (((((((2.0442631033899397e-15 * r + 1.421511758316446e-07) * r + 1.8463183175100548e-05) * r + 0.0007868691311456133) * r + 0.014875361290850615) * r + 0.1369298809227358) * r + 0.599832206555888) * r + 1.0)
    return -x if q < 0.0 else x


@_jit
def _normal_at(key, idx):
    return _ndtri(_uniform_at(key, idx))


@_jit
def uniform_stream(key, start, count):
    key = np.uint64(key)
    out = np.empty(count)
    for n in range(count):
        out[n] = _uniform_at(key, start + n)
    return out


@_jit
def ndtri(p):
    out = np.empty(p.shape[0])
    for n in range(p.shape[0]):
        out[n] = _ndtri(p[n])
    return out


@_jit
def normal_stream(key, start, count):
    key = np.uint64(key)
    out = np.empty(count)
    for n in range(count):
        out[n] = _normal_at(key, start + n)
    return out


@_jit
def normal_at(key, idx):
    key = np.uint64(key)
    out = np.empty(idx.shape[0])
    for n in range(idx.shape[0]):
        out[n] = _normal_at(key, idx[n])
    return out


@_jit
def energy_table(x1, x2, key, scale):
    key = np.uint64(key)
    m1, m2 = x1.shape[0], x2.shape[0]
    out = np.empty((m1, m2))
    for i in range(m1):
        base = i * m2
        xi = x1[i]
        if scale != 0.0:
            for j in range(m2):
                out[i, j] = xi + x2[j] + scale * _normal_at(key, base + j)
        else:
            for j in range(m2):
                out[i, j] = xi + x2[j]
    return out


@_jit
def gibbs_reduce(table, beta):
    # one exp per entry; column accumulators hold everything that needs the
    # final column marginal, so the weights themselves are never stored
    m1, m2 = table.shape
    mx = -np.inf
    for i in range(m1):
        for j in range(m2):
            if table[i, j] > mx:
                mx = table[i, j]
    mx *= beta
    buf = np.empty(m2)
    row = np.empty(m1)
    col = np.zeros(m2)
    col2 = np.zeros(m2)
    colr = np.zeros(m2)
    s2 = 0.0
    s3 = 0.0
    w2r = 0.0
    for i in range(m1):
        acc = 0.0
        for j in range(m2):
            e = math.exp(beta * table[i, j] - mx)
            buf[j] = e
            acc += e
        a2 = 0.0
        a3 = 0.0
        for j in range(m2):
            e = buf[j]
            ee = e * e
            col[j] += e
            col2[j] += ee
            colr[j] += e * acc
            a2 += ee
            a3 += ee * e
        row[i] = acc
        s2 += a2
        s3 += a3
        w2r += a2 * acc
    z = 0.0
    for i in range(m1):
        z += row[i]
    wrc = 0.0
    w2c = 0.0
    for j in range(m2):
        wrc += colr[j] * col[j]
        w2c += col2[j] * col[j]
    iz = 1.0 / z
    iz3 = iz * iz * iz
    return (mx + math.log(z), row * iz, col * iz, s2 * iz * iz, s3 * iz3,
            wrc * iz3, w2r * iz3, w2c * iz3)


@_jit
def window_scan(table, x1, a_n1, a_n2, lo, hi):
    m1, m2 = table.shape
    a_n = a_n1 + a_n2
    cols = np.zeros(m2, dtype=np.int64)
    n_in = 0
    lo1 = np.inf
    hi1 = -np.inf
    lor = np.inf
    hir = -np.inf
    for i in range(m1):
        p1 = x1[i] - a_n1
        for j in range(m2):
            s = table[i, j] - a_n
            if s >= lo and s <= hi:
                cols[j] += 1
                n_in += 1
                rest = s - p1
                lo1 = min(lo1, p1)
                hi1 = max(hi1, p1)
                lor = min(lor, rest)
                hir = max(hir, rest)
    return cols, n_in, lo1, hi1, lor, hir


@_jit
def survey_reduce(x1, x2, key, scale, beta, a_n1, a_n2, lo, hi):
    # gibbs_reduce and window_scan in one pass over energies generated on the
    # fly; the exp shift uses the unperturbed maximum, which keeps every
    # exponent within a few dozen of zero at the sizes the table cap allows
    key = np.uint64(key)
    m1, m2 = x1.shape[0], x2.shape[0]
    mx = beta * (x1.max() + x2.max())
    a_n = a_n1 + a_n2
    buf = np.empty(m2)
    row = np.empty(m1)
    col = np.zeros(m2)
    col2 = np.zeros(m2)
    colr = np.zeros(m2)
    cols = np.zeros(m2, dtype=np.int64)
    s2 = 0.0
    s3 = 0.0
    w2r = 0.0
    n_in = 0
    lo1 = np.inf
    hi1 = -np.inf
    lor = np.inf
    hir = -np.inf
    for i in range(m1):
        base = i * m2
        p1 = x1[i] - a_n1
        acc = 0.0
        for j in range(m2):
            v = x1[i] + x2[j]
            if scale != 0.0:
                v += scale * _normal_at(key, base + j)
            sh = v - a_n
            if sh >= lo and sh <= hi:
                cols[j] += 1
                n_in += 1
                rest = sh - p1
                lo1 = min(lo1, p1)
                hi1 = max(hi1, p1)
                lor = min(lor, rest)
                hir = max(hir, rest)
            e = math.exp(beta * v - mx)
            buf[j] = e
            acc += e
        a2 = 0.0
        a3 = 0.0
        for j in range(m2):
            e = buf[j]
            ee = e * e
            col[j] += e
            col2[j] += ee
            colr[j] += e * acc
            a2 += ee
            a3 += ee * e
        row[i] = acc
        s2 += a2
        s3 += a3
        w2r += a2 * acc
    z = row.sum()
    wrc = 0.0
    w2c = 0.0
    for j in range(m2):
        wrc += colr[j] * col[j]
        w2c += col2[j] * col[j]
    iz = 1.0 / z
    iz3 = iz * iz * iz
    return (mx + math.log(z), row * iz, col * iz, s2 * iz * iz, s3 * iz3,
            wrc * iz3, w2r * iz3, w2c * iz3, cols, n_in, lo1, hi1, lor, hir)


@_jit
def _sift_down(vals, ids, n, pos):
    # min-heap on (value, -id): the root is the weakest retained point
    while True:
        left = 2 * pos + 1
        if left >= n:
            return
        small = left
        right = left + 1
        if right < n and (vals[right] < vals[left]
                          or (vals[right] == vals[left] and ids[right] > ids[left])):
            small = right
        if vals[small] < vals[pos] or (vals[small] == vals[pos] and ids[small] > ids[pos]):
            vals[small], vals[pos] = vals[pos], vals[small]
            ids[small], ids[pos] = ids[pos], ids[small]
            pos = small
        else:
            return


@_jit
def top_k(x1, x2, key, scale, k):
    key = np.uint64(key)
    m1, m2 = x1.shape[0], x2.shape[0]
    vals = np.empty(k)
    ids = np.empty(k, dtype=np.int64)
    n = 0
    for i in range(m1):
        base = i * m2
        for j in range(m2):
            v = x1[i] + x2[j]
            if scale != 0.0:
                v += scale * _normal_at(key, base + j)
            idx = base + j
            if n < k:
                # sift up
                pos = n
                vals[pos] = v
                ids[pos] = idx
                n += 1
                while pos > 0:
                    par = (pos - 1) // 2
                    if vals[pos] < vals[par] or (vals[pos] == vals[par] and ids[pos] > ids[par]):
                        vals[pos], vals[par] = vals[par], vals[pos]
                        ids[pos], ids[par] = ids[par], ids[pos]
                        pos = par
                    else:
                        break
            elif v > vals[0]:
                vals[0] = v
                ids[0] = idx
                _sift_down(vals, ids, n, 0)
    vals = vals[:n]
    ids = ids[:n]
    order = np.argsort(-vals, kind="mergesort")
    vals = vals[order]
    ids = ids[order]
    # stable sort keeps heap order among ties; re-sort equal runs by id
    start = 0
    for t in range(1, n + 1):
        if t == n or vals[t] != vals[start]:
            if t - start > 1:
                ids[start:t] = np.sort(ids[start:t])
            start = t
    return ids, vals


@_jit
def alias_build(p):
    n = p.shape[0]
    prob = np.empty(n)
    alias = np.zeros(n, dtype=np.int64)
    scaled = p * (n / p.sum())
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        l = large[nl - 1]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            nl -= 1
            small[ns] = l
            ns += 1
    for t in range(nl):
        prob[large[t]] = 1.0
        alias[large[t]] = large[t]
    for t in range(ns):
        prob[small[t]] = 1.0
        alias[small[t]] = small[t]
    return prob, alias


@_jit
def alias_draw(prob, alias, u):
    n = prob.shape[0]
    out = np.empty(u.shape[0], dtype=np.int64)
    for t in range(u.shape[0]):
        x = u[t] * n
        k = min(int(x), n - 1)
        out[t] = k if x - k < prob[k] else alias[k]
    return out

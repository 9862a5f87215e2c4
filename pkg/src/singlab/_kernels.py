"""Compiled inner loops shared by the sampler and the Monte Carlo experiments.

Random draws come from a keyed SplitMix64 hash of a draw counter, so any draw
can be regenerated from (key, counter) alone. Matrix sample ``s`` of size
``n x n`` uses counters ``s*n*n .. (s+1)*n*n - 1`` in row-major order.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from numba import njit, prange

# an old system TBB only disables one optional threading backend
warnings.filterwarnings("ignore", message="The TBB threading layer")

GAMMA = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1

_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_M1 = np.uint64(M1)
_M2 = np.uint64(M2)
_G = np.uint64(GAMMA)
_ONE = np.uint64(1)


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _U30)) * _M1
    z = (z ^ (z >> _U27)) * _M2
    return z ^ (z >> _U31)


@njit(inline="always")
def draw(k1, k2, counter):
    return _mix(_mix(counter * _G + k1) + k2)


@njit(inline="always")
def _index_of(u, thresholds):
    j = 0
    for t in thresholds:
        if u >= t:
            j += 1
    return j


@njit(cache=True)
def fill_indices(k1, k2, counter0, out, thresholds):
    """Write len(out) atom indices drawn at consecutive counters."""
    c = np.uint64(counter0)
    for i in range(out.shape[0]):
        out[i] = _index_of(draw(k1, k2, c), thresholds)
        c += _ONE


# --- modular determinant test --------------------------------------------------

@njit(cache=True)
def _inv_mod(a, p):
    t0, t1, r0, r1 = 0, 1, p, a
    while r1 != 0:
        q = r0 // r1
        t0, t1 = t1, t0 - q * t1
        r0, r1 = r1, r0 - q * r1
    return t0 % p


@njit(cache=True)
def det_vanishes_mod(m, p, w):
    """True iff det(m) = 0 mod p. Entries of ``m`` are integers stored as
    float64; p < 2**26 keeps every product exact in double precision."""
    n = m.shape[0]
    pinv = 1.0 / p
    for i in range(n):
        for j in range(n):
            v = m[i, j] % p
            if v < 0:
                v += p
            w[i, j] = v
    for c in range(n):
        piv = -1
        for r in range(c, n):
            if w[r, c] != 0.0:
                piv = r
                break
        if piv < 0:
            return True
        if piv != c:
            for j in range(c, n):
                t = w[c, j]
                w[c, j] = w[piv, j]
                w[piv, j] = t
        inv = float(_inv_mod(np.int64(w[c, c]), np.int64(p)))
        for j in range(c + 1, n):
            x = w[c, j] * inv
            y = x - np.floor(x * pinv) * p
            y = y + p * (y < 0) - p * (y >= p)
            w[c, j] = y
        for r in range(c + 1, n):
            f = w[r, c]
            if f == 0.0:
                continue
            g = p - f
            for j in range(c + 1, n):
                x = w[r, j] + g * w[c, j]
                y = x - np.floor(x * pinv) * p
                y = y + p * (y < 0) - p * (y >= p)
                w[r, j] = y
    return False


@njit(cache=True)
def has_zero_line(m):
    n = m.shape[0]
    for i in range(n):
        zr = True
        zc = True
        for j in range(n):
            if m[i, j] != 0.0:
                zr = False
            if m[j, i] != 0.0:
                zc = False
        if zr or zc:
            return True
    return False


@njit(cache=True)
def is_singular(m, primes, need, w):
    """Exact singularity of an integer matrix.

    The first prime is a screen: a nonzero residue proves det != 0. When it
    vanishes, further primes are tried until their product exceeds the
    Hadamard bound (``need`` primes), at which point det = 0 is certain.
    """
    if has_zero_line(m):
        return True
    for q in range(need):
        if not det_vanishes_mod(m, primes[q], w):
            return False
    return True


@njit(cache=True)
def _load_matrix(k1, k2, s, n, thresholds, values, m):
    c = np.uint64(s) * np.uint64(n * n)
    for i in range(n):
        for j in range(n):
            m[i, j] = values[_index_of(draw(k1, k2, c), thresholds)]
            c += _ONE


@njit(cache=True, parallel=True)
def count_singular(k1, k2, n, start, count, thresholds, values, primes, need, blocks):
    """Number of singular matrices among samples start .. start+count-1."""
    per = np.zeros(blocks, np.int64)
    size = (count + blocks - 1) // blocks
    for b in prange(blocks):
        lo = start + b * size
        hi = min(start + count, lo + size)
        m = np.empty((n, n))
        w = np.empty((n, n))
        acc = 0
        for s in range(lo, hi):
            _load_matrix(k1, k2, s, n, thresholds, values, m)
            if is_singular(m, primes, need, w):
                acc += 1
        per[b] = acc
    return per.sum()


@njit(cache=True)
def in_dominant_union(m):
    """Zero row/column, or two rows/columns equal up to sign."""
    if has_zero_line(m):
        return True
    n = m.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            er = True
            nr = True
            ec = True
            nc = True
            for t in range(n):
                a = m[i, t]
                b = m[j, t]
                if a != b:
                    er = False
                if a != -b:
                    nr = False
                a = m[t, i]
                b = m[t, j]
                if a != b:
                    ec = False
                if a != -b:
                    nc = False
            if er or nr or ec or nc:
                return True
    return False


@njit(cache=True, parallel=True)
def union_vs_singular(k1, k2, n, start, count, thresholds, values, primes, need, blocks):
    """Returns (union hits, singular hits, union hits that are not singular)."""
    out = np.zeros((blocks, 3), np.int64)
    size = (count + blocks - 1) // blocks
    for b in prange(blocks):
        lo = start + b * size
        hi = min(start + count, lo + size)
        m = np.empty((n, n))
        w = np.empty((n, n))
        for s in range(lo, hi):
            _load_matrix(k1, k2, s, n, thresholds, values, m)
            u = in_dominant_union(m)
            z = is_singular(m, primes, need, w)
            if u:
                out[b, 0] += 1
            if z:
                out[b, 1] += 1
            if u and not z:
                out[b, 2] += 1
    return out[:, 0].sum(), out[:, 1].sum(), out[:, 2].sum()


@njit(cache=True)
def matrices_with_flags(k1, k2, n, start, count, thresholds, values, primes, need):
    """Materialise samples start.. as float matrices plus exact singular flags."""
    mats = np.empty((count, n, n))
    flags = np.zeros(count, np.bool_)
    w = np.empty((n, n))
    for t in range(count):
        _load_matrix(k1, k2, start + t, n, thresholds, values, mats[t])
        flags[t] = is_singular(mats[t], primes, need, w)
    return mats, flags


@njit(cache=True, parallel=True)
def weighted_sums(k1, k2, start, count, thresholds, values, x, blocks):
    """S_s = sum_i values[b_i] x_i for samples s = start .. start+count-1,
    where sample s consumes counters s*n .. s*n + n - 1."""
    n = x.shape[0]
    out = np.empty(count)
    size = (count + blocks - 1) // blocks
    for b in prange(blocks):
        lo = b * size
        hi = min(count, lo + size)
        for t in range(lo, hi):
            c = np.uint64(start + t) * np.uint64(n)
            acc = 0.0
            for i in range(n):
                acc += values[_index_of(draw(k1, k2, c), thresholds)] * x[i]
                c += _ONE
            out[t] = acc
    return out


@njit(cache=True)
def max_window_count(sorted_vals, width):
    """Largest number of points inside a closed window [v, v + width]
    whose left end sits on a point."""
    m = sorted_vals.shape[0]
    best = 0
    arg = 0
    j = 0
    for i in range(m):
        if j < i:
            j = i
        lim = sorted_vals[i] + width
        while j + 1 < m and sorted_vals[j + 1] <= lim:
            j += 1
        if j - i + 1 > best:
            best = j - i + 1
            arg = i
    return best, arg


# --- primes -----------------------------------------------------------------

def _is_prime(v: int) -> bool:
    if v < 2:
        return False
    if v % 2 == 0:
        return v == 2
    r = math.isqrt(v)
    f = 3
    while f <= r:
        if v % f == 0:
            return False
        f += 2
    return True


def _primes_below(limit: int, count: int) -> list[int]:
    out = []
    v = limit - 1
    while len(out) < count:
        if _is_prime(v):
            out.append(v)
        v -= 1
    return out


PRIMES = np.array(_primes_below(1 << 26, 64), dtype=np.float64)


def primes_needed(n: int, max_abs_entry: int) -> int:
    """Number of entries of PRIMES whose product exceeds the Hadamard bound
    (sqrt(n) * max|entry|)^n, which caps |det| of any n x n integer matrix
    with entries bounded by max_abs_entry."""
    if max_abs_entry == 0:
        return 1
    bound = n * (0.5 * math.log2(n) + math.log2(max_abs_entry)) + 1.0
    acc = 0.0
    for i, p in enumerate(PRIMES):
        acc += math.log2(p)
        if acc > bound:
            return max(i + 1, 1)
    raise ValueError("matrix too large for the prime table")

"""numba-compiled loops for the hot field paths.

Imported lazily by :mod:`field` and :mod:`poly`; when numba is missing the
pure-numpy implementations there are used instead.
"""

import numpy as np
from numba import njit, uint64

_P = np.uint64(0xFFFFFFFF00000001)
_EPS = np.uint64(0xFFFFFFFF)
_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)


@njit(uint64(uint64, uint64), cache=True, inline="always")
def mulmod(a, b):
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = lh + hl
    mid_carry = _ONE if mid < lh else _ZERO
    lo = ll + (mid << _S32)
    lo_carry = _ONE if lo < ll else _ZERO
    hi = hh + (mid >> _S32) + (mid_carry << _S32) + lo_carry
    hi_hi = hi >> _S32
    hi_lo = hi & _M32
    t0 = lo - hi_hi
    if lo < hi_hi:
        t0 -= _EPS
    t1 = hi_lo * _EPS
    r = t0 + t1
    if r < t1:
        r += _EPS
    if r >= _P:
        r -= _P
    return r


@njit(uint64(uint64, uint64), cache=True, inline="always")
def addmod(a, b):
    s = a + b
    if s < a or s >= _P:
        s -= _P
    return s


@njit(uint64(uint64, uint64), cache=True, inline="always")
def submod(a, b):
    d = a - b
    if a < b:
        d += _P
    return d


@njit(cache=True)
def vmul_flat(a, b, out):
    for i in range(a.shape[0]):
        out[i] = mulmod(a[i], b[i])


@njit(cache=True)
def vadd_flat(a, b, out):
    for i in range(a.shape[0]):
        out[i] = addmod(a[i], b[i])


@njit(cache=True)
def vsub_flat(a, b, out):
    for i in range(a.shape[0]):
        out[i] = submod(a[i], b[i])


@njit(cache=True)
def ntt_rows(a, rev, twiddles):
    """In-place radix-2 NTT of every row of ``a``.

    ``twiddles`` concatenates the per-stage power tables (lengths 1, 2, 4,
    ..., n/2) of the chosen root.
    """
    rows, n = a.shape
    for r in range(rows):
        row = a[r]
        for i in range(n):
            j = rev[i]
            if i < j:
                tmp = row[i]
                row[i] = row[j]
                row[j] = tmp
        half = 1
        offset = 0
        while half < n:
            for start in range(0, n, 2 * half):
                for k in range(half):
                    u = row[start + k]
                    v = mulmod(row[start + k + half], twiddles[offset + k])
                    row[start + k] = addmod(u, v)
                    row[start + k + half] = submod(u, v)
            offset += half
            half *= 2



@njit(cache=True)
def vscale_flat(a, k, out):
    for i in range(a.shape[0]):
        out[i] = mulmod(a[i], k)


@njit(cache=True)
def horner_flat(coeffs, x):
    acc = _ZERO
    for i in range(coeffs.shape[0] - 1, -1, -1):
        acc = addmod(mulmod(acc, x), coeffs[i])
    return acc

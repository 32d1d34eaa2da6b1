"""Arithmetic in the 64-bit prime field p = 2^64 - 2^32 + 1.

Scalars are Python ints in [0, p). Vectors are ``numpy.uint64`` arrays whose
operations rely on wrapping unsigned arithmetic; every vector function
returns canonical (fully reduced) values.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

P = 0xFFFFFFFF00000001
GENERATOR = 7  # generates the full multiplicative group
TWO_ADICITY = 32
_EPS = np.uint64(0xFFFFFFFF)  # 2^64 mod p
_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_P = np.uint64(P)


def add(a: int, b: int) -> int:
    return (a + b) % P


def sub(a: int, b: int) -> int:
    return (a - b) % P


def mul(a: int, b: int) -> int:
    return a * b % P


def inv(a: int) -> int:
    if a % P == 0:
        raise ZeroDivisionError("inverse of zero")
    return pow(a, -1, P)


@lru_cache(maxsize=None)
def root_of_unity(n: int) -> int:
    """Primitive n-th root of unity, n a power of two."""
    if n & (n - 1) or n > 1 << TWO_ADICITY:
        raise ValueError(f"no root of unity of order {n}")
    return pow(GENERATOR, (P - 1) // n, P)


def batch_inv(values: list[int]) -> list[int]:
    """Montgomery batch inversion; all inputs must be nonzero."""
    n = len(values)
    prefix = [1] * (n + 1)
    acc = 1
    for i, v in enumerate(values):
        acc = acc * v % P
        prefix[i + 1] = acc
    inv_acc = inv(acc)
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = prefix[i] * inv_acc % P
        inv_acc = inv_acc * values[i] % P
    return out


def horner(coeffs, x: int) -> int:
    if _kernels is not None and isinstance(coeffs, np.ndarray) and coeffs.dtype == np.uint64:
        return int(_kernels.horner_flat(np.ascontiguousarray(coeffs), np.uint64(x % P)))
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + int(c)) % P
    return acc


# -- vectors -----------------------------------------------------------------

def array(values) -> np.ndarray:
    return np.array([int(v) % P for v in values], dtype=np.uint64)


try:
    from . import _kernels
except ImportError:  # pragma: no cover - numba is optional at runtime
    _kernels = None


def _np_vadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = a + b
    # On wrap, s - p (mod 2^64) equals the true sum minus p.
    return np.where((s < a) | (s >= _P), s - _P, s)


def _np_vsub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a - b
    return np.where(a < b, d + _P, d)


def vneg(a: np.ndarray) -> np.ndarray:
    return np.where(a == 0, a, _P - a)


def _np_vmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a_lo, a_hi = a & _M32, a >> _S32
    b_lo, b_hi = b & _M32, b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = lh + hl
    mid_carry = (mid < lh).astype(np.uint64)
    lo = ll + (mid << _S32)
    lo_carry = (lo < ll).astype(np.uint64)
    hi = hh + (mid >> _S32) + (mid_carry << _S32) + lo_carry
    # 2^64 = 2^32 - 1 and 2^96 = -1 (mod p)
    hi_hi, hi_lo = hi >> _S32, hi & _M32
    t0 = lo - hi_hi
    t0 = np.where(lo < hi_hi, t0 - _EPS, t0)
    t1 = hi_lo * _EPS
    res = t0 + t1
    res = np.where(res < t1, res + _EPS, res)
    return np.where(res >= _P, res - _P, res)


def _elementwise(kernel, fallback):
    def op(a, b):
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        if _kernels is None:
            return fallback(a, b)
        shape = np.broadcast_shapes(a.shape, b.shape)
        a = np.broadcast_to(a, shape).copy() if a.shape != shape else np.ascontiguousarray(a)
        b = np.broadcast_to(b, shape).copy() if b.shape != shape else np.ascontiguousarray(b)
        a, b = a.reshape(-1), b.reshape(-1)
        out = np.empty_like(a)
        kernel(a, b, out)
        return out.reshape(shape)

    op.__name__ = fallback.__name__[4:]
    return op


vadd = _elementwise(_kernels and _kernels.vadd_flat, _np_vadd)
vsub = _elementwise(_kernels and _kernels.vsub_flat, _np_vsub)
vmul = _elementwise(_kernels and _kernels.vmul_flat, _np_vmul)


def vscale(a: np.ndarray, k: int) -> np.ndarray:
    if _kernels is None or not isinstance(a, np.ndarray) or a.dtype != np.uint64:
        return vmul(a, np.uint64(k % P))
    flat = np.ascontiguousarray(a).reshape(-1)
    out = np.empty_like(flat)
    _kernels.vscale_flat(flat, np.uint64(k % P), out)
    return out.reshape(a.shape)


@lru_cache(maxsize=256)
def _powers(base: int, n: int) -> np.ndarray:
    out = [1] * n
    for i in range(1, n):
        out[i] = out[i - 1] * base % P
    arr = np.array(out, dtype=np.uint64)
    arr.flags.writeable = False
    return arr


def vpowers(base: int, n: int) -> np.ndarray:
    """[1, base, base^2, ...]; read-only and cached, copy before mutating."""
    return _powers(base % P, n)


def from_bytes(data: bytes, n: int) -> list[int]:
    """Up to ``n`` field elements from 8-byte big-endian chunks, skipping values >= p."""
    out = []
    for i in range(0, len(data) - 7, 8):
        v = int.from_bytes(data[i:i + 8], "big")
        if v < P:
            out.append(v)
            if len(out) == n:
                break
    return out


def vinv(a: np.ndarray) -> np.ndarray:
    return np.array(batch_inv([int(v) for v in a.ravel()]), dtype=np.uint64).reshape(a.shape)


def divide_by_linear(coeffs, root: int) -> list[int]:
    """Quotient of (f(X) - f(root)) / (X - root) by synthetic division."""
    n = len(coeffs)
    out = [0] * max(n - 1, 0)
    acc = 0
    for i in range(n - 1, 0, -1):
        acc = (acc * root + int(coeffs[i])) % P
        out[i - 1] = acc
    return out

"""Radix-2 NTT, interpolation and coset low-degree extension."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import NonPowerOfTwo
from . import field as F


def _check_pow2(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise NonPowerOfTwo(f"length {n} is not a power of two")


@lru_cache(maxsize=None)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _stage_twiddles(n: int, inverse: bool) -> tuple[np.ndarray, ...]:
    root = F.root_of_unity(n)
    if inverse:
        root = F.inv(root)
    stages = []
    length = 2
    while length <= n:
        w = pow(root, n // length, F.P)
        stages.append(F.vpowers(w, length // 2))
        length *= 2
    return tuple(stages)


@lru_cache(maxsize=None)
def _flat_twiddles(n: int, inverse: bool) -> np.ndarray:
    stages = _stage_twiddles(n, inverse)
    return np.concatenate(stages) if stages else np.zeros(0, dtype=np.uint64)


def ntt(values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Evaluate (or interpolate, with ``inverse``) along the last axis.

    Forward: coefficients -> evaluations at root^i, i = 0..n-1.
    """
    values = np.asarray(values, dtype=np.uint64)
    n = values.shape[-1]
    _check_pow2(n)
    lead = values.shape[:-1]
    if F._kernels is not None:
        rows = np.array(values.reshape(-1, n), dtype=np.uint64, order="C", copy=True)
        F._kernels.ntt_rows(rows, _bitrev(n), _flat_twiddles(n, inverse))
        a = rows.reshape(values.shape)
        return F.vscale(a, F.inv(n)) if inverse else a
    a = values[..., _bitrev(n)]
    length = 2
    for tw in _stage_twiddles(n, inverse):
        half = length // 2
        blocks = a.reshape(*lead, n // length, length)
        even = blocks[..., :half]
        odd = F.vmul(blocks[..., half:], tw)
        a = np.concatenate([F.vadd(even, odd), F.vsub(even, odd)], axis=-1).reshape(*lead, n)
        length *= 2
    if inverse:
        a = F.vscale(a, F.inv(n))
    return a


def interpolate(evals: np.ndarray, shift: int = 1) -> np.ndarray:
    """Coefficients of the polynomial taking ``evals`` on shift * <root_n>."""
    coeffs = ntt(evals, inverse=True)
    if shift != 1:
        n = coeffs.shape[-1]
        coeffs = F.vmul(coeffs, F.vpowers(F.inv(shift), n))
    return coeffs


def evaluate_on_coset(coeffs: np.ndarray, size: int, shift: int) -> np.ndarray:
    """Evaluate along the last axis on shift * <root_size>, zero-padding coefficients."""
    coeffs = np.asarray(coeffs, dtype=np.uint64)
    _check_pow2(size)
    n = coeffs.shape[-1]
    if n > size:
        raise ValueError("more coefficients than evaluation points")
    scaled = F.vmul(coeffs, F.vpowers(shift, n))
    padded = np.zeros(coeffs.shape[:-1] + (size,), dtype=np.uint64)
    padded[..., :n] = scaled
    return ntt(padded)


def coset_points(size: int, shift: int) -> np.ndarray:
    return F.vscale(F.vpowers(F.root_of_unity(size), size), shift)


def lde(column, blowup: int) -> np.ndarray:
    """Extend a column given on the size-n subgroup to the coset GENERATOR * <root_{n*blowup}>."""
    values = np.asarray(column, dtype=np.uint64)
    n = values.shape[-1]
    _check_pow2(n)
    _check_pow2(blowup)
    return evaluate_on_coset(interpolate(values), n * blowup, F.GENERATOR)


def lagrange_eval(xs: list[int], ys: list[int], x: int) -> int:
    """Naive O(n^2) Lagrange evaluation, kept as an independent reference."""
    total = 0
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        num, den = 1, 1
        for j, xj in enumerate(xs):
            if j != i:
                num = num * (x - xj) % F.P
                den = den * (xi - xj) % F.P
        total = (total + yi * num * F.inv(den)) % F.P
    return total

"""Execution trace and constraints for the statement v > x.

Columns, one row per bit position t = 0..63 of d = v - x - 1:

    V  the private value v, constant down the column
    B  bit t of d
    P  2^t
    A  running sum of B_j * P_j for j <= t

The last row pins A_63 = V_0 - x - 1, so a satisfying trace exhibits d as a
64-bit sum of powers of two.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ThresholdNotMet
from .field import P

TRACE_LENGTH = 64
N_CONSTRAINTS = 7
COLUMNS = ("V", "B", "P", "A")


@dataclass
class TraceTable:
    V: list[int]
    B: list[int]
    P: list[int]
    A: list[int]

    def columns(self) -> list[list[int]]:
        return [self.V, self.B, self.P, self.A]


def threshold_trace(v: int, x: int) -> TraceTable:
    if not (0 <= x < 2**64 and 0 <= v < 2**64):
        raise ValueError("v and x must be unsigned 64-bit integers")
    if v <= x:
        raise ThresholdNotMet(f"value {v} does not exceed threshold {x}")
    d = v - x - 1
    bits = [(d >> t) & 1 for t in range(TRACE_LENGTH)]
    powers = [pow(2, t, P) for t in range(TRACE_LENGTH)]
    acc, running = 0, []
    for b, p in zip(bits, powers):
        acc = (acc + b * p) % P
        running.append(acc)
    return TraceTable(V=[v % P] * TRACE_LENGTH, B=bits, P=powers, A=running)


def air_check(trace: TraceTable, x: int) -> bool:
    V, B, Pw, A = (list(c) for c in trace.columns())
    n = TRACE_LENGTH
    if any(len(c) != n for c in (V, B, Pw, A)):
        return False
    if any(b * (b - 1) % P for b in B):
        return False
    if Pw[0] % P != 1 or (A[0] - B[0] * Pw[0]) % P:
        return False
    for t in range(n - 1):
        if (Pw[t + 1] - 2 * Pw[t]) % P:
            return False
        if (V[t + 1] - V[t]) % P:
            return False
        if (A[t + 1] - A[t] - B[t + 1] * Pw[t + 1]) % P:
            return False
    return (A[n - 1] - V[0] + x + 1) % P == 0

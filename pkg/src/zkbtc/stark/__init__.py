"""Minimal transparent STARK for the statement ``v > x`` over the Goldilocks field."""

from .air import TRACE_LENGTH, TraceTable, air_check, threshold_trace
from .fri import FriParams, FriProof, fri_prove, fri_verify
from .poly import lde
from .prover import (
    DEFAULT_QUERIES,
    StarkProof,
    prove_trace,
    stark_prove_threshold,
    stark_verify_threshold,
)

__all__ = [
    "DEFAULT_QUERIES",
    "FriParams",
    "FriProof",
    "StarkProof",
    "TRACE_LENGTH",
    "TraceTable",
    "air_check",
    "fri_prove",
    "fri_verify",
    "lde",
    "prove_trace",
    "stark_prove_threshold",
    "stark_verify_threshold",
    "threshold_trace",
]

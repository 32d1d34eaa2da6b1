"""FRI low-degree test with folding factor 2.

Layer ``i`` is a codeword over ``shift^(2^i) * <root_{n_i}>``. Each Merkle
leaf holds the pair (f(x_j), f(-x_j)) = (f[j], f[j + n_i/2]) so one path
opens both points a fold needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from ..crypto.transcript import Transcript
from ..errors import LengthMismatch
from . import field as F
from .merkle import MerkleTree, encode_rows, verify_path
from .poly import coset_points, interpolate

FINAL_DEGREE_BOUND = 4
_INV2 = F.inv(2)


@dataclass(frozen=True)
class FriParams:
    blowup: int = 8
    n_queries: int = 32
    folding: int = 2
    max_degree: int = 63

    def __post_init__(self):
        if self.folding != 2:
            raise ValueError("only folding factor 2 is supported")
        size = self.domain_size
        if size & (size - 1) or self.blowup < 2:
            raise ValueError("blowup * (max_degree + 1) must be a power of two")

    @property
    def domain_size(self) -> int:
        return self.blowup * (self.max_degree + 1)

    @property
    def n_layers(self) -> int:
        """Number of committed (folded) layers."""
        layers, bound = 0, self.max_degree + 1
        while bound > FINAL_DEGREE_BOUND:
            bound //= 2
            layers += 1
        return layers


@dataclass
class FriLayerOpening:
    pair: tuple[int, int]
    path: list[bytes]


@dataclass
class FriProof:
    layer_roots: list[bytes]
    final_poly: list[int]
    indices: list[int]
    queries: list[list[FriLayerOpening]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "roots": [r.hex() for r in self.layer_roots],
            "final_poly": [f"{c:016x}" for c in self.final_poly],
            "indices": [f"{i:08x}" for i in self.indices],  # fixed width keeps proof size constant
            "queries": [
                [{"pair": [f"{v:016x}" for v in o.pair], "path": [h.hex() for h in o.path]} for o in q]
                for q in self.queries
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> FriProof:
        return cls(
            layer_roots=[bytes.fromhex(r) for r in obj["roots"]],
            final_poly=[int(c, 16) for c in obj["final_poly"]],
            indices=[int(i, 16) for i in obj["indices"]],
            queries=[
                [
                    FriLayerOpening(tuple(int(v, 16) for v in o["pair"]), [bytes.fromhex(h) for h in o["path"]])
                    for o in q
                ]
                for q in obj["queries"]
            ],
        )


@lru_cache(maxsize=64)
def _half_domain_inv2x(n: int, shift: int) -> np.ndarray:
    xs = coset_points(n, shift)[: n // 2]
    return F.vinv(F.vscale(xs, 2))


def fold(codeword: np.ndarray, beta: int, shift: int) -> np.ndarray:
    n = codeword.shape[0]
    a, b = codeword[: n // 2], codeword[n // 2:]
    even = F.vscale(F.vadd(a, b), _INV2)
    odd = F.vmul(F.vsub(a, b), _half_domain_inv2x(n, shift))
    return F.vadd(even, F.vscale(odd, beta))


@lru_cache(maxsize=8192)
def _inv2x(x: int) -> int:
    # domain points repeat across proofs, so verifying many proofs hits the cache
    return F.inv(2 * x)


def fold_point(a: int, b: int, beta: int, x: int) -> int:
    even = (a + b) * _INV2 % F.P
    odd = (a - b) * _inv2x(x) % F.P
    return (even + beta * odd) % F.P


def _pair_rows(codeword: np.ndarray) -> np.ndarray:
    half = codeword.shape[0] // 2
    return np.stack([codeword[:half], codeword[half:]], axis=1)


def _absorb_field_list(transcript: Transcript, label: str, values) -> None:
    transcript.absorb(label, b"".join(int(v).to_bytes(8, "big") for v in values))


def fri_prove(codeword, params: FriParams, transcript: Transcript, shift: int = F.GENERATOR,
              commit_first: bool = True) -> FriProof:
    """Commit-fold-query.

    With ``commit_first=False`` layer 0 is not committed: the caller must
    open it from commitments of its own (a STARK opens trace and composition
    rows and recomputes the DEEP value), and passes those values to
    :func:`fri_check` through ``first_layer``.
    """
    codeword = np.asarray(codeword, dtype=np.uint64)
    if codeword.shape[0] != params.domain_size:
        raise LengthMismatch(f"codeword length {codeword.shape[0]} != {params.domain_size}")
    trees, layers = [], []
    current, current_shift = codeword, shift
    for i in range(params.n_layers):
        if i or commit_first:
            tree = MerkleTree(encode_rows(_pair_rows(current)))
            transcript.absorb(f"fri/root/{i}", tree.root)
            trees.append(tree)
            layers.append(current)
        beta = transcript.challenge_int(f"fri/beta/{i}", F.P)
        current = fold(current, beta, current_shift)
        current_shift = current_shift * current_shift % F.P
    degree_bound = (params.max_degree + 1) >> params.n_layers
    coeffs = interpolate(current, current_shift)
    final_poly = [int(c) for c in coeffs[:degree_bound]]
    _absorb_field_list(transcript, "fri/final", final_poly)
    half = params.domain_size // 2
    indices = [transcript.challenge_int("fri/query", half) for _ in range(params.n_queries)]

    queries = []
    for idx in indices:
        openings, pos = [], idx
        for tree, layer in zip(trees, layers):
            pos = idx % (layer.shape[0] // 2)
            pair = (int(layer[pos]), int(layer[pos + layer.shape[0] // 2]))
            openings.append(FriLayerOpening(pair, tree.path(pos)))
        queries.append(openings)
    return FriProof([t.root for t in trees], final_poly, indices, queries)


def fri_check(proof: FriProof, params: FriParams, transcript: Transcript,
              shift: int = F.GENERATOR,
              first_layer: Callable[[int, int], tuple[int, int] | None] | None = None,
              ) -> list[tuple[int, int, int]] | None:
    """Run the verifier; on success return the layer-0 values (index, f(x), f(-x)).

    ``first_layer(query_number, index)`` supplies layer-0 pairs when the
    proof was made with ``commit_first=False``; returning None rejects.
    """
    n_layers = params.n_layers
    n_committed = n_layers - (first_layer is not None)
    degree_bound = (params.max_degree + 1) >> n_layers
    if len(proof.layer_roots) != n_committed or len(proof.final_poly) > degree_bound:
        return None
    if len(proof.queries) != params.n_queries or len(proof.indices) != params.n_queries:
        return None
    if any(not 0 <= c < F.P for c in proof.final_poly):
        return None
    betas, roots = [], list(proof.layer_roots)
    if first_layer is not None:
        roots.insert(0, None)
    for i, root in enumerate(roots):
        if root is not None:
            transcript.absorb(f"fri/root/{i}", root)
        betas.append(transcript.challenge_int(f"fri/beta/{i}", F.P))
    _absorb_field_list(transcript, "fri/final", proof.final_poly)
    half = params.domain_size // 2
    indices = [transcript.challenge_int("fri/query", half) for _ in range(params.n_queries)]
    if indices != list(proof.indices):
        return None

    openings0 = []
    for q, (idx, openings) in enumerate(zip(indices, proof.queries)):
        if len(openings) != n_committed:
            return None
        n = params.domain_size
        pos, expected = idx, None
        # folding maps x to x^2, so only layer 0 needs an exponentiation;
        # reducing pos by n/2 negates x because the half-order root is -1
        x = shift * pow(F.root_of_unity(n), idx, F.P) % F.P
        opened = iter(openings)
        for i in range(n_layers):
            pos_in_layer = pos
            if pos >= n // 2:
                pos -= n // 2
                x = F.P - x
            if i == 0 and first_layer is not None:
                pair = first_layer(q, pos)
                if pair is None:
                    return None
                a, b = pair
            else:
                opening = next(opened)
                a, b = opening.pair
                if not (0 <= a < F.P and 0 <= b < F.P):
                    return None
                if expected is not None and expected != (a if pos_in_layer < n // 2 else b):
                    return None
                payload = a.to_bytes(8, "big") + b.to_bytes(8, "big")
                if not verify_path(roots[i], pos, payload, opening.path):
                    return None
            if i == 0:
                openings0.append((pos, a, b))
            expected = fold_point(a, b, betas[i], x)
            n //= 2
            x = x * x % F.P
        if expected != F.horner(proof.final_poly, x):
            return None
    return openings0


def fri_verify(proof: FriProof, params: FriParams, transcript: Transcript, shift: int = F.GENERATOR) -> bool:
    return fri_check(proof, params, transcript, shift) is not None

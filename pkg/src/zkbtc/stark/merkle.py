"""SHA-256 Merkle commitments over rows of field elements.

Leaves are hashed with a 0x00 prefix and interior nodes with 0x01, so a
leaf can never be reinterpreted as a node.
"""

from __future__ import annotations

import hashlib

import numpy as np

_sha = hashlib.sha256


def encode_rows(rows: np.ndarray) -> list[bytes]:
    """Canonical leaf payloads: each row's elements as 8-byte big-endian."""
    rows = np.ascontiguousarray(rows, dtype=">u8")
    width = rows.shape[1] * 8
    buf = rows.tobytes()
    return [buf[i:i + width] for i in range(0, len(buf), width)]


def hash_leaf(payload: bytes) -> bytes:
    return _sha(b"\x00" + payload).digest()


def hash_node(left: bytes, right: bytes) -> bytes:
    return _sha(b"\x01" + left + right).digest()


class MerkleTree:
    def __init__(self, payloads: list[bytes]):
        n = len(payloads)
        if n == 0 or n & (n - 1):
            raise ValueError("leaf count must be a power of two")
        level = [_sha(b"\x00" + p).digest() for p in payloads]
        self.levels = [level]
        while len(level) > 1:
            level = [_sha(b"\x01" + level[i] + level[i + 1]).digest() for i in range(0, len(level), 2)]
            self.levels.append(level)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def path(self, index: int) -> list[bytes]:
        out = []
        for level in self.levels[:-1]:
            out.append(level[index ^ 1])
            index >>= 1
        return out


def verify_path(root: bytes, index: int, payload: bytes, path: list[bytes]) -> bool:
    if index >> len(path):
        return False
    node = _sha(b"\x00" + payload).digest()
    for sibling in path:
        node = _sha(b"\x01" + sibling + node if index & 1 else b"\x01" + node + sibling).digest()
        index >>= 1
    return node == root

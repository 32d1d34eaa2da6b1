"""Fiat-Shamir transcript: a SHA-256 chain over length-prefixed messages."""

from __future__ import annotations

import hashlib
import struct


def _frame(data: bytes) -> bytes:
    return struct.pack("<Q", len(data)) + data


class Transcript:
    def __init__(self, label: bytes | str):
        if isinstance(label, str):
            label = label.encode()
        self._state = hashlib.sha256(b"zkbtc/transcript" + _frame(label)).digest()

    def absorb(self, label: bytes | str, data: bytes) -> None:
        if isinstance(label, str):
            label = label.encode()
        self._state = hashlib.sha256(self._state + b"A" + _frame(label) + _frame(data)).digest()

    def challenge_bytes(self, label: bytes | str, n: int = 32) -> bytes:
        if isinstance(label, str):
            label = label.encode()
        out = b""
        counter = 0
        while len(out) < n:
            out += hashlib.sha256(self._state + b"C" + _frame(label) + struct.pack("<I", counter)).digest()
            counter += 1
        # Fold the squeeze back in so successive challenges differ.
        self._state = hashlib.sha256(self._state + b"S" + _frame(label) + out[:n]).digest()
        return out[:n]

    def challenge_int(self, label: bytes | str, modulus: int) -> int:
        """Uniform integer in [0, modulus) by rejection sampling."""
        nbytes = (modulus.bit_length() + 7) // 8
        excess = 8 * nbytes - modulus.bit_length()
        while True:
            value = int.from_bytes(self.challenge_bytes(label, nbytes), "big") >> excess
            if value < modulus:
                return value

    def copy(self) -> Transcript:
        clone = Transcript.__new__(Transcript)
        clone._state = self._state
        return clone

    @property
    def state(self) -> bytes:
        return self._state

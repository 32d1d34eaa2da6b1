"""Designated-verifier sealing: AES-256-GCM under a pre-shared 32-byte key.

This backend is a keyed attestation, not a zero-knowledge proof. Anyone
holding the key learns the whole witness.
"""

from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import MissingDvKey

KEY_SIZE = 32
NONCE_SIZE = 12


def _check_key(key: bytes | None) -> bytes:
    if key is None:
        raise MissingDvKey("designated-verifier backend needs a 32-byte key")
    if len(key) != KEY_SIZE:
        raise MissingDvKey(f"designated-verifier key must be {KEY_SIZE} bytes, got {len(key)}")
    return bytes(key)


def derive_dv_key(seed: bytes) -> bytes:
    return hashlib.sha256(b"zkbtc/dv-key" + seed).digest()


def seal(key: bytes | None, plaintext: bytes, aad: bytes, seed: bytes = b"") -> bytes:
    """nonce || ciphertext. The nonce is derived from the message, so sealing is deterministic."""
    key = _check_key(key)
    nonce = hashlib.sha256(b"zkbtc/dv/nonce" + seed + aad + hashlib.sha256(plaintext).digest()).digest()
    nonce = nonce[:NONCE_SIZE]
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)


def unseal(key: bytes | None, blob: bytes, aad: bytes) -> bytes | None:
    """Plaintext, or None when the blob fails authentication."""
    key = _check_key(key)
    if len(blob) < NONCE_SIZE + 16:
        return None
    try:
        return AESGCM(key).decrypt(blob[:NONCE_SIZE], blob[NONCE_SIZE:], aad)
    except InvalidTag:
        return None

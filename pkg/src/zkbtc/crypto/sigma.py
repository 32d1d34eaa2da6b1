"""Non-interactive Schnorr proof of knowledge of a discrete logarithm."""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass

from ..errors import DecodeError, InvalidPoint, PubkeyMismatch
from .secp256k1 import (
    G,
    N,
    Point,
    SecretKey,
    decode_compressed,
    encode_compressed,
    point_add,
    point_mul,
)
from .transcript import Transcript

SIGMA_LABEL = b"zkbtc/sigma/dlog/v1"


@dataclass(frozen=True)
class SigmaProof:
    commitment: Point
    response: int
    context: bytes

    def serialize(self) -> bytes:
        from ..codec import encode_varint

        return (
            encode_compressed(self.commitment)
            + self.response.to_bytes(32, "big")
            + encode_varint(len(self.context))
            + self.context
        )

    @classmethod
    def deserialize(cls, data: bytes) -> SigmaProof:
        from ..codec import read_varint

        if len(data) < 66:
            raise DecodeError("sigma proof too short")
        try:
            commitment = decode_compressed(data[:33])
        except InvalidPoint as exc:
            raise DecodeError(str(exc)) from exc
        response = int.from_bytes(data[33:65], "big")
        stream = io.BytesIO(data[65:])
        n = read_varint(stream)
        context = stream.read()
        if len(context) != n:
            raise DecodeError("sigma context length mismatch")
        return cls(commitment, response, context)


def sigma_challenge(pub: Point, commitment: Point, context: bytes) -> int:
    t = Transcript(SIGMA_LABEL)
    t.absorb("G", encode_compressed(G))
    t.absorb("pub", encode_compressed(pub))
    t.absorb("A", encode_compressed(commitment))
    t.absorb("context", context)
    return t.challenge_int("c", N)


def derive_nonce(seed: bytes, sk: SecretKey, context: bytes) -> int:
    counter = 0
    while True:
        digest = hashlib.sha256(
            b"zkbtc/sigma/nonce" + seed + sk.to_bytes() + context + counter.to_bytes(4, "little")
        ).digest()
        k = int.from_bytes(digest, "big") % N
        if k:
            return k
        counter += 1


def prove_with_nonce(sk: SecretKey, pub: Point, context: bytes, nonce: int) -> SigmaProof:
    """Prover core with an explicit nonce. Reusing a nonce leaks ``sk``."""
    commitment = point_mul(nonce, G)
    c = sigma_challenge(pub, commitment, context)
    return SigmaProof(commitment, (nonce + c * sk.scalar) % N, context)


def sigma_prove(sk: SecretKey, pub: Point, context: bytes, rng_seed: bytes) -> SigmaProof:
    if point_mul(sk.scalar, G) != pub:
        raise PubkeyMismatch("public key does not match the secret key")
    return prove_with_nonce(sk, pub, context, derive_nonce(rng_seed, sk, context))


def check_equation(pub: Point, commitment: Point, challenge: int, response: int) -> bool:
    """The interactive verifier's test s*G == A + c*pub."""
    if commitment.is_infinity or pub.is_infinity or not 0 <= response < N:
        return False
    return point_mul(response, G) == point_add(commitment, point_mul(challenge, pub))


def sigma_verify(pub: Point, proof: SigmaProof) -> bool:
    if proof.commitment.is_infinity or pub.is_infinity:
        return False
    c = sigma_challenge(pub, proof.commitment, proof.context)
    return check_equation(pub, proof.commitment, c, proof.response)


def simulate(pub: Point, challenge: int, response: int) -> Point:
    """Commitment that makes (A, c, s) an accepting transcript without sk."""
    return point_add(point_mul(response, G), point_mul((-challenge) % N, pub))


def extract(c1: int, s1: int, c2: int, s2: int) -> int:
    """Recover sk from two accepting transcripts sharing a commitment."""
    return (s1 - s2) * pow(c1 - c2, -1, N) % N

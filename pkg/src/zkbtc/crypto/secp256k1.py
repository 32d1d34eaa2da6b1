"""Affine secp256k1 arithmetic over Python integers.

Field elements and scalars are plain ints reduced mod ``P`` / ``N``.
Nothing here is constant time; this is an auditing tool, not a wallet.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from ..errors import InfinityPoint, InvalidPoint
from .hashes import hash160

P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
B = 7


@dataclass(frozen=True)
class Point:
    x: int | None
    y: int | None

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def __post_init__(self):
        if self.x is None:
            if self.y is not None:
                raise InvalidPoint("infinity must have no y coordinate")
            return
        if not (0 <= self.x < P and 0 <= self.y < P):
            raise InvalidPoint("coordinate out of field range")
        if (self.y * self.y - self.x * self.x * self.x - B) % P:
            raise InvalidPoint("point is not on the curve")

    def __add__(self, other: Point) -> Point:
        return point_add(self, other)

    def __neg__(self) -> Point:
        return point_neg(self)

    def __sub__(self, other: Point) -> Point:
        return point_add(self, point_neg(other))

    def __rmul__(self, k: int) -> Point:
        return point_mul(k, self)


INFINITY = Point(None, None)
G = Point(
    0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
)


def point_neg(p: Point) -> Point:
    if p.is_infinity:
        return p
    return Point(p.x, (-p.y) % P)


def point_add(p: Point, q: Point) -> Point:
    if p.is_infinity:
        return q
    if q.is_infinity:
        return p
    if p.x == q.x:
        if (p.y + q.y) % P == 0:
            return INFINITY
        lam = 3 * p.x * p.x * pow(2 * p.y, -1, P) % P
    else:
        lam = (q.y - p.y) * pow(q.x - p.x, -1, P) % P
    x3 = (lam * lam - p.x - q.x) % P
    return Point(x3, (lam * (p.x - x3) - p.y) % P)


def point_mul(k: int, p: Point) -> Point:
    """Left-to-right double-and-add over a fixed 256 iterations."""
    k %= N
    acc = INFINITY
    for i in range(255, -1, -1):
        acc = point_add(acc, acc)
        added = point_add(acc, p)
        if (k >> i) & 1:
            acc = added
    return acc


def encode_compressed(p: Point) -> bytes:
    if p.is_infinity:
        raise InfinityPoint("cannot encode the point at infinity")
    return bytes([2 + (p.y & 1)]) + p.x.to_bytes(32, "big")


def decode_compressed(data: bytes) -> Point:
    if len(data) != 33 or data[0] not in (2, 3):
        raise InvalidPoint("expected a 33-byte compressed point")
    x = int.from_bytes(data[1:], "big")
    if x >= P:
        raise InvalidPoint("x coordinate out of range")
    y2 = (pow(x, 3, P) + B) % P
    y = pow(y2, (P + 1) // 4, P)
    if y * y % P != y2:
        raise InvalidPoint("x is not on the curve")
    if (y & 1) != (data[0] & 1):
        y = P - y
    return Point(x, y)


def pubkey_hash(p: Point) -> bytes:
    """hash160 of the compressed encoding (the P2PKH key hash)."""
    return hash160(encode_compressed(p))


@dataclass(frozen=True)
class SecretKey:
    scalar: int

    def __post_init__(self):
        if not 1 <= self.scalar < N:
            raise ValueError("secret scalar must lie in [1, n)")

    @cached_property
    def public_point(self) -> Point:
        return point_mul(self.scalar, G)

    def to_bytes(self) -> bytes:
        return self.scalar.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> SecretKey:
        return cls(int.from_bytes(data, "big"))

    def __repr__(self) -> str:
        return "SecretKey(<hidden>)"

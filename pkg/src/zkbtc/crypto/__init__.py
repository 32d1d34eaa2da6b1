from .hashes import dsha256, hash160, ripemd160, sha256
from .secp256k1 import (
    G,
    INFINITY,
    N,
    P,
    Point,
    SecretKey,
    decode_compressed,
    encode_compressed,
    point_add,
    point_mul,
    point_neg,
    pubkey_hash,
)
from .sigma import SigmaProof, sigma_prove, sigma_verify
from .transcript import Transcript

__all__ = [
    "G",
    "INFINITY",
    "N",
    "P",
    "Point",
    "SecretKey",
    "SigmaProof",
    "Transcript",
    "decode_compressed",
    "dsha256",
    "encode_compressed",
    "hash160",
    "point_add",
    "point_mul",
    "point_neg",
    "pubkey_hash",
    "ripemd160",
    "sha256",
    "sigma_prove",
    "sigma_verify",
]

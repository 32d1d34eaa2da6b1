"""Bitcoin consensus serialization: headers, transactions, Merkle trees, nBits.

Hashes are kept in internal (on-wire) byte order everywhere; only the hex
helpers reverse bytes for display.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

from .crypto.hashes import dsha256
from .errors import (
    BadSegwitMarker,
    EmptyLeaves,
    IndexOutOfRange,
    MalformedTransaction,
    NegativeTarget,
    TargetOverflow,
    TrailingBytes,
    Truncated,
    VarIntNonCanonical,
    WrongLength,
    ZeroTarget,
)

MAX_MONEY = 21_000_000 * 100_000_000
HEADER_SIZE = 80


class Hash256(bytes):
    """32 raw bytes in internal order; ``str()`` gives the reversed display hex."""

    def __new__(cls, value: bytes = b"\x00" * 32):
        if len(value) != 32:
            raise WrongLength(f"hash must be 32 bytes, got {len(value)}")
        return super().__new__(cls, value)

    @classmethod
    def from_hex(cls, display_hex: str) -> Hash256:
        raw = bytes.fromhex(display_hex)
        return cls(raw[::-1])

    def __str__(self) -> str:
        return self[::-1].hex()

    def __repr__(self) -> str:
        return f"Hash256({str(self)!r})"


ZERO_HASH = Hash256()


def hash256(data: bytes) -> Hash256:
    return Hash256(dsha256(data))


# -- compact-size integers ---------------------------------------------------

def encode_varint(n: int) -> bytes:
    if n < 0xFD:
        return bytes([n])
    if n <= 0xFFFF:
        return b"\xfd" + struct.pack("<H", n)
    if n <= 0xFFFFFFFF:
        return b"\xfe" + struct.pack("<I", n)
    return b"\xff" + struct.pack("<Q", n)


def _read(stream: io.BytesIO, n: int) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise Truncated(f"needed {n} bytes, got {len(data)}")
    return data


def read_varint(stream: io.BytesIO) -> int:
    prefix = _read(stream, 1)[0]
    if prefix < 0xFD:
        return prefix
    if prefix == 0xFD:
        value, floor = struct.unpack("<H", _read(stream, 2))[0], 0xFD
    elif prefix == 0xFE:
        value, floor = struct.unpack("<I", _read(stream, 4))[0], 0x10000
    else:
        value, floor = struct.unpack("<Q", _read(stream, 8))[0], 0x100000000
    if value < floor:
        raise VarIntNonCanonical(f"value {value} encoded with prefix {prefix:#x}")
    return value


def _read_bytes(stream: io.BytesIO) -> bytes:
    return _read(stream, read_varint(stream))


def _var_bytes(data: bytes) -> bytes:
    return encode_varint(len(data)) + data


# -- headers -----------------------------------------------------------------

@dataclass(frozen=True)
class BlockHeader:
    version: int
    prev_hash: Hash256
    merkle_root: Hash256
    timestamp: int
    nbits: int
    nonce: int

    def serialize(self) -> bytes:
        return (
            struct.pack("<i", self.version)
            + self.prev_hash
            + self.merkle_root
            + struct.pack("<III", self.timestamp, self.nbits, self.nonce)
        )

    @property
    def hash(self) -> Hash256:
        return hash256(self.serialize())

    def to_json(self) -> dict:
        return {
            "hash": str(self.hash),
            "version": self.version,
            "prev_hash": str(self.prev_hash),
            "merkle_root": str(self.merkle_root),
            "timestamp": self.timestamp,
            "nbits": f"{self.nbits:08x}",
            "nonce": self.nonce,
        }


def encode_header(h: BlockHeader) -> bytes:
    return h.serialize()


def decode_header(data: bytes) -> BlockHeader:
    if len(data) != HEADER_SIZE:
        raise WrongLength(f"header must be 80 bytes, got {len(data)}")
    (version,) = struct.unpack_from("<i", data, 0)
    timestamp, nbits, nonce = struct.unpack_from("<III", data, 68)
    return BlockHeader(
        version=version,
        prev_hash=Hash256(data[4:36]),
        merkle_root=Hash256(data[36:68]),
        timestamp=timestamp,
        nbits=nbits,
        nonce=nonce,
    )


def decode_headers(data: bytes) -> list[BlockHeader]:
    """Split a headers file (bare concatenation of 80-byte records)."""
    if len(data) % HEADER_SIZE:
        raise WrongLength(f"headers blob length {len(data)} is not a multiple of 80")
    return [decode_header(data[i:i + HEADER_SIZE]) for i in range(0, len(data), HEADER_SIZE)]


# -- transactions ------------------------------------------------------------

@dataclass(frozen=True)
class OutPoint:
    txid: Hash256
    vout: int

    def serialize(self) -> bytes:
        return self.txid + struct.pack("<I", self.vout)


COINBASE_OUTPOINT = OutPoint(ZERO_HASH, 0xFFFFFFFF)


@dataclass(frozen=True)
class TxIn:
    prevout: OutPoint
    script_sig: bytes
    sequence: int = 0xFFFFFFFF
    witness: tuple[bytes, ...] = ()


@dataclass(frozen=True)
class TxOut:
    value: int
    script_pubkey: bytes

    def __post_init__(self):
        if not 0 <= self.value <= MAX_MONEY:
            raise MalformedTransaction(f"output value {self.value} out of range")

    def serialize(self) -> bytes:
        return struct.pack("<Q", self.value) + _var_bytes(self.script_pubkey)


@dataclass(frozen=True)
class Transaction:
    version: int
    inputs: tuple[TxIn, ...]
    outputs: tuple[TxOut, ...]
    locktime: int = 0
    has_witness: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not self.inputs or not self.outputs:
            raise MalformedTransaction("transaction needs at least one input and one output")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    def serialize(self, include_witness: bool = True) -> bytes:
        segwit = include_witness and self.has_witness
        parts = [struct.pack("<i", self.version)]
        if segwit:
            parts.append(b"\x00\x01")
        parts.append(encode_varint(len(self.inputs)))
        for txin in self.inputs:
            parts.append(txin.prevout.serialize())
            parts.append(_var_bytes(txin.script_sig))
            parts.append(struct.pack("<I", txin.sequence))
        parts.append(encode_varint(len(self.outputs)))
        parts.extend(out.serialize() for out in self.outputs)
        if segwit:
            for txin in self.inputs:
                parts.append(encode_varint(len(txin.witness)))
                parts.extend(_var_bytes(item) for item in txin.witness)
        parts.append(struct.pack("<I", self.locktime))
        return b"".join(parts)

    @property
    def txid(self) -> Hash256:
        if "txid" not in self._cache:
            self._cache["txid"] = hash256(self.serialize(include_witness=False))
        return self._cache["txid"]

    @property
    def wtxid(self) -> Hash256:
        return hash256(self.serialize())

    @property
    def is_coinbase(self) -> bool:
        return len(self.inputs) == 1 and self.inputs[0].prevout == COINBASE_OUTPOINT

    def to_json(self) -> dict:
        return {
            "txid": str(self.txid),
            "wtxid": str(self.wtxid),
            "version": self.version,
            "has_witness": self.has_witness,
            "locktime": self.locktime,
            "inputs": [
                {
                    "txid": str(i.prevout.txid),
                    "vout": i.prevout.vout,
                    "script_sig": i.script_sig.hex(),
                    "sequence": i.sequence,
                    "witness": [w.hex() for w in i.witness],
                }
                for i in self.inputs
            ],
            "outputs": [
                {"value": o.value, "script_pubkey": o.script_pubkey.hex()}
                for o in self.outputs
            ],
        }


def encode_tx(tx: Transaction) -> bytes:
    return tx.serialize()


def read_tx(stream: io.BytesIO) -> Transaction:
    """Parse one transaction from ``stream``, leaving it positioned after it."""
    (version,) = struct.unpack("<i", _read(stream, 4))
    has_witness = False
    n_in = read_varint(stream)
    if n_in == 0:
        flag = _read(stream, 1)[0]
        if flag != 0x01:
            raise BadSegwitMarker(f"segwit flag must be 0x01, got {flag:#04x}")
        has_witness = True
        n_in = read_varint(stream)
    if n_in == 0:
        raise MalformedTransaction("transaction has no inputs")
    raw_inputs = []
    for _ in range(n_in):
        prevout = OutPoint(Hash256(_read(stream, 32)), struct.unpack("<I", _read(stream, 4))[0])
        script_sig = _read_bytes(stream)
        (sequence,) = struct.unpack("<I", _read(stream, 4))
        raw_inputs.append((prevout, script_sig, sequence))
    n_out = read_varint(stream)
    if n_out == 0:
        raise MalformedTransaction("transaction has no outputs")
    outputs = []
    for _ in range(n_out):
        (value,) = struct.unpack("<Q", _read(stream, 8))
        outputs.append(TxOut(value, _read_bytes(stream)))
    witnesses: list[tuple[bytes, ...]] = [()] * n_in
    if has_witness:
        witnesses = [
            tuple(_read_bytes(stream) for _ in range(read_varint(stream)))
            for _ in range(n_in)
        ]
    (locktime,) = struct.unpack("<I", _read(stream, 4))
    inputs = tuple(
        TxIn(prevout, script_sig, sequence, witness)
        for (prevout, script_sig, sequence), witness in zip(raw_inputs, witnesses)
    )
    return Transaction(version, inputs, tuple(outputs), locktime, has_witness)


def decode_tx(data: bytes) -> Transaction:
    stream = io.BytesIO(data)
    tx = read_tx(stream)
    if stream.tell() != len(data):
        raise TrailingBytes(f"{len(data) - stream.tell()} bytes after transaction")
    return tx


def txid(tx: Transaction) -> Hash256:
    return tx.txid


def encode_block_body(txs: list[Transaction]) -> bytes:
    """Block body file format: varint tx count followed by serialized txs."""
    return encode_varint(len(txs)) + b"".join(tx.serialize() for tx in txs)


def decode_block_body(data: bytes) -> list[Transaction]:
    stream = io.BytesIO(data)
    txs = [read_tx(stream) for _ in range(read_varint(stream))]
    if stream.tell() != len(data):
        raise TrailingBytes(f"{len(data) - stream.tell()} bytes after block body")
    return txs


# -- Merkle trees ------------------------------------------------------------

@dataclass(frozen=True)
class MerkleBranch:
    leaf_index: int
    siblings: tuple[Hash256, ...]

    def to_json(self) -> dict:
        return {"leaf_index": self.leaf_index, "siblings": [str(s) for s in self.siblings]}

    @classmethod
    def from_json(cls, obj: dict) -> MerkleBranch:
        return cls(obj["leaf_index"], tuple(Hash256.from_hex(s) for s in obj["siblings"]))


def _next_level(level: list[bytes]) -> list[bytes]:
    if len(level) % 2:
        level = level + [level[-1]]
    return [dsha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]


def merkle_root(leaves: list[bytes]) -> Hash256:
    if not leaves:
        raise EmptyLeaves("merkle_root of an empty list")
    level = list(leaves)
    while len(level) > 1:
        level = _next_level(level)
    return Hash256(level[0])


def build_merkle_branch(leaves: list[bytes], index: int) -> MerkleBranch:
    if not 0 <= index < len(leaves):
        raise IndexOutOfRange(f"leaf index {index} out of range for {len(leaves)} leaves")
    siblings = []
    level, pos = list(leaves), index
    while len(level) > 1:
        if len(level) % 2:
            level = level + [level[-1]]
        siblings.append(Hash256(level[pos ^ 1]))
        level = _next_level(level)
        pos >>= 1
    return MerkleBranch(index, tuple(siblings))


def verify_merkle_branch(leaf: bytes, branch: MerkleBranch, root: bytes, strict: bool = False) -> bool:
    """Fold ``leaf`` up through ``branch`` and compare with ``root``.

    With ``strict`` set, any level where the sibling equals the running hash
    (the duplicated-last-node shape behind CVE-2012-2459) is rejected.
    """
    if branch.leaf_index >> len(branch.siblings):
        return False
    running = bytes(leaf)
    for depth, sibling in enumerate(branch.siblings):
        if strict and sibling == running:
            return False
        if (branch.leaf_index >> depth) & 1:
            running = dsha256(sibling + running)
        else:
            running = dsha256(running + sibling)
    return running == bytes(root)


# -- scripts -----------------------------------------------------------------

def p2pkh_script(pubkey_hash: bytes) -> bytes:
    """OP_DUP OP_HASH160 <20 bytes> OP_EQUALVERIFY OP_CHECKSIG"""
    if len(pubkey_hash) != 20:
        raise WrongLength(f"pubkey hash must be 20 bytes, got {len(pubkey_hash)}")
    return b"\x76\xa9\x14" + pubkey_hash + b"\x88\xac"


# -- compact targets ---------------------------------------------------------

def nbits_to_target(nbits: int) -> int:
    exponent = nbits >> 24
    mantissa = nbits & 0x007FFFFF
    if mantissa == 0:
        return 0
    if nbits & 0x00800000:
        raise NegativeTarget(f"nbits {nbits:#010x} has the sign bit set")
    if exponent <= 3:
        target = mantissa >> (8 * (3 - exponent))
    else:
        target = mantissa << (8 * (exponent - 3))
    if target >> 256:
        raise TargetOverflow(f"nbits {nbits:#010x} encodes a target >= 2^256")
    return target


def target_to_nbits(target: int) -> int:
    if target <= 0:
        raise ZeroTarget("target must be positive")
    if target >> 256:
        raise TargetOverflow("target >= 2^256")
    size = (target.bit_length() + 7) // 8
    if size <= 3:
        mantissa = target << (8 * (3 - size))
    else:
        mantissa = target >> (8 * (size - 3))
    if mantissa & 0x00800000:
        mantissa >>= 8
        size += 1
    return (size << 24) | mantissa

"""Epoch proofs and fold-style client sync.

Each epoch statement commits to the chain state before and after a batch of
headers and to the hash of the previous statement, so the statements form a
hash chain. A client keeps only the latest statement hash and chain state.

Only the designated-verifier backend is implemented: the prover seals the
epoch's headers and block bodies, and the verifier decrypts and re-executes
every check.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

from . import dv
from .chain import ChainParams, ChainState, genesis_state, validate_header
from .codec import (
    HEADER_SIZE,
    BlockHeader,
    Transaction,
    _read,
    decode_block_body,
    decode_header,
    decode_tx,
    encode_block_body,
    encode_varint,
    merkle_root,
    read_varint,
)
from .errors import (
    BadLinkage,
    ChainValidationError,
    DecodeError,
    InvalidEpoch,
    LinkageBroken,
    PowNotSatisfied,
    ProofInvalid,
    SyncError,
    WrongDifficulty,
)

GENESIS_MARKER = bytes(32)
DEFAULT_EPOCH_LENGTH = 8
_STATEMENT_SIZE = 32 * 4 + 4


@dataclass(frozen=True)
class EpochStatement:
    prev_commitment: bytes
    start_state: bytes
    end_state: bytes
    n_headers: int
    headers_root: bytes

    def __post_init__(self):
        if self.n_headers < 1:
            raise ValueError("an epoch covers at least one header")

    def serialize(self) -> bytes:
        return (self.prev_commitment + self.start_state + self.end_state
                + struct.pack("<I", self.n_headers) + self.headers_root)

    @classmethod
    def deserialize(cls, data: bytes) -> EpochStatement:
        if len(data) != _STATEMENT_SIZE:
            raise DecodeError(f"epoch statement must be {_STATEMENT_SIZE} bytes")
        (n,) = struct.unpack_from("<I", data, 96)
        return cls(data[:32], data[32:64], data[64:96], n, data[100:132])

    def commitment(self) -> bytes:
        return hashlib.sha256(b"zkbtc/epoch" + self.serialize()).digest()

    def to_json(self) -> dict:
        return {
            "prev": self.prev_commitment.hex(),
            "start": self.start_state.hex(),
            "end": self.end_state.hex(),
            "n": self.n_headers,
            "headers_root": self.headers_root.hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> EpochStatement:
        return cls(bytes.fromhex(obj["prev"]), bytes.fromhex(obj["start"]), bytes.fromhex(obj["end"]),
                   int(obj["n"]), bytes.fromhex(obj["headers_root"]))


@dataclass(frozen=True)
class EpochProof:
    statement: EpochStatement
    dv_blob: bytes
    backend: str = "dv"

    def to_json(self) -> dict:
        return {"statement": self.statement.to_json(), "backend": self.backend, "dv_blob": self.dv_blob.hex()}

    @classmethod
    def from_json(cls, obj: dict) -> EpochProof:
        return cls(EpochStatement.from_json(obj["statement"]), bytes.fromhex(obj["dv_blob"]), obj["backend"])


@dataclass(frozen=True)
class ClientState:
    latest_statement_commitment: bytes
    chain_state: ChainState
    epochs_verified: int = 0

    def serialize(self) -> bytes:
        return self.latest_statement_commitment + self.chain_state.serialize() + struct.pack("<Q", self.epochs_verified)

    @classmethod
    def deserialize(cls, data: bytes) -> ClientState:
        return cls(data[:32], ChainState.deserialize(data[32:-8]), struct.unpack("<Q", data[-8:])[0])

    def to_json(self) -> dict:
        obj = self.chain_state.to_json()
        obj["latest_statement_commitment"] = self.latest_statement_commitment.hex()
        obj["epochs_verified"] = self.epochs_verified
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> ClientState:
        return cls(bytes.fromhex(obj["latest_statement_commitment"]), ChainState.from_json(obj),
                   int(obj.get("epochs_verified", 0)))


def initial_client(params: ChainParams) -> ClientState:
    return ClientState(GENESIS_MARKER, genesis_state(params), 0)


# -- epoch checks (run by both prover and verifier) ----------------------------

_CHECK_NAMES = {BadLinkage: "linkage", WrongDifficulty: "difficulty", PowNotSatisfied: "pow"}


def _check_transactions(height: int, header: BlockHeader, txs: list[Transaction]) -> None:
    if not txs:
        raise InvalidEpoch("block has no transactions", height, "transactions")
    if not txs[0].is_coinbase or any(t.is_coinbase for t in txs[1:]):
        raise InvalidEpoch("coinbase must be the first and only coinbase", height, "coinbase")
    for t in txs:
        raw = t.serialize()
        try:
            again = decode_tx(raw)
        except DecodeError as exc:
            raise InvalidEpoch(f"transaction does not re-parse: {exc}", height, "transactions") from exc
        if again.txid != t.txid:
            raise InvalidEpoch("txid recomputation mismatch", height, "txid")
    if merkle_root([t.txid for t in txs]) != header.merkle_root:
        raise InvalidEpoch("merkle root does not match transactions", height, "merkle_root")


def run_epoch(start: ChainState, blocks, params: ChainParams) -> tuple[ChainState, bytes]:
    """Apply an epoch to ``start``; returns (end state, merkle root of header hashes)."""
    blocks = list(blocks)
    if not blocks:
        raise InvalidEpoch("empty epoch", start.height, "length")
    state = start
    for header, txs in blocks:
        try:
            state = validate_header(state, header, params)
        except ChainValidationError as exc:
            raise InvalidEpoch(str(exc), exc.height, _CHECK_NAMES.get(type(exc), "header")) from exc
        _check_transactions(state.height, header, list(txs))
    return state, merkle_root([h.hash for h, _ in blocks])


def _encode_payload(start: ChainState, blocks) -> bytes:
    out = [start.serialize(), encode_varint(len(blocks))]
    for header, txs in blocks:
        body = encode_block_body(list(txs))
        out.append(header.serialize() + encode_varint(len(body)) + body)
    return b"".join(out)


def _decode_payload(data: bytes) -> tuple[ChainState, list[tuple[BlockHeader, list[Transaction]]]]:
    s = io.BytesIO(data)
    start = ChainState.deserialize(_read(s, 160))
    blocks = []
    for _ in range(read_varint(s)):
        header = decode_header(_read(s, HEADER_SIZE))
        blocks.append((header, decode_block_body(_read(s, read_varint(s)))))
    if s.read(1):
        raise DecodeError("trailing bytes in epoch payload")
    return start, blocks


def seal_epoch(statement: EpochStatement, start: ChainState, blocks, dv_key: bytes) -> EpochProof:
    """Seal without checking anything. Honest callers go through :func:`prove_epoch`."""
    blocks = list(blocks)
    return EpochProof(statement, dv.seal(dv_key, _encode_payload(start, blocks), statement.serialize()))


def prove_epoch(prev: EpochStatement | None, start: ChainState, blocks, params: ChainParams,
                dv_key: bytes) -> EpochProof:
    """``prev=None`` starts from genesis; otherwise ``start`` must be the state ``prev`` ends in."""
    blocks = list(blocks)
    if prev is None:
        if start != genesis_state(params):
            raise InvalidEpoch("first epoch must start at genesis", start.height, "linkage")
        prev_commitment = GENESIS_MARKER
    else:
        if start.digest() != prev.end_state:
            raise InvalidEpoch("start state is not the previous epoch's end", start.height, "linkage")
        prev_commitment = prev.commitment()
    end, headers_root = run_epoch(start, blocks, params)
    statement = EpochStatement(prev_commitment, start.digest(), end.digest(), len(blocks), headers_root)
    return seal_epoch(statement, start, blocks, dv_key)


def verify_epoch(client: ClientState, proof: EpochProof, params: ChainParams, dv_key: bytes) -> ClientState:
    st = proof.statement
    if proof.backend != "dv":
        raise ProofInvalid(f"unsupported epoch backend {proof.backend!r}")
    if st.prev_commitment != client.latest_statement_commitment:
        raise LinkageBroken("epoch does not extend the client's latest statement")
    if st.start_state != client.chain_state.digest():
        raise LinkageBroken("epoch start state differs from the client's state")
    payload = dv.unseal(dv_key, proof.dv_blob, st.serialize())
    if payload is None:
        raise ProofInvalid("sealed epoch failed authentication")
    try:
        start, blocks = _decode_payload(payload)
    except (DecodeError, ValueError) as exc:
        raise ProofInvalid(f"sealed epoch does not decode: {exc}") from exc
    if start != client.chain_state:
        raise LinkageBroken("sealed start state differs from the client's state")
    try:
        end, headers_root = run_epoch(start, blocks, params)
    except InvalidEpoch as exc:
        raise ProofInvalid(f"{exc.check} check failed at height {exc.height}: {exc}") from exc
    if (end.digest(), len(blocks), headers_root) != (st.end_state, st.n_headers, st.headers_root):
        raise ProofInvalid("statement does not match the re-executed epoch")
    return ClientState(st.commitment(), end, client.epochs_verified + 1)


def sync(client: ClientState, proofs, params: ChainParams, dv_key: bytes) -> ClientState:
    """Left fold of :func:`verify_epoch`; raises :class:`SyncError` at the first bad epoch."""
    for index, proof in enumerate(proofs):
        try:
            client = verify_epoch(client, proof, params, dv_key)
        except (LinkageBroken, ProofInvalid) as exc:
            raise SyncError(index, exc, client) from exc
    return client


def prove_chain(blocks, params: ChainParams, dv_key: bytes, epoch_length: int = DEFAULT_EPOCH_LENGTH
                ) -> list[EpochProof]:
    """Epoch proofs for ``blocks`` (everything after genesis); the last epoch may be short."""
    if epoch_length < 1:
        raise ValueError("epoch length must be >= 1")
    blocks = list(blocks)
    proofs: list[EpochProof] = []
    prev, state = None, genesis_state(params)
    for i in range(0, len(blocks), epoch_length):
        batch = blocks[i:i + epoch_length]
        proof = prove_epoch(prev, state, batch, params, dv_key)
        state, _ = run_epoch(state, batch, params)
        prev = proof.statement
        proofs.append(proof)
    return proofs


def write_proofs(proofs: list[EpochProof], directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, p in enumerate(proofs):
        (d / f"epoch_{i:04d}.json").write_text(json.dumps(p.to_json(), sort_keys=True) + "\n")


def read_proofs(directory: str | Path) -> list[EpochProof]:
    return [EpochProof.from_json(json.loads(p.read_text())) for p in sorted(Path(directory).glob("epoch_*.json"))]


__all__ = [
    "ClientState",
    "EpochProof",
    "EpochStatement",
    "GENESIS_MARKER",
    "initial_client",
    "prove_chain",
    "prove_epoch",
    "read_proofs",
    "run_epoch",
    "seal_epoch",
    "sync",
    "verify_epoch",
    "write_proofs",
]

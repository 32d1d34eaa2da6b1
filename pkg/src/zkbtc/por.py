"""Proof of reserve for a single P2PKH output.

Statement: some output worth more than ``threshold_x`` is included in one of
the given headers, is still unspent across the later headers, and pays a key
the prover controls.

Two backends:

``dv``
    The witness sealed under a verifier key; the verifier re-runs
    :func:`check_relation`. Complete and sound, but not zero-knowledge.
``hybrid``
    A Schnorr proof of key knowledge plus a STARK for ``v > X``, bound to one
    Fiat-Shamir context (public digest and a salted witness commitment). It
    establishes threshold and key knowledge bound to a committed outpoint. It
    does NOT prove that the committed outpoint is included, unspent, or pays
    that key; only the ``dv`` backend checks those.
"""

from __future__ import annotations

import enum
import hashlib
import io
import json
import struct
from dataclasses import dataclass

from . import dv
from .codec import (
    BlockHeader,
    MerkleBranch,
    OutPoint,
    Transaction,
    _read,
    decode_tx,
    encode_varint,
    merkle_root,
    read_varint,
    verify_merkle_branch,
)
from .crypto.secp256k1 import SecretKey, decode_compressed, encode_compressed, pubkey_hash
from .crypto.sigma import SigmaProof, sigma_prove, sigma_verify
from .errors import (
    DecodeError,
    IndexOutOfRange,
    InvalidPoint,
    NotP2pkh,
    RelationUnsatisfied,
    UnknownBackend,
)
from .stark import DEFAULT_QUERIES, StarkProof, stark_prove_threshold, stark_verify_threshold

PROOF_VERSION = 1
BACKENDS = ("dv", "hybrid")


class Failure(enum.Enum):
    INCLUSION_FAILED = "InclusionFailed"
    NOT_P2PKH = "NotP2pkh"
    VALUE_BELOW_THRESHOLD = "ValueBelowThreshold"
    KEY_MISMATCH = "KeyMismatch"
    SPENT_UTXO = "SpentUtxo"
    SCAN_INCOMPLETE = "ScanIncomplete"


@dataclass(frozen=True)
class PorPublicInputs:
    threshold_x: int
    headers: tuple[BlockHeader, ...]

    def __post_init__(self):
        if not 0 <= self.threshold_x < 1 << 64:
            raise ValueError("threshold must fit in 64 bits")
        object.__setattr__(self, "headers", tuple(self.headers))

    def encode(self) -> bytes:
        return struct.pack("<Q", self.threshold_x) + b"".join(h.serialize() for h in self.headers)

    def digest(self) -> bytes:
        return hashlib.sha256(self.encode()).digest()


@dataclass(frozen=True)
class PorWitness:
    raw_tx: bytes
    vout: int
    secret_key: SecretKey
    merkle_branch: MerkleBranch
    block_index: int
    # (block index, raw transactions); may include block_index itself
    spend_scan_blocks: tuple[tuple[int, tuple[bytes, ...]], ...] = ()

    def encode(self) -> bytes:
        out = [encode_varint(len(self.raw_tx)), self.raw_tx, struct.pack("<I", self.vout),
               self.secret_key.to_bytes(), struct.pack("<I", self.merkle_branch.leaf_index),
               encode_varint(len(self.merkle_branch.siblings))]
        out.extend(bytes(s) for s in self.merkle_branch.siblings)
        out.append(struct.pack("<I", self.block_index))
        out.append(encode_varint(len(self.spend_scan_blocks)))
        for index, txs in self.spend_scan_blocks:
            out.append(struct.pack("<I", index) + encode_varint(len(txs)))
            for raw in txs:
                out.append(encode_varint(len(raw)) + raw)
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> PorWitness:
        s = io.BytesIO(data)
        raw_tx = _read(s, read_varint(s))
        (vout,) = struct.unpack("<I", _read(s, 4))
        sk = SecretKey.from_bytes(_read(s, 32))
        (leaf,) = struct.unpack("<I", _read(s, 4))
        siblings = tuple(_read(s, 32) for _ in range(read_varint(s)))
        (block_index,) = struct.unpack("<I", _read(s, 4))
        scan = []
        for _ in range(read_varint(s)):
            (index,) = struct.unpack("<I", _read(s, 4))
            scan.append((index, tuple(_read(s, read_varint(s)) for _ in range(read_varint(s)))))
        if s.read(1):
            raise DecodeError("trailing bytes after witness")
        return cls(raw_tx, vout, sk, MerkleBranch(leaf, siblings), block_index, tuple(scan))


@dataclass(frozen=True)
class RelationVerdict:
    accepted: bool
    failure: Failure | None = None

    @classmethod
    def reject(cls, failure: Failure) -> RelationVerdict:
        return cls(False, failure)


ACCEPT = RelationVerdict(True)


# -- relation -----------------------------------------------------------------

def extract_output(tx: Transaction, vout: int) -> tuple[int, bytes]:
    if not 0 <= vout < len(tx.outputs):
        raise IndexOutOfRange(f"vout {vout} out of range for {len(tx.outputs)} outputs")
    out = tx.outputs[vout]
    return out.value, out.script_pubkey


def parse_p2pkh(script: bytes) -> bytes:
    if len(script) == 25 and script[:3] == b"\x76\xa9\x14" and script[23:] == b"\x88\xac":
        return bytes(script[3:23])
    raise NotP2pkh(f"script {script.hex()} is not pay-to-pubkey-hash")


def _scan(public: PorPublicInputs, witness: PorWitness, outpoint: OutPoint) -> Failure | None:
    needed = set(range(witness.block_index + 1, len(public.headers)))
    seen = set()
    for index, raw_txs in witness.spend_scan_blocks:
        if not witness.block_index <= index < len(public.headers) or index in seen:
            return Failure.SCAN_INCOMPLETE
        seen.add(index)
        try:
            txs = [decode_tx(raw) for raw in raw_txs]
        except DecodeError:
            return Failure.SCAN_INCOMPLETE
        if not txs or merkle_root([t.txid for t in txs]) != public.headers[index].merkle_root:
            return Failure.SCAN_INCOMPLETE
    if not needed <= seen:
        return Failure.SCAN_INCOMPLETE
    for _, raw_txs in witness.spend_scan_blocks:
        for raw in raw_txs:
            if any(i.prevout == outpoint for i in decode_tx(raw).inputs):
                return Failure.SPENT_UTXO
    return None


def check_relation(public: PorPublicInputs, witness: PorWitness) -> RelationVerdict:
    """The reference oracle. Checks run in a fixed order and the first failure wins."""
    try:
        tx = decode_tx(witness.raw_tx)
    except DecodeError:
        return RelationVerdict.reject(Failure.INCLUSION_FAILED)
    if not 0 <= witness.block_index < len(public.headers):
        return RelationVerdict.reject(Failure.INCLUSION_FAILED)
    root = public.headers[witness.block_index].merkle_root
    if not verify_merkle_branch(tx.txid, witness.merkle_branch, root):
        return RelationVerdict.reject(Failure.INCLUSION_FAILED)

    try:
        value, script = extract_output(tx, witness.vout)
        pkh = parse_p2pkh(script)
    except (IndexOutOfRange, NotP2pkh):
        return RelationVerdict.reject(Failure.NOT_P2PKH)

    if not value > public.threshold_x:
        return RelationVerdict.reject(Failure.VALUE_BELOW_THRESHOLD)

    if pubkey_hash(witness.secret_key.public_point) != pkh:
        return RelationVerdict.reject(Failure.KEY_MISMATCH)

    failure = _scan(public, witness, OutPoint(tx.txid, witness.vout))
    return ACCEPT if failure is None else RelationVerdict.reject(failure)


# -- proofs -------------------------------------------------------------------

@dataclass
class PorProof:
    backend: str
    public_digest: bytes
    witness_commitment: bytes
    sigma: SigmaProof | None = None
    pubkey: bytes | None = None  # compressed; disclosed by the hybrid backend
    stark: StarkProof | None = None
    dv_blob: bytes | None = None

    def to_json(self) -> dict:
        return {
            "version": PROOF_VERSION,
            "backend": self.backend,
            "public_digest": self.public_digest.hex(),
            "witness_commitment": self.witness_commitment.hex(),
            "sigma": self.sigma.serialize().hex() if self.sigma else None,
            "pubkey": self.pubkey.hex() if self.pubkey else None,
            "stark": self.stark.to_json() if self.stark else None,
            "dv_blob": self.dv_blob.hex() if self.dv_blob is not None else None,
        }

    @classmethod
    def from_json(cls, obj: dict) -> PorProof:
        if obj.get("version") != PROOF_VERSION:
            raise DecodeError(f"unsupported proof version {obj.get('version')!r}")

        def hx(key):
            return bytes.fromhex(obj[key]) if obj.get(key) is not None else None

        sigma = hx("sigma")
        return cls(
            backend=obj["backend"],
            public_digest=bytes.fromhex(obj["public_digest"]),
            witness_commitment=bytes.fromhex(obj["witness_commitment"]),
            sigma=SigmaProof.deserialize(sigma) if sigma is not None else None,
            pubkey=hx("pubkey"),
            stark=StarkProof.from_json(obj["stark"]) if obj.get("stark") else None,
            dv_blob=hx("dv_blob"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> PorProof:
        return cls.from_json(json.loads(text))


def derive_salt(seed: bytes, public_digest: bytes, witness: PorWitness) -> bytes:
    return hashlib.sha256(
        b"zkbtc/por/salt" + seed + public_digest + witness.secret_key.to_bytes() + witness.raw_tx
        + struct.pack("<I", witness.vout)
    ).digest()


def witness_commitment(salt: bytes, value: int, txid: bytes, vout: int) -> bytes:
    return hashlib.sha256(salt + struct.pack("<Q", value) + bytes(txid) + struct.pack("<I", vout)).digest()


def hybrid_context(public_digest: bytes, commitment: bytes) -> bytes:
    return public_digest + commitment


def assemble_hybrid(public: PorPublicInputs, sk: SecretKey, value: int, txid: bytes, vout: int,
                    seed: bytes, salt: bytes, n_queries: int = DEFAULT_QUERIES) -> PorProof:
    """Build hybrid components without the relation self-check (also used to forge in tests)."""
    digest = public.digest()
    commitment = witness_commitment(salt, value, txid, vout)
    context = hybrid_context(digest, commitment)
    pub = sk.public_point
    return PorProof(
        backend="hybrid",
        public_digest=digest,
        witness_commitment=commitment,
        sigma=sigma_prove(sk, pub, context, seed),
        pubkey=encode_compressed(pub),
        stark=stark_prove_threshold(value, public.threshold_x, salt, context, zk=True, n_queries=n_queries),
    )


def assemble_dv(public: PorPublicInputs, witness: PorWitness, seed: bytes, dv_key: bytes) -> PorProof:
    digest = public.digest()
    plaintext = witness.encode()
    commitment = hashlib.sha256(b"zkbtc/por/dv" + plaintext).digest()
    return PorProof("dv", digest, commitment, dv_blob=dv.seal(dv_key, plaintext, digest, seed))


def por_prove(public: PorPublicInputs, witness: PorWitness, backend: str, seed: bytes,
              dv_key: bytes | None = None, n_queries: int = DEFAULT_QUERIES) -> PorProof:
    if backend not in BACKENDS:
        raise UnknownBackend(f"unknown backend {backend!r}")
    verdict = check_relation(public, witness)
    if not verdict.accepted:
        raise RelationUnsatisfied(verdict.failure)
    if backend == "dv":
        return assemble_dv(public, witness, seed, dv_key)
    tx = decode_tx(witness.raw_tx)
    value, _ = extract_output(tx, witness.vout)
    salt = derive_salt(seed, public.digest(), witness)
    return assemble_hybrid(public, witness.secret_key, value, tx.txid, witness.vout, seed, salt, n_queries)


def _verify_hybrid(public: PorPublicInputs, proof: PorProof, n_queries: int) -> bool:
    if proof.sigma is None or proof.stark is None or proof.pubkey is None:
        return False
    if len(proof.witness_commitment) != 32:
        return False
    context = hybrid_context(proof.public_digest, proof.witness_commitment)
    if proof.sigma.context != context:
        return False
    try:
        pub = decode_compressed(proof.pubkey)
    except InvalidPoint:
        return False
    if not sigma_verify(pub, proof.sigma):
        return False
    return stark_verify_threshold(public.threshold_x, proof.stark, context, n_queries)


def _verify_dv(public: PorPublicInputs, proof: PorProof, dv_key: bytes | None) -> bool:
    if proof.dv_blob is None:
        return False
    plaintext = dv.unseal(dv_key, proof.dv_blob, proof.public_digest)
    if plaintext is None:
        return False
    try:
        witness = PorWitness.decode(plaintext)
    except (DecodeError, ValueError):
        return False
    return check_relation(public, witness).accepted


def por_verify(public: PorPublicInputs, proof: PorProof, dv_key: bytes | None = None,
               n_queries: int = DEFAULT_QUERIES) -> bool:
    """The caller is expected to have validated ``public.headers`` as a chain already."""
    if proof.backend not in BACKENDS:
        raise UnknownBackend(f"unknown backend {proof.backend!r}")
    if proof.public_digest != public.digest():
        return False
    if proof.backend == "dv":
        return _verify_dv(public, proof, dv_key)
    return _verify_hybrid(public, proof, n_queries)


# -- fixtures from a generated chain ---------------------------------------

def witness_from_chain(chain, height: int, tx_index: int, vout: int, key_index: int,
                       scan_to: int | None = None) -> PorWitness:
    """Witness for output (height, tx_index, vout) of a :class:`TestChain`.

    The scan covers the creation block and every later block up to
    ``scan_to`` (default: the tip).
    """
    from .codec import build_merkle_branch

    block = chain.blocks[height]
    tx = block.txs[tx_index]
    branch = build_merkle_branch([t.txid for t in block.txs], tx_index)
    last = chain.height if scan_to is None else scan_to
    scan = tuple(
        (h, tuple(t.serialize() for t in chain.blocks[h].txs)) for h in range(height, last + 1)
    )
    return PorWitness(tx.serialize(), vout, chain.keys[key_index], branch, height, scan)


def public_from_chain(chain, threshold: int) -> PorPublicInputs:
    return PorPublicInputs(threshold, tuple(chain.headers))


__all__ = [
    "Failure",
    "PorProof",
    "PorPublicInputs",
    "PorWitness",
    "RelationVerdict",
    "assemble_dv",
    "assemble_hybrid",
    "check_relation",
    "extract_output",
    "parse_p2pkh",
    "por_prove",
    "por_verify",
    "public_from_chain",
    "witness_from_chain",
]

"""Deterministic low-difficulty chain generator with real proof of work.

Every block pays a 50 BTC coinbase to a faucet key. Plan intents draw on
faucet outputs to create P2PKH outputs for the numbered fixture keys, and
can later spend those outputs back to the faucet.

Spends carry a placeholder script_sig (pubkey followed by a marker byte)
instead of a signature: key knowledge is proven separately by the sigma
protocol, so historical scripts are never executed.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Union

from .chain import ChainParams, ChainState, expected_nbits, genesis_state, validate_header
from .codec import (
    COINBASE_OUTPOINT,
    ZERO_HASH,
    BlockHeader,
    OutPoint,
    Transaction,
    TxIn,
    TxOut,
    decode_block_body,
    decode_headers,
    encode_block_body,
    merkle_root,
    nbits_to_target,
    p2pkh_script,
    target_to_nbits,
)
from .crypto.secp256k1 import N, SecretKey, encode_compressed, pubkey_hash
from .errors import PlanInvalid, TargetTooHard

COIN = 100_000_000
SUBSIDY = 50 * COIN
DEFAULT_NBITS = target_to_nbits(1 << 240)  # 0x1f010000
MINING_GUARD = 1 << 200
BLOCK_SPACING = 600
GENESIS_TIME = 1_700_000_000
FAUCET_INDEX = 0xFFFFFFFF
SPEND_MARKER = b"\x01"


# -- plan ---------------------------------------------------------------------

@dataclass(frozen=True)
class CreateP2pkhUtxo:
    value: int
    key_index: int
    segwit: bool = False  # mark the funding tx as segwit so txid != wtxid


@dataclass(frozen=True)
class SpendOutpoint:
    block: int
    tx: int
    vout: int
    key_index: int


Intent = Union[CreateP2pkhUtxo, SpendOutpoint]


@dataclass(frozen=True)
class BlockPlan:
    intents: tuple[Intent, ...] = ()
    timestamp: int | None = None  # None: previous timestamp + spacing

    def to_json(self) -> dict:
        txs = []
        for it in self.intents:
            if isinstance(it, CreateP2pkhUtxo):
                txs.append({"create": {"value": it.value, "key": it.key_index, "segwit": it.segwit}})
            else:
                txs.append({"spend": {"block": it.block, "tx": it.tx, "vout": it.vout, "key": it.key_index}})
        out: dict = {"txs": txs}
        if self.timestamp is not None:
            out["timestamp"] = self.timestamp
        return out

    @classmethod
    def from_json(cls, obj: dict) -> BlockPlan:
        intents: list[Intent] = []
        for entry in obj.get("txs", []):
            if "create" in entry:
                c = entry["create"]
                intents.append(CreateP2pkhUtxo(int(c["value"]), int(c["key"]), bool(c.get("segwit", False))))
            elif "spend" in entry:
                s = entry["spend"]
                intents.append(SpendOutpoint(int(s["block"]), int(s["tx"]), int(s["vout"]), int(s["key"])))
            else:
                raise PlanInvalid(f"unknown intent {entry!r}")
        ts = obj.get("timestamp")
        return cls(tuple(intents), None if ts is None else int(ts))


@dataclass(frozen=True)
class TestChainConfig:
    __test__ = False  # not a pytest class

    seed: bytes
    initial_nbits: int = DEFAULT_NBITS
    retarget_interval: int = 8
    block_plan: tuple[BlockPlan, ...] = ()
    n_keys: int = 8
    genesis_time: int = GENESIS_TIME
    spacing: int = BLOCK_SPACING
    allow_hard_target: bool = False


# -- keys ---------------------------------------------------------------------

def derive_key(seed: bytes, index: int) -> SecretKey:
    scalar = int.from_bytes(hashlib.sha256(seed + struct.pack("<I", index)).digest(), "big") % N
    if scalar == 0:  # probability ~2^-256
        raise PlanInvalid(f"key {index} derives to zero")
    return SecretKey(scalar)


# -- mining -------------------------------------------------------------------

def mine(template: BlockHeader, target: int, allow_hard: bool = False) -> BlockHeader:
    """Sequential nonce search from 0; bumps the timestamp if all 2^32 nonces fail."""
    if target < MINING_GUARD and not allow_hard:
        raise TargetTooHard(f"target {target:#x} below the desk-scale guard 2^200")
    timestamp = template.timestamp
    while True:
        head = BlockHeader(template.version, template.prev_hash, template.merkle_root,
                           timestamp, template.nbits, 0).serialize()[:76]
        mid = hashlib.sha256(head[:64])
        tail = head[64:]
        for nonce in range(1 << 32):
            h = mid.copy()
            h.update(tail + struct.pack("<I", nonce))
            digest = hashlib.sha256(h.digest()).digest()
            if int.from_bytes(digest, "little") <= target:
                return BlockHeader(template.version, template.prev_hash, template.merkle_root,
                                   timestamp, template.nbits, nonce)
        timestamp = (timestamp + 1) & 0xFFFFFFFF


# -- chain --------------------------------------------------------------------

class Block(NamedTuple):
    header: BlockHeader
    txs: tuple[Transaction, ...]


@dataclass
class TestChain:
    __test__ = False

    params: ChainParams
    blocks: list[Block]
    keys: tuple[SecretKey, ...]
    faucet_key: SecretKey

    @property
    def headers(self) -> list[BlockHeader]:
        return [b.header for b in self.blocks]

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def tx(self, height: int, index: int) -> Transaction:
        return self.blocks[height].txs[index]

    def utxos_for(self, key_index: int) -> list[tuple[int, int, int, int]]:
        """(height, tx index, vout, value) of unspent outputs paying ``key_index``."""
        pkh = pubkey_hash(self.keys[key_index].public_point)
        script = p2pkh_script(pkh)
        spent = {i.prevout for b in self.blocks for t in b.txs for i in t.inputs}
        found = []
        for h, block in enumerate(self.blocks):
            for ti, tx in enumerate(block.txs):
                for vo, out in enumerate(tx.outputs):
                    if out.script_pubkey == script and OutPoint(tx.txid, vo) not in spent:
                        found.append((h, ti, vo, out.value))
        return found

    def final_state(self) -> ChainState:
        state = genesis_state(self.params)
        for header in self.headers[1:]:
            state = validate_header(state, header, self.params)
        return state


def _coinbase(height: int, seed: bytes, pkh: bytes) -> Transaction:
    tag = hashlib.sha256(b"zkbtc/testchain" + seed).digest()[:8]
    height_push = height.to_bytes(4, "little")
    script_sig = bytes([len(height_push)]) + height_push + bytes([len(tag)]) + tag
    return Transaction(1, (TxIn(COINBASE_OUTPOINT, script_sig),), (TxOut(SUBSIDY, p2pkh_script(pkh)),))


def _placeholder_sig(key: SecretKey) -> bytes:
    pub = encode_compressed(key.public_point)
    return bytes([len(pub)]) + pub + SPEND_MARKER


class _Builder:
    def __init__(self, config: TestChainConfig):
        self.config = config
        self.seed = config.seed
        used = [it.key_index for p in config.block_plan for it in p.intents]
        n_keys = max([config.n_keys] + [i + 1 for i in used])
        self.keys = tuple(derive_key(self.seed, i) for i in range(n_keys))
        self.faucet = derive_key(self.seed, FAUCET_INDEX)
        self.faucet_pkh = pubkey_hash(self.faucet.public_point)
        self.faucet_script = p2pkh_script(self.faucet_pkh)
        self.key_scripts = [p2pkh_script(pubkey_hash(k.public_point)) for k in self.keys]
        # outpoint -> (value, script); insertion order is the faucet's FIFO
        self.unspent: dict[OutPoint, tuple[int, bytes]] = {}
        self.blocks: list[Block] = []

    def _add_outputs(self, tx: Transaction) -> None:
        for vo, out in enumerate(tx.outputs):
            self.unspent[OutPoint(tx.txid, vo)] = (out.value, out.script_pubkey)

    def _take_faucet(self, value: int) -> tuple[OutPoint, int]:
        for op, (v, script) in self.unspent.items():
            if script == self.faucet_script and v >= value:
                del self.unspent[op]
                return op, v
        raise PlanInvalid(f"faucet cannot fund an output of {value} sats")

    def _create(self, it: CreateP2pkhUtxo) -> Transaction:
        if it.value <= 0:
            raise PlanInvalid("created outputs must carry a positive value")
        op, available = self._take_faucet(it.value)
        outputs = [TxOut(it.value, self.key_scripts[it.key_index])]
        if available > it.value:
            outputs.append(TxOut(available - it.value, self.faucet_script))
        witness = (_placeholder_sig(self.faucet),) if it.segwit else ()
        tx = Transaction(2, (TxIn(op, _placeholder_sig(self.faucet), 0xFFFFFFFE, witness),),
                         tuple(outputs), has_witness=it.segwit)
        self._add_outputs(tx)
        return tx

    def _spend(self, it: SpendOutpoint) -> Transaction:
        try:
            source = self.blocks[it.block].txs[it.tx] if it.block < len(self.blocks) else self._pending[it.tx]
            out = source.outputs[it.vout]
        except IndexError:
            raise PlanInvalid(f"no output at block {it.block} tx {it.tx} vout {it.vout}") from None
        op = OutPoint(source.txid, it.vout)
        if op not in self.unspent:
            raise PlanInvalid(f"outpoint {op.txid}:{op.vout} already spent")
        if out.script_pubkey != self.key_scripts[it.key_index]:
            raise PlanInvalid(f"key {it.key_index} does not own {op.txid}:{op.vout}")
        del self.unspent[op]
        tx = Transaction(2, (TxIn(op, _placeholder_sig(self.keys[it.key_index])),),
                         (TxOut(out.value, self.faucet_script),))
        self._add_outputs(tx)
        return tx

    def _block(self, height: int, plan: BlockPlan, prev: BlockHeader | None,
               state: ChainState | None, params: ChainParams | None) -> Block:
        coinbase = _coinbase(height, self.seed, self.faucet_pkh)
        self._pending = [coinbase]
        # the coinbase becomes spendable only from the next block on
        for it in plan.intents:
            if isinstance(it, CreateP2pkhUtxo):
                if not 0 <= it.key_index < len(self.keys):
                    raise PlanInvalid(f"bad key index {it.key_index}")
                self._pending.append(self._create(it))
            elif isinstance(it, SpendOutpoint):
                if not 0 <= it.key_index < len(self.keys) or it.block > height:
                    raise PlanInvalid(f"invalid spend {it}")
                self._pending.append(self._spend(it))
            else:
                raise PlanInvalid(f"unknown intent {it!r}")
        self._add_outputs(coinbase)
        txs = tuple(self._pending)
        root = merkle_root([t.txid for t in txs])
        if prev is None:
            timestamp = plan.timestamp if plan.timestamp is not None else self.config.genesis_time
            nbits, prev_hash = self.config.initial_nbits, ZERO_HASH
        else:
            timestamp = plan.timestamp if plan.timestamp is not None else prev.timestamp + self.config.spacing
            nbits, prev_hash = expected_nbits(state, params), prev.hash
        template = BlockHeader(1, prev_hash, root, timestamp, nbits, 0)
        header = mine(template, nbits_to_target(nbits), self.config.allow_hard_target)
        return Block(header, txs)


def generate(config: TestChainConfig) -> TestChain:
    """Block 0 is a coinbase-only genesis; ``block_plan[i]`` builds block i + 1."""
    target = nbits_to_target(config.initial_nbits)
    if target < MINING_GUARD and not config.allow_hard_target:
        raise TargetTooHard("initial target below the desk-scale guard")
    b = _Builder(config)
    genesis = b._block(0, BlockPlan(), None, None, None)
    b.blocks.append(genesis)
    params = ChainParams(
        genesis=genesis.header,
        retarget_interval=config.retarget_interval,
        target_timespan=config.retarget_interval * config.spacing,
        max_target=target,
    )
    state = genesis_state(params)
    for i, plan in enumerate(config.block_plan):
        block = b._block(i + 1, plan, b.blocks[-1].header, state, params)
        state = validate_header(state, block.header, params)
        b.blocks.append(block)
    return TestChain(params, b.blocks, b.keys, b.faucet)


def default_plan(n_blocks: int, n_keys: int = 8) -> tuple[BlockPlan, ...]:
    """Block h creates one UTXO of h * 100,000 sats for key (h - 1) mod n_keys."""
    return tuple(
        BlockPlan((CreateP2pkhUtxo(100_000 * h, (h - 1) % n_keys),)) for h in range(1, n_blocks + 1)
    )


# -- files --------------------------------------------------------------------

def export(chain: TestChain, directory: str | Path) -> None:
    d = Path(directory)
    (d / "blocks").mkdir(parents=True, exist_ok=True)
    (d / "headers.bin").write_bytes(b"".join(h.serialize() for h in chain.headers))
    for height, block in enumerate(chain.blocks):
        (d / "blocks" / f"{height}.bin").write_bytes(encode_block_body(list(block.txs)))

    def entry(k: SecretKey) -> dict:
        return {"secret": k.to_bytes().hex(), "pubkey_hash": pubkey_hash(k.public_point).hex()}

    keys = {str(i): entry(k) for i, k in enumerate(chain.keys)}
    keys["faucet"] = entry(chain.faucet_key)
    (d / "keys.json").write_text(json.dumps(keys, indent=2, sort_keys=True) + "\n")
    (d / "params.json").write_text(json.dumps(chain.params.to_json(), indent=2, sort_keys=True) + "\n")


def import_chain(directory: str | Path) -> TestChain:
    d = Path(directory)
    headers = decode_headers((d / "headers.bin").read_bytes())
    blocks = [
        Block(h, tuple(decode_block_body((d / "blocks" / f"{height}.bin").read_bytes())))
        for height, h in enumerate(headers)
    ]
    keys_obj = json.loads((d / "keys.json").read_text())
    faucet = SecretKey.from_bytes(bytes.fromhex(keys_obj.pop("faucet")["secret"]))
    keys = tuple(
        SecretKey.from_bytes(bytes.fromhex(keys_obj[str(i)]["secret"])) for i in range(len(keys_obj))
    )
    params = ChainParams.from_json(json.loads((d / "params.json").read_text()))
    return TestChain(params, blocks, keys, faucet)


def load_params(path: str | Path) -> ChainParams:
    return ChainParams.from_json(json.loads(Path(path).read_text()))


__all__ = [
    "Block",
    "BlockPlan",
    "CreateP2pkhUtxo",
    "DEFAULT_NBITS",
    "SpendOutpoint",
    "TestChain",
    "TestChainConfig",
    "default_plan",
    "derive_key",
    "export",
    "generate",
    "import_chain",
    "mine",
]

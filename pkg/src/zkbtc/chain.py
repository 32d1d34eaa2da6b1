"""Header-chain state transition: linkage, proof of work, difficulty retargeting."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

from .codec import BlockHeader, Hash256, decode_header, nbits_to_target, target_to_nbits
from .errors import BadLinkage, ChainValidationError, PowNotSatisfied, WrongDifficulty, ZeroTarget

MAINNET_GENESIS_HEX = (
    "0100000000000000000000000000000000000000000000000000000000000000"
    "000000003ba3edfd7a7b12b27ac72c3e67768f617fc81bc3888a51323a9fb8aa"
    "4b1e5e4a29ab5f49ffff001d1dac2b7c"
)


@dataclass(frozen=True)
class ChainParams:
    genesis: BlockHeader
    retarget_interval: int = 2016
    target_timespan: int = 14 * 24 * 60 * 60
    clamp_factor: int = 4
    max_target: int | None = None

    def __post_init__(self):
        if self.retarget_interval < 1:
            raise ValueError("retarget_interval must be >= 1")
        if self.clamp_factor <= 1:
            raise ValueError("clamp_factor must be > 1")
        if self.max_target is None:
            object.__setattr__(self, "max_target", nbits_to_target(self.genesis.nbits))

    def to_json(self) -> dict:
        return {
            "genesis": self.genesis.serialize().hex(),
            "retarget_interval": self.retarget_interval,
            "target_timespan": self.target_timespan,
            "clamp_factor": self.clamp_factor,
            "max_target": f"{self.max_target:064x}",
        }

    @classmethod
    def from_json(cls, obj: dict) -> ChainParams:
        return cls(
            genesis=decode_header(bytes.fromhex(obj["genesis"])),
            retarget_interval=obj["retarget_interval"],
            target_timespan=obj["target_timespan"],
            clamp_factor=obj["clamp_factor"],
            max_target=int(obj["max_target"], 16),
        )


def mainnet_params() -> ChainParams:
    return ChainParams(genesis=decode_header(bytes.fromhex(MAINNET_GENESIS_HEX)))


@dataclass(frozen=True)
class ChainState:
    height: int
    tip_header: BlockHeader
    current_nbits: int
    cumulative_work: int
    epoch_start_timestamp: int

    @property
    def tip_hash(self) -> Hash256:
        return self.tip_header.hash

    def serialize(self) -> bytes:
        return (
            struct.pack("<Q", self.height)
            + self.tip_hash
            + self.tip_header.serialize()
            + struct.pack("<I", self.current_nbits)
            + self.cumulative_work.to_bytes(32, "big")
            + struct.pack("<I", self.epoch_start_timestamp)
        )

    @classmethod
    def deserialize(cls, data: bytes) -> ChainState:
        (height,) = struct.unpack_from("<Q", data, 0)
        tip_hash = data[8:40]
        header = decode_header(data[40:120])
        (nbits,) = struct.unpack_from("<I", data, 120)
        work = int.from_bytes(data[124:156], "big")
        (epoch_start,) = struct.unpack_from("<I", data, 156)
        if header.hash != tip_hash:
            raise ValueError("serialized tip hash does not match tip header")
        return cls(height, header, nbits, work, epoch_start)

    def digest(self) -> bytes:
        return hashlib.sha256(b"zkbtc/chainstate" + self.serialize()).digest()

    def to_json(self) -> dict:
        """Checkpoint form; ``tip_header`` lets a validator resume retargeting."""
        return {
            "height": self.height,
            "tip_hash": str(self.tip_hash),
            "nbits": f"{self.current_nbits:08x}",
            "cumulative_work": f"{self.cumulative_work:x}",
            "epoch_start_timestamp": self.epoch_start_timestamp,
            "tip_header": self.tip_header.serialize().hex(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> ChainState:
        header = decode_header(bytes.fromhex(obj["tip_header"]))
        if str(header.hash) != obj["tip_hash"]:
            raise ValueError("checkpoint tip_hash does not match tip_header")
        return cls(
            height=obj["height"],
            tip_header=header,
            current_nbits=int(obj["nbits"], 16),
            cumulative_work=int(obj["cumulative_work"], 16),
            epoch_start_timestamp=obj["epoch_start_timestamp"],
        )


def work(nbits: int) -> int:
    target = nbits_to_target(nbits)
    if target == 0:
        raise ZeroTarget(f"nbits {nbits:#010x} encodes a zero target")
    return (1 << 256) // (target + 1)


def genesis_state(params: ChainParams) -> ChainState:
    g = params.genesis
    if int.from_bytes(g.hash, "little") > nbits_to_target(g.nbits):
        raise PowNotSatisfied("genesis header does not meet its own target", height=0)
    return ChainState(0, g, g.nbits, work(g.nbits), g.timestamp)


def actual_timespan(state: ChainState) -> int:
    # Measured from the first block of the closing epoch, i.e. over
    # interval-1 gaps, as Bitcoin has always done.
    return state.tip_header.timestamp - state.epoch_start_timestamp


def expected_nbits(state: ChainState, params: ChainParams) -> int:
    if (state.height + 1) % params.retarget_interval:
        return state.current_nbits
    timespan = actual_timespan(state)
    low = params.target_timespan // params.clamp_factor
    high = params.target_timespan * params.clamp_factor
    timespan = min(max(timespan, low), high)
    new_target = nbits_to_target(state.current_nbits) * timespan // params.target_timespan
    return target_to_nbits(min(new_target, params.max_target))


def validate_header(state: ChainState, header: BlockHeader, params: ChainParams) -> ChainState:
    height = state.height + 1
    if header.prev_hash != state.tip_hash:
        raise BadLinkage(f"prev_hash {header.prev_hash} does not match tip {state.tip_hash}", height)
    expected = expected_nbits(state, params)
    if header.nbits != expected:
        raise WrongDifficulty(f"nbits {header.nbits:08x}, expected {expected:08x}", height)
    if int.from_bytes(header.hash, "little") > nbits_to_target(header.nbits):
        raise PowNotSatisfied(f"hash {header.hash} above target", height)
    epoch_start = header.timestamp if height % params.retarget_interval == 0 else state.epoch_start_timestamp
    return ChainState(
        height=height,
        tip_header=header,
        current_nbits=header.nbits,
        cumulative_work=state.cumulative_work + work(header.nbits),
        epoch_start_timestamp=epoch_start,
    )


def validate_chain(start: ChainState, headers: list[BlockHeader], params: ChainParams) -> ChainState:
    state = start
    for header in headers:
        state = validate_header(state, header, params)
    return state


__all__ = [
    "ChainParams",
    "ChainState",
    "ChainValidationError",
    "actual_timespan",
    "expected_nbits",
    "genesis_state",
    "mainnet_params",
    "validate_chain",
    "validate_header",
    "work",
]

"""Hypothesis strategies and plain random generators for codec objects."""

import random

from hypothesis import strategies as st

from zkbtc.codec import MAX_MONEY, BlockHeader, Hash256, OutPoint, Transaction, TxIn, TxOut

hashes = st.binary(min_size=32, max_size=32).map(Hash256)
u32 = st.integers(0, 2**32 - 1)
scripts = st.binary(max_size=80)

outpoints = st.builds(OutPoint, hashes, u32)
txouts = st.builds(TxOut, st.integers(0, MAX_MONEY), scripts)


@st.composite
def transactions(draw, segwit=None):
    has_witness = draw(st.booleans()) if segwit is None else segwit
    n_in = draw(st.integers(1, 4))
    inputs = []
    for _ in range(n_in):
        witness = tuple(draw(st.lists(st.binary(max_size=72), max_size=3))) if has_witness else ()
        inputs.append(TxIn(draw(outpoints), draw(scripts), draw(u32), witness))
    outputs = tuple(draw(st.lists(txouts, min_size=1, max_size=4)))
    version = draw(st.integers(-(2**31), 2**31 - 1))
    return Transaction(version, tuple(inputs), outputs, draw(u32), has_witness)


headers = st.builds(BlockHeader, st.integers(-(2**31), 2**31 - 1), hashes, hashes, u32, u32, u32)


def random_tx(rng: random.Random, segwit: bool) -> Transaction:
    def rb(n):
        return bytes(rng.getrandbits(8) for _ in range(n))

    inputs = tuple(
        TxIn(OutPoint(Hash256(rb(32)), rng.getrandbits(32)), rb(rng.randrange(0, 110)), rng.getrandbits(32),
             tuple(rb(rng.randrange(0, 73)) for _ in range(rng.randrange(0, 3))) if segwit else ())
        for _ in range(rng.randrange(1, 4))
    )
    outputs = tuple(TxOut(rng.randrange(0, MAX_MONEY + 1), rb(rng.randrange(0, 40))) for _ in range(rng.randrange(1, 4)))
    return Transaction(rng.choice([1, 2]), inputs, outputs, rng.getrandbits(32), segwit)


def random_header(rng: random.Random) -> BlockHeader:
    return BlockHeader(
        rng.getrandbits(32) - 2**31,
        Hash256(rng.randbytes(32)),
        Hash256(rng.randbytes(32)),
        rng.getrandbits(32),
        rng.getrandbits(32),
        rng.getrandbits(32),
    )

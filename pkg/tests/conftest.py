import os

import pytest
from hypothesis import HealthCheck, settings

from zkbtc.codec import target_to_nbits
from zkbtc.testchain import BlockPlan, CreateP2pkhUtxo, SpendOutpoint, TestChainConfig, generate

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# 16 instead of 32 FRI queries in the slowest checks; off by default
FAST = os.environ.get("ZKBTC_FAST") == "1"

EASY_NBITS = target_to_nbits(1 << 250)


@pytest.fixture(scope="session")
def por_chain():
    """Small chain with one spent and several unspent P2PKH outputs.

    block 1: tx1 -> 100_000 to key 0, tx2 -> 60_000 to key 1 (segwit funding)
    block 2: tx1 -> 300_000 to key 1, tx2 spends block 1 tx1 vout 0
    block 3: empty
    """
    plan = (
        BlockPlan((CreateP2pkhUtxo(100_000, 0), CreateP2pkhUtxo(60_000, 1, segwit=True))),
        BlockPlan((CreateP2pkhUtxo(300_000, 1), SpendOutpoint(1, 1, 0, 0))),
        BlockPlan(),
    )
    return generate(TestChainConfig(seed=b"por-fixture", initial_nbits=EASY_NBITS, block_plan=plan, n_keys=3))

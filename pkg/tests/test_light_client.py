import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from zkbtc.chain import genesis_state, validate_chain
from zkbtc.codec import merkle_root, nbits_to_target, target_to_nbits
from zkbtc.dv import derive_dv_key
from zkbtc.errors import InvalidEpoch, LinkageBroken, ProofInvalid, SyncError
from zkbtc.light_client import (
    GENESIS_MARKER,
    ClientState,
    EpochProof,
    EpochStatement,
    initial_client,
    prove_chain,
    prove_epoch,
    read_proofs,
    run_epoch,
    seal_epoch,
    sync,
    verify_epoch,
    write_proofs,
)
from zkbtc.testchain import TestChainConfig, default_plan, generate, mine

from conftest import EASY_NBITS

KEY = derive_dv_key(b"lc-tests")


@pytest.fixture(scope="module")
def chain24():
    return generate(TestChainConfig(seed=b"lc", initial_nbits=EASY_NBITS, block_plan=default_plan(24, 4), n_keys=4))


@pytest.fixture(scope="module")
def proofs24(chain24):
    return prove_chain(chain24.blocks[1:], chain24.params, KEY)


def test_sync_matches_direct_validation(chain24, proofs24):
    assert len(proofs24) == 3
    client = sync(initial_client(chain24.params), proofs24, chain24.params, KEY)
    direct = validate_chain(genesis_state(chain24.params), chain24.headers[1:], chain24.params)
    assert client.chain_state == direct
    assert client.epochs_verified == 3
    assert client.latest_statement_commitment == proofs24[-1].statement.commitment()


@pytest.mark.parametrize("epoch_length", [1, 5, 8, 24, 100])
def test_epoch_length_does_not_change_result(chain24, epoch_length):
    proofs = prove_chain(chain24.blocks[1:], chain24.params, KEY, epoch_length)
    client = sync(initial_client(chain24.params), proofs, chain24.params, KEY)
    assert client.chain_state == chain24.final_state()
    assert len(proofs) == -(-24 // epoch_length)


def test_statements_are_hash_chained(proofs24):
    assert proofs24[0].statement.prev_commitment == GENESIS_MARKER
    for a, b in zip(proofs24, proofs24[1:]):
        assert b.statement.prev_commitment == a.statement.commitment()
        assert b.statement.start_state == a.statement.end_state


def test_headers_root_covers_epoch(chain24, proofs24):
    hashes = [h.hash for h in chain24.headers[9:17]]
    assert proofs24[1].statement.headers_root == merkle_root(hashes)
    assert proofs24[1].statement.n_headers == 8


def _tampered_epoch(chain, proofs, height=12):
    """Epoch 2 sealed over a block whose nbits was made easier and re-mined."""
    blocks = list(chain.blocks[1:])
    header, txs = blocks[height - 1]
    easier = target_to_nbits(nbits_to_target(header.nbits) * 2)
    blocks[height - 1] = (mine(dataclasses.replace(header, nbits=easier), nbits_to_target(easier)), txs)
    start = run_epoch(genesis_state(chain.params), blocks[:8], chain.params)[0]
    statement = dataclasses.replace(proofs[1].statement)
    return seal_epoch(statement, start, blocks[8:16], KEY)


def test_tampered_block_stops_sync_at_that_epoch(chain24, proofs24):
    bad = _tampered_epoch(chain24, proofs24)
    with pytest.raises(SyncError) as err:
        sync(initial_client(chain24.params), [proofs24[0], bad, proofs24[2]], chain24.params, KEY)
    assert err.value.index == 1
    assert err.value.state.epochs_verified == 1
    assert isinstance(err.value.cause, ProofInvalid)
    assert "difficulty check failed at height 12" in str(err.value.cause)


def test_honest_prover_refuses_tampered_block(chain24):
    blocks = list(chain24.blocks[1:9])
    header, txs = blocks[3]
    blocks[3] = (dataclasses.replace(header, merkle_root=bytes(32)), txs)
    with pytest.raises(InvalidEpoch) as err:
        prove_epoch(None, genesis_state(chain24.params), blocks, chain24.params, KEY)
    assert err.value.height == 4
    assert err.value.check in ("pow", "merkle_root")


def test_merkle_root_mismatch_is_named(chain24):
    blocks = list(chain24.blocks[1:3])
    header, txs = blocks[1]
    # drop the last tx but keep a valid header: only the body check can notice
    blocks[1] = (header, txs[:1] if len(txs) > 1 else txs + txs)
    with pytest.raises(InvalidEpoch) as err:
        run_epoch(genesis_state(chain24.params), blocks, chain24.params)
    assert err.value.check == "merkle_root" and err.value.height == 2


def test_out_of_order_epochs_rejected(chain24, proofs24):
    with pytest.raises(SyncError) as err:
        sync(initial_client(chain24.params), [proofs24[1], proofs24[0]], chain24.params, KEY)
    assert err.value.index == 0
    assert isinstance(err.value.cause, LinkageBroken)
    with pytest.raises(SyncError):
        sync(initial_client(chain24.params), [proofs24[0], proofs24[2]], chain24.params, KEY)


def test_wrong_start_state_rejected(chain24, proofs24):
    client = initial_client(chain24.params)
    fake = dataclasses.replace(proofs24[0], statement=dataclasses.replace(proofs24[0].statement,
                                                                           start_state=bytes(32)))
    with pytest.raises(LinkageBroken):
        verify_epoch(client, fake, chain24.params, KEY)
    with pytest.raises(InvalidEpoch):
        prove_epoch(None, chain24.final_state(), chain24.blocks[1:3], chain24.params, KEY)
    with pytest.raises(InvalidEpoch):
        prove_epoch(proofs24[0].statement, genesis_state(chain24.params), chain24.blocks[9:10], chain24.params, KEY)


@pytest.mark.parametrize("field", ["end_state", "headers_root", "n_headers"])
def test_statement_mutation_breaks_authentication(chain24, proofs24, field):
    st_ = proofs24[0].statement
    value = 7 if field == "n_headers" else bytes(32)
    fake = dataclasses.replace(proofs24[0], statement=dataclasses.replace(st_, **{field: value}))
    with pytest.raises(ProofInvalid):
        verify_epoch(initial_client(chain24.params), fake, chain24.params, KEY)


def test_lying_statement_under_valid_seal_rejected(chain24, proofs24):
    # sealed by the key holder but with a false end state: re-execution catches it
    st_ = dataclasses.replace(proofs24[0].statement, end_state=bytes(32))
    forged = seal_epoch(st_, genesis_state(chain24.params), chain24.blocks[1:9], KEY)
    with pytest.raises(ProofInvalid):
        verify_epoch(initial_client(chain24.params), forged, chain24.params, KEY)


def test_wrong_key_and_backend(chain24, proofs24):
    with pytest.raises(ProofInvalid):
        verify_epoch(initial_client(chain24.params), proofs24[0], chain24.params, derive_dv_key(b"x"))
    with pytest.raises(ProofInvalid):
        verify_epoch(initial_client(chain24.params), dataclasses.replace(proofs24[0], backend="stark"),
                     chain24.params, KEY)


def test_empty_stream_is_identity(chain24):
    client = initial_client(chain24.params)
    assert sync(client, [], chain24.params, KEY) == client
    with pytest.raises(InvalidEpoch):
        prove_epoch(None, genesis_state(chain24.params), [], chain24.params, KEY)


def test_client_state_is_small_and_constant(chain24, proofs24):
    client = initial_client(chain24.params)
    sizes = {len(client.serialize())}
    for p in proofs24:
        client = verify_epoch(client, p, chain24.params, KEY)
        sizes.add(len(client.serialize()))
    assert sizes == {200}
    assert ClientState.deserialize(client.serialize()) == client
    assert ClientState.from_json(client.to_json()) == client


@given(st.binary(min_size=32, max_size=32), st.integers(1, 2**32 - 1))
def test_statement_round_trips(h, n):
    s = EpochStatement(h, h[::-1], bytes(32), n, h)
    assert len(s.serialize()) == 132
    assert EpochStatement.deserialize(s.serialize()) == s
    assert EpochStatement.from_json(s.to_json()) == s


def test_proof_files_round_trip(tmp_path, chain24, proofs24):
    write_proofs(proofs24, tmp_path)
    again = read_proofs(tmp_path)
    assert [p.to_json() for p in again] == [p.to_json() for p in proofs24]
    assert EpochProof.from_json(proofs24[0].to_json()) == proofs24[0]

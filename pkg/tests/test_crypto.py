import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from zkbtc.crypto import Transcript
from zkbtc.crypto.hashes import dsha256, hash160, ripemd160, sha256
from zkbtc.crypto.secp256k1 import (
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
from zkbtc.crypto.sigma import (
    SigmaProof,
    check_equation,
    extract,
    prove_with_nonce,
    sigma_challenge,
    sigma_prove,
    sigma_verify,
    simulate,
)
from zkbtc.errors import InfinityPoint, InvalidPoint, PubkeyMismatch

scalars = st.integers(1, N - 1)


# -- hashes ---------------------------------------------------------------------

@pytest.mark.parametrize("msg, digest", [
    (b"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
    (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
    (b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
     "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1"),
])
def test_sha256_fips_vectors(msg, digest):
    assert sha256(msg).hex() == digest
    assert dsha256(msg) == sha256(sha256(msg))


@pytest.mark.parametrize("msg, digest", [
    (b"", "9c1185a5c5e9fc54612808977ee8f548b2258d31"),
    (b"a", "0bdc9d2d256b3ee9daae347be6f4dc835a467ffe"),
    (b"abc", "8eb208f7e05d987a9b044a8e98c6b087f15a0bfc"),
    (b"message digest", "5d0689ef49d2fae572b881b123a85ffa21595f36"),
    (b"1234567890" * 8, "9b752e45573d4b39f4dbd3323cab82bf63326bfb"),
])
def test_ripemd160_vectors(msg, digest):
    assert ripemd160(msg).hex() == digest


def test_ripemd160_multi_block_lengths():
    # padding boundaries: 55, 56 and 64 bytes; just exercise without a reference
    for n in (55, 56, 63, 64, 65, 128):
        assert len(ripemd160(b"x" * n)) == 20


# -- curve ------------------------------------------------------------------------

def test_known_multiples():
    two_g = point_mul(2, G)
    assert two_g.x == 0xC6047F9441ED7D6D3045406E95C07CD85C778E4B8CEF3CA7ABAC09B95C709EE5
    assert two_g.y == 0x1AE168FEA63DC339A3C58419466CEAEEF7F632653266D0E1236431A950CFE52A
    assert point_mul(3, G).x == 0xF9308A019258C31049344F85F89D5229B531C845836F99B08601F113BCE036F9


def test_sk1_pubkey_hash():
    assert pubkey_hash(G).hex() == "751e76e8199196d454941c45d1b3a323f1433bd6"
    assert hash160(encode_compressed(G)) == pubkey_hash(G)


def test_order_and_negation():
    assert point_mul(N, G) == INFINITY
    assert point_mul(N - 1, G) == point_neg(G)
    assert point_add(G, point_neg(G)) == INFINITY
    assert point_mul(0, G) == INFINITY


def test_point_mul_matches_repeated_addition():
    acc = INFINITY
    for k in range(1, 101):
        acc = point_add(acc, G)
        assert point_mul(k, G) == acc


@given(scalars, scalars)
def test_scalar_mul_distributes(a, b):
    assert point_mul(a + b, G) == point_add(point_mul(a, G), point_mul(b, G))


@given(scalars, scalars)
def test_scalar_mul_composes(a, b):
    assert point_mul(a, point_mul(b, G)) == point_mul(a * b % N, G)


def test_group_law_random_cases():
    rng = random.Random(7)
    pts = [point_mul(rng.randrange(1, N), G) for _ in range(12)]
    for _ in range(1000):
        p, q, r = rng.choice(pts), rng.choice(pts), rng.choice(pts)
        assert point_add(p, q) == point_add(q, p)
        assert point_add(point_add(p, q), r) == point_add(p, point_add(q, r))
        assert point_add(p, INFINITY) == p


def test_off_curve_point_rejected():
    with pytest.raises(InvalidPoint):
        Point(G.x, (G.y + 1) % P)


@given(scalars)
def test_compressed_round_trip(k):
    pt = point_mul(k, G)
    enc = encode_compressed(pt)
    assert len(enc) == 33 and enc[0] in (2, 3)
    assert decode_compressed(enc) == pt


def test_compressed_errors():
    with pytest.raises(InfinityPoint):
        encode_compressed(INFINITY)
    with pytest.raises(InvalidPoint):
        decode_compressed(b"\x04" + bytes(32))
    with pytest.raises(InvalidPoint):
        decode_compressed(b"\x02" + (P).to_bytes(32, "big"))


def test_secret_key_bounds_and_repr():
    with pytest.raises(ValueError):
        SecretKey(0)
    with pytest.raises(ValueError):
        SecretKey(N)
    assert "hidden" in repr(SecretKey(5))
    assert SecretKey.from_bytes(SecretKey(5).to_bytes()) == SecretKey(5)


# -- transcript -------------------------------------------------------------------

def test_transcript_is_deterministic_and_order_sensitive():
    a, b, c = Transcript("t"), Transcript("t"), Transcript("t")
    for t in (a, b):
        t.absorb("x", b"1")
        t.absorb("y", b"2")
    c.absorb("y", b"2")
    c.absorb("x", b"1")
    assert a.challenge_bytes("c") == b.challenge_bytes("c")
    assert a.state == b.state != c.state
    assert a.challenge_bytes("c") != b.copy().challenge_bytes("d")


def test_transcript_framing_prevents_concatenation_ambiguity():
    a, b = Transcript("t"), Transcript("t")
    a.absorb("x", b"ab")
    b.absorb("xa", b"b")
    assert a.state != b.state


@given(st.integers(2, 2**70))
def test_challenge_int_in_range(modulus):
    assert 0 <= Transcript("r").challenge_int("c", modulus) < modulus


# -- sigma ------------------------------------------------------------------------

@given(scalars, st.binary(max_size=40))
def test_sigma_completeness(k, context):
    sk = SecretKey(k)
    proof = sigma_prove(sk, sk.public_point, context, b"seed")
    assert sigma_verify(sk.public_point, proof)
    assert SigmaProof.deserialize(proof.serialize()) == proof


def test_sigma_rejects_wrong_key_context_and_response():
    sk = SecretKey(12345)
    pub = sk.public_point
    proof = sigma_prove(sk, pub, b"ctx", b"seed")
    assert not sigma_verify(point_mul(2, G), proof)
    assert not sigma_verify(pub, SigmaProof(proof.commitment, proof.response, b"other"))
    assert not sigma_verify(pub, SigmaProof(proof.commitment, (proof.response + 1) % N, b"ctx"))
    with pytest.raises(PubkeyMismatch):
        sigma_prove(sk, point_mul(2, G), b"ctx", b"seed")


def test_sigma_is_deterministic_in_seed():
    sk = SecretKey(99)
    p1 = sigma_prove(sk, sk.public_point, b"c", b"s1")
    assert p1 == sigma_prove(sk, sk.public_point, b"c", b"s1")
    assert p1 != sigma_prove(sk, sk.public_point, b"c", b"s2")


@given(scalars, scalars)
def test_special_soundness_extraction(k, nonce):
    sk = SecretKey(k)
    pub = sk.public_point
    p1 = prove_with_nonce(sk, pub, b"first", nonce)
    p2 = prove_with_nonce(sk, pub, b"second", nonce)
    c1 = sigma_challenge(pub, p1.commitment, b"first")
    c2 = sigma_challenge(pub, p2.commitment, b"second")
    assert p1.commitment == p2.commitment and c1 != c2
    assert extract(c1, p1.response, c2, p2.response) == k


@given(scalars, st.integers(0, N - 1), st.integers(0, N - 1))
def test_simulated_transcripts_verify(k, c, s):
    pub = point_mul(k, G)
    commitment = simulate(pub, c, s)
    if commitment == INFINITY:  # negligible
        return
    assert check_equation(pub, commitment, c, s)


def test_sigma_deserialize_rejects_garbage():
    from zkbtc.errors import DecodeError

    with pytest.raises(DecodeError):
        SigmaProof.deserialize(b"\x02" * 10)

import hashlib
import random

import pytest

from martsia.errors import MalformedError
from martsia.groups import (
    G1_GENERATOR,
    G2_GENERATOR,
    G1Elem,
    G2Elem,
    GTElem,
    ORDER,
    deserialize,
    digest,
    g1_identity,
    g2_identity,
    gt_generator,
    gt_identity,
    gt_pow_cached,
    hash_to_group,
    multi_pair,
    pair,
    random_element,
    random_scalar,
    scalar_inv,
    serialize_element,
)


def test_sha256_known_answer():
    # anchors the digest helper to the standard empty-input vector
    assert (
        hashlib.sha256(b"").hexdigest()
        == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    )
    assert digest(G1_GENERATOR) == hashlib.sha256(serialize_element(G1_GENERATOR)).digest()


def test_generators_have_prime_order():
    assert (G1_GENERATOR * ORDER).is_identity()
    assert (G2_GENERATOR * ORDER).is_identity()
    assert not (G1_GENERATOR * (ORDER - 1)).is_identity()
    assert gt_generator() ** ORDER == gt_identity()


def test_bilinearity():
    rng = random.Random(101)
    for _ in range(3):
        a = random_scalar(rng)
        b = random_scalar(rng)
        lhs = pair(G1_GENERATOR * a, G2_GENERATOR * b)
        rhs = pair(G1_GENERATOR, G2_GENERATOR) ** ((a * b) % ORDER)
        assert lhs == rhs


def test_non_degeneracy():
    assert pair(G1_GENERATOR, G2_GENERATOR) != gt_identity()
    assert pair(g1_identity(), G2_GENERATOR) == gt_identity()
    assert pair(G1_GENERATOR, g2_identity()) == gt_identity()


def test_multi_pair_matches_product_of_pairs():
    rng = random.Random(102)
    pairs = [
        (G1_GENERATOR * random_scalar(rng), G2_GENERATOR * random_scalar(rng))
        for _ in range(4)
    ]
    expected = gt_identity()
    for p, q in pairs:
        expected = expected * pair(p, q)
    assert multi_pair(pairs) == expected


def test_serialization_round_trip_all_groups():
    rng = random.Random(103)
    for which, cls in (("G1", G1Elem), ("G2", G2Elem), ("GT", GTElem)):
        elem = random_element(which, rng)
        data = serialize_element(elem)
        back = deserialize(data)
        assert isinstance(back, cls)
        assert back == elem


def test_serialization_injective_on_sample():
    rng = random.Random(104)
    seen = set()
    for _ in range(20):
        elem = random_element("G1", rng)
        blob = serialize_element(elem)
        assert blob not in seen
        seen.add(blob)


def test_deserialize_rejects_garbage():
    with pytest.raises(MalformedError):
        deserialize(b"")
    with pytest.raises(MalformedError):
        deserialize(b"\xff\x00" + bytes(48))
    good = serialize_element(G1_GENERATOR)
    with pytest.raises(MalformedError):
        deserialize(good[:-1])
    # flipping a payload byte must not yield a silently different valid point
    corrupted = bytearray(good)
    corrupted[7] ^= 0x01
    try:
        other = deserialize(bytes(corrupted))
    except MalformedError:
        other = None
    assert other is None or other != G1_GENERATOR


def test_hash_to_group_deterministic_and_spread():
    h1 = hash_to_group(b"alpha", "G1")
    h2 = hash_to_group(b"alpha", "G1")
    h3 = hash_to_group(b"beta", "G1")
    assert h1 == h2
    assert h1 != h3
    assert not h1.is_identity()
    g2 = hash_to_group(b"alpha", "G2")
    assert isinstance(g2, G2Elem)
    with pytest.raises(MalformedError):
        hash_to_group(b"alpha", "GT")


def test_scalar_inverse():
    rng = random.Random(105)
    for _ in range(5):
        k = random_scalar(rng)
        assert (k * scalar_inv(k)) % ORDER == 1
    with pytest.raises(MalformedError):
        scalar_inv(0)


def test_gt_pow_cached_matches_operator():
    rng = random.Random(106)
    base = random_element("GT", rng)
    for _ in range(3):
        e = random_scalar(rng)
        assert gt_pow_cached(base, e) == base**e
    assert gt_pow_cached(base, 0) == gt_identity()


def test_group_arithmetic_identities():
    rng = random.Random(107)
    p = random_element("G1", rng)
    q = random_element("G2", rng)
    assert p + g1_identity() == p
    assert p - p == g1_identity()
    assert q + g2_identity() == q
    assert (p * 2) == p + p
    assert (q * 3) == q + q + q

import random

import pytest

from martsia import envelope as env
from martsia import maabe
from martsia.errors import IntegrityError, MalformedError, UnauthorizedError
from martsia.groups import GTElem, random_element


def _meta(mid="12345678"):
    return env.MessageMetadata(sender="0xabc", case_id="43175279", message_id=mid)


def _shares(share_factory, gid, *lits):
    return [share_factory(gid, attr, auth) for attr, auth in lits]


def test_slice_key_derivation_is_stable_and_input_checked():
    rng = random.Random(1)
    elem = random_element("GT", rng)
    k1 = env.derive_slice_key(elem)
    k2 = env.derive_slice_key(elem)
    assert k1 == k2 and len(k1) == 32
    assert env.derive_slice_key(random_element("GT", rng)) != k1
    with pytest.raises(MalformedError):
        env.derive_slice_key(b"raw bytes")


def test_decimal_ids():
    rng = random.Random(2)
    for _ in range(20):
        ident = env.new_decimal_id(rng)
        assert len(ident) == 8 and ident.isdigit()


def test_metadata_validation():
    _meta().validate()
    with pytest.raises(MalformedError):
        env.MessageMetadata("", "c", "12345678").validate()
    with pytest.raises(MalformedError):
        env.MessageMetadata("0xabc", "c", "1234").validate()
    with pytest.raises(MalformedError):
        env.MessageMetadata("0xabc", "", "12345678").validate()


def test_seal_open_round_trip(pp3, keys3, share_factory):
    pub, _ = keys3
    rng = random.Random(3)
    fields = {"item": "wheelchair ramp", "quantity": "4"}
    sealed = env.seal_slice(pp3, pub, "a@A and b@B", fields, rng, metadata=_meta())
    shares = _shares(share_factory, "gid-e1", ("a", "A"), ("b", "B"))
    assert env.open_slice(pp3, sealed, shares, metadata=_meta()) == fields


def test_open_slice_unauthorized(pp3, keys3, share_factory):
    pub, _ = keys3
    rng = random.Random(4)
    sealed = env.seal_slice(pp3, pub, "a@A and b@B", {"x": "1"}, rng, metadata=_meta())
    with pytest.raises(UnauthorizedError):
        env.open_slice(pp3, sealed, _shares(share_factory, "gid-e2", ("a", "A")),
                       metadata=_meta())


def test_tampered_body_fails_integrity(pp3, keys3, share_factory):
    pub, _ = keys3
    rng = random.Random(5)
    sealed = env.seal_slice(pp3, pub, "a@A", {"x": "1"}, rng, metadata=_meta())
    body = bytearray(sealed.body)
    body[0] ^= 0x80
    tampered = env.SealedSlice(sealed.policy_text, sealed.field_keys,
                               sealed.wrapped_key, sealed.nonce, bytes(body))
    shares = _shares(share_factory, "gid-e3", ("a", "A"))
    with pytest.raises(IntegrityError):
        env.open_slice(pp3, tampered, shares, metadata=_meta())


def test_metadata_binding_rejects_transplant(pp3, keys3, share_factory):
    # a slice sealed for one message cannot be replayed under another
    pub, _ = keys3
    rng = random.Random(6)
    sealed = env.seal_slice(pp3, pub, "a@A", {"x": "1"}, rng, metadata=_meta("11111111"))
    shares = _shares(share_factory, "gid-e4", ("a", "A"))
    assert env.open_slice(pp3, sealed, shares, metadata=_meta("11111111")) == {"x": "1"}
    with pytest.raises(IntegrityError):
        env.open_slice(pp3, sealed, shares, metadata=_meta("22222222"))


def test_cross_user_shares_fail_integrity_not_unauthorized(pp3, keys3, share_factory):
    # structurally satisfying but wrong-gid material reaches the AEAD and dies there
    pub, _ = keys3
    rng = random.Random(7)
    sealed = env.seal_slice(pp3, pub, "a@A", {"x": "1"}, rng, metadata=_meta())
    stolen = share_factory("someone-else", "a", "A")
    forged = maabe.KeyShare("gid-e5", stolen.attr, stolen.authority, stolen.k, stolen.kp)
    with pytest.raises(IntegrityError):
        env.open_slice(pp3, sealed, [forged], metadata=_meta())


def test_seal_slice_input_validation(pp3, keys3):
    pub, _ = keys3
    rng = random.Random(8)
    with pytest.raises(MalformedError):
        env.seal_slice(pp3, pub, "a@A", {}, rng)
    with pytest.raises(MalformedError):
        env.seal_slice(pp3, pub, "a@A", {"x": 5}, rng)


def test_envelope_slice_id_rules(pp3, keys3):
    pub, _ = keys3
    rng = random.Random(9)
    meta = _meta()
    s_plain = env.seal_slice(pp3, pub, "a@A", {"x": "1"}, rng, metadata=meta)
    s_id1 = env.seal_slice(pp3, pub, "a@A", {"x": "1"}, rng, metadata=meta,
                           slice_id="00000001")
    s_id2 = env.seal_slice(pp3, pub, "a@A", {"x": "2"}, rng, metadata=meta,
                           slice_id="00000002")
    env.build_envelope(meta, [s_plain])
    env.build_envelope(meta, [s_id1, s_id2])
    with pytest.raises(MalformedError):
        env.build_envelope(meta, [s_id1])  # single slice must not carry an id
    with pytest.raises(MalformedError):
        env.build_envelope(meta, [s_plain, s_id1])  # missing id on one slice
    with pytest.raises(MalformedError):
        env.build_envelope(meta, [s_id1, s_id1])  # duplicate ids
    with pytest.raises(MalformedError):
        env.build_envelope(meta, [])


def test_seal_message_and_open_by_index(pp3, keys3, share_factory):
    pub, _ = keys3
    rng = random.Random(10)
    parts = [
        ("a@A", {"one": "1"}),
        ("b@B", {"two": "2"}),
        ("a@A and b@B", {"both": "3"}),
    ]
    envel = env.seal_message(pp3, pub, _meta(), parts, rng)
    assert len(envel.slices) == 3
    assert all(s.slice_id is not None for s in envel.slices)
    a_only = _shares(share_factory, "gid-e6", ("a", "A"))
    assert env.open_envelope_slice(pp3, envel, 0, a_only) == {"one": "1"}
    with pytest.raises(UnauthorizedError):
        env.open_envelope_slice(pp3, envel, 1, a_only)
    both = _shares(share_factory, "gid-e6", ("a", "A"), ("b", "B"))
    assert env.open_envelope_slice(pp3, envel, 2, both) == {"both": "3"}
    with pytest.raises(MalformedError):
        env.open_envelope_slice(pp3, envel, 3, both)


def test_envelope_serialization_round_trip(pp3, keys3, share_factory):
    pub, _ = keys3
    rng = random.Random(11)
    envel = env.seal_message(pp3, pub, _meta(), [("a@A", {"x": "1"})], rng)
    back = env.MessageEnvelope.from_bytes(envel.to_bytes())
    assert back == envel
    shares = _shares(share_factory, "gid-e7", ("a", "A"))
    assert env.open_envelope_slice(pp3, back, 0, shares) == {"x": "1"}


def test_envelope_format_and_shape_validation():
    with pytest.raises(MalformedError):
        env.MessageEnvelope.from_dict({"format": "bogus", "metadata": {}, "slices": []})
    with pytest.raises(MalformedError):
        env.MessageEnvelope.from_bytes(b"not json at all")
    with pytest.raises(MalformedError):
        env.MessageEnvelope.from_bytes(b"[1, 2, 3]")


def test_sliced_ids_are_bound_into_aad(pp3, keys3, share_factory):
    # swapping two sealed slices' ids breaks both of them
    pub, _ = keys3
    rng = random.Random(12)
    meta = _meta()
    envel = env.seal_message(pp3, pub, meta,
                             [("a@A", {"x": "1"}), ("a@A", {"y": "2"})], rng)
    s0, s1 = envel.slices
    swapped = env.SealedSlice(s0.policy_text, s0.field_keys, s0.wrapped_key,
                              s0.nonce, s0.body, slice_id=s1.slice_id)
    shares = _shares(share_factory, "gid-e8", ("a", "A"))
    with pytest.raises(IntegrityError):
        env.open_slice(pp3, swapped, shares, metadata=meta)


def test_wrapped_kem_element_is_gt(pp3, keys3):
    pub, _ = keys3
    rng = random.Random(13)
    sealed = env.seal_slice(pp3, pub, "a@A", {"x": "1"}, rng, metadata=_meta())
    assert isinstance(sealed.wrapped_key.c0, GTElem)

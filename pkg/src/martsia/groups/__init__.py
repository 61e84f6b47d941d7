"""Pairing-group primitives: BLS12-381 tower fields, curve groups, pairing."""

from .suite import (
    ORDER,
    G1Elem,
    G2Elem,
    GTElem,
    G1_GENERATOR,
    G2_GENERATOR,
    digest,
    deserialize,
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
    serialize_scalar,
)

__all__ = [
    "ORDER",
    "G1Elem",
    "G2Elem",
    "GTElem",
    "G1_GENERATOR",
    "G2_GENERATOR",
    "digest",
    "deserialize",
    "g1_identity",
    "g2_identity",
    "gt_generator",
    "gt_identity",
    "gt_pow_cached",
    "hash_to_group",
    "multi_pair",
    "pair",
    "random_element",
    "random_scalar",
    "scalar_inv",
    "serialize_element",
    "serialize_scalar",
]

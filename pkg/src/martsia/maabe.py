"""Decentralized ciphertext-policy attribute-based encryption.

Multiple independent authorities each hold a keypair ``(alpha, y)``; nobody
holds a master secret.  Encryption takes the policy's share-generating matrix
and splits both the blinding exponent ``s`` (via vector ``z``) and a zero
secret (via vector ``w``); decryption pairs ciphertext rows against per-user
key shares and recombines with the reconstruction coefficients.  The user's
global identifier enters every share through ``H(gid)``, so shares issued to
different users recombine to garbage rather than a usable key.

Scheme layout over the asymmetric groups:

    H : gid  -> G2        F : "attr@authority" -> G2
    authority public key: egg^alpha in GT, g1^y in G1
    key share:  K  = g2^alpha * H(gid)^y * F(lit)^t   (G2)
                KP = g1^t                             (G1)
    row x of a ciphertext for message m in GT:
                C1 = egg^lambda_x * (egg^alpha)^t_x
                C2 = g1^(-t_x)
                C3 = (g1^y)^t_x * g1^(w_x)
                C4 = F(lit_x)^t_x
    with lambda = M z, w = M w0, z = (s, z2..), w0 = (0, w2..), C0 = m * egg^s

    recombination: prod_x [C1 e(C2,K) e(C3,H(gid)) e(KP,C4)]^(c_x) = egg^s
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional

from .encoding import canonical_json_bytes, hex_decode, parse_json_bytes
from .errors import MalformedError, UnauthorizedError
from .groups import (
    ORDER,
    G1Elem,
    G2Elem,
    GTElem,
    deserialize,
    gt_pow_cached,
    hash_to_group,
    multi_pair,
    pair,
    random_scalar,
    serialize_element,
)
from .policy import AccessStructure, compile_policy_text

# ---------------------------------------------------------------------------
# hash maps into G2


def hash_gid(gid: str) -> G2Elem:
    return hash_to_group(b"gid:" + gid.encode(), "G2")


def hash_literal(attr: str, authority: str) -> G2Elem:
    return hash_to_group(b"attr:" + f"{attr}@{authority}".encode(), "G2")


# ---------------------------------------------------------------------------
# parameter and key material


@dataclass(frozen=True)
class GlobalParams:
    g1: G1Elem
    g2: G2Elem
    egg: GTElem
    authority_names: tuple
    attribute_universe: frozenset

    def to_dict(self) -> dict:
        return {
            "g1": serialize_element(self.g1).hex(),
            "g2": serialize_element(self.g2).hex(),
            "egg": serialize_element(self.egg).hex(),
            "authorities": list(self.authority_names),
            "attributes": sorted(self.attribute_universe),
        }

    def to_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @classmethod
    def from_dict(cls, data: Mapping) -> "GlobalParams":
        try:
            g1 = deserialize(hex_decode(data["g1"]))
            g2 = deserialize(hex_decode(data["g2"]))
            egg = deserialize(hex_decode(data["egg"]))
            auths = tuple(data["authorities"])
            attrs = frozenset(data["attributes"])
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"invalid global params: {exc}") from None
        if not isinstance(g1, G1Elem) or not isinstance(g2, G2Elem) or not isinstance(egg, GTElem):
            raise MalformedError("global params mix up group membership")
        if egg != pair(g1, g2):
            raise MalformedError("global params pairing value inconsistent")
        return cls(g1, g2, egg, auths, attrs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "GlobalParams":
        return cls.from_dict(parse_json_bytes(data))


def global_setup(seed_element: G1Elem, authority_names: Iterable[str], attribute_universe: Iterable[str]) -> GlobalParams:
    """Deterministic public parameters from a jointly produced G1 element."""
    if not isinstance(seed_element, G1Elem):
        raise MalformedError("generator seed must be a G1 element")
    if seed_element.is_identity():
        raise MalformedError("generator seed must not be the identity")
    names = tuple(authority_names)
    if len(names) != len(set(names)) or not names:
        raise MalformedError("authority names must be unique and non-empty")
    g2 = hash_to_group(seed_element.to_bytes() + b"/g2", "G2")
    egg = pair(seed_element, g2)
    return GlobalParams(seed_element, g2, egg, names, frozenset(attribute_universe))


@dataclass(frozen=True)
class AuthorityPublicKey:
    authority: str
    egg_alpha: GTElem
    g_y: G1Elem

    def to_dict(self) -> dict:
        return {
            "authority": self.authority,
            "egg_alpha": serialize_element(self.egg_alpha).hex(),
            "g_y": serialize_element(self.g_y).hex(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AuthorityPublicKey":
        try:
            egg_alpha = deserialize(hex_decode(data["egg_alpha"]))
            g_y = deserialize(hex_decode(data["g_y"]))
            authority = data["authority"]
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"invalid authority public key: {exc}") from None
        if not isinstance(egg_alpha, GTElem) or not isinstance(g_y, G1Elem):
            raise MalformedError("authority public key mixes up group membership")
        return cls(authority, egg_alpha, g_y)


@dataclass(frozen=True)
class AuthoritySecretKey:
    authority: str
    alpha: int
    y: int

    def public(self, pp: GlobalParams) -> AuthorityPublicKey:
        return AuthorityPublicKey(self.authority, gt_pow_cached(pp.egg, self.alpha), pp.g1 * self.y)


def auth_setup(pp: GlobalParams, authority: str, rng) -> tuple:
    """Returns (public, secret); public is derivable from secret for audit."""
    if authority not in pp.authority_names:
        raise MalformedError(f"authority {authority!r} is not in the declared set")
    sec = AuthoritySecretKey(authority, random_scalar(rng), random_scalar(rng))
    return sec.public(pp), sec


@dataclass(frozen=True)
class KeyShare:
    gid: str
    attr: str
    authority: str
    k: G2Elem
    kp: G1Elem

    @property
    def literal(self):
        return (self.attr, self.authority)

    def to_dict(self) -> dict:
        return {
            "gid": self.gid,
            "attr": self.attr,
            "authority": self.authority,
            "k": serialize_element(self.k).hex(),
            "kp": serialize_element(self.kp).hex(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "KeyShare":
        try:
            k = deserialize(hex_decode(data["k"]))
            kp = deserialize(hex_decode(data["kp"]))
            parsed = cls(data["gid"], data["attr"], data["authority"], k, kp)
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"invalid key share: {exc}") from None
        if not isinstance(k, G2Elem) or not isinstance(kp, G1Elem):
            raise MalformedError("key share mixes up group membership")
        return parsed


def keygen(pp: GlobalParams, sec: AuthoritySecretKey, gid: str, attr: str, rng,
           authority: Optional[str] = None) -> KeyShare:
    """Issue the (attr, authority) share for gid.

    ``authority`` defaults to the caller's own name; naming anyone else is
    refused, since each literal belongs to exactly one authority.
    """
    issuer = authority if authority is not None else sec.authority
    if issuer != sec.authority:
        raise UnauthorizedError(
            f"literal ({attr!r}, {issuer!r}) is not issued by authority {sec.authority!r}"
        )
    t = random_scalar(rng)
    k = pp.g2 * sec.alpha + hash_gid(gid) * sec.y + hash_literal(attr, issuer) * t
    return KeyShare(gid, attr, issuer, k, pp.g1 * t)


# ---------------------------------------------------------------------------
# ciphertexts


@dataclass(frozen=True)
class CiphertextRow:
    c1: GTElem
    c2: G1Elem
    c3: G1Elem
    c4: G2Elem


@dataclass(frozen=True)
class Ciphertext:
    policy_text: str
    c0: GTElem
    rows: tuple

    def to_dict(self) -> dict:
        return {
            "policy": self.policy_text,
            "c0": serialize_element(self.c0).hex(),
            "rows": [
                {
                    "c1": serialize_element(r.c1).hex(),
                    "c2": serialize_element(r.c2).hex(),
                    "c3": serialize_element(r.c3).hex(),
                    "c4": serialize_element(r.c4).hex(),
                }
                for r in self.rows
            ],
        }

    def to_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "Ciphertext":
        try:
            rows = []
            for r in data["rows"]:
                c1 = deserialize(hex_decode(r["c1"]))
                c2 = deserialize(hex_decode(r["c2"]))
                c3 = deserialize(hex_decode(r["c3"]))
                c4 = deserialize(hex_decode(r["c4"]))
                if not (isinstance(c1, GTElem) and isinstance(c2, G1Elem)
                        and isinstance(c3, G1Elem) and isinstance(c4, G2Elem)):
                    raise MalformedError("ciphertext row mixes up group membership")
                rows.append(CiphertextRow(c1, c2, c3, c4))
            c0 = deserialize(hex_decode(data["c0"]))
            policy = data["policy"]
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"invalid ciphertext: {exc}") from None
        if not isinstance(c0, GTElem):
            raise MalformedError("ciphertext c0 must be a GT element")
        return cls(policy, c0, tuple(rows))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        return cls.from_dict(parse_json_bytes(data))


def encrypt(pp: GlobalParams, message: GTElem, structure: AccessStructure,
            pubkeys: Mapping[str, AuthorityPublicKey], rng) -> Ciphertext:
    if not isinstance(message, GTElem):
        raise MalformedError("plaintext must be a GT element")
    for _, auth in structure.row_labels:
        if auth not in pubkeys:
            raise MalformedError(f"no public key available for authority {auth!r}")
    width = structure.width
    s = random_scalar(rng)
    zvec = [s] + [random_scalar(rng) for _ in range(width - 1)]
    wvec = [0] + [random_scalar(rng) for _ in range(width - 1)]
    rows = []
    for row, (attr, auth) in zip(structure.matrix, structure.row_labels):
        lam = sum(a * b for a, b in zip(row, zvec)) % ORDER
        wx = sum(a * b for a, b in zip(row, wvec)) % ORDER
        tx = random_scalar(rng)
        pk = pubkeys[auth]
        rows.append(
            CiphertextRow(
                c1=gt_pow_cached(pp.egg, lam) * gt_pow_cached(pk.egg_alpha, tx),
                c2=pp.g1 * (-tx % ORDER),
                c3=pk.g_y * tx + pp.g1 * wx,
                c4=hash_literal(attr, auth) * tx,
            )
        )
    c0 = message * gt_pow_cached(pp.egg, s)
    return Ciphertext(structure.policy_text, c0, tuple(rows))


def decrypt(pp: GlobalParams, ct: Ciphertext, shares: Iterable[KeyShare]) -> GTElem:
    """Recover the GT plaintext, or fail with a taxonomy error.

    Shares must all belong to one gid; a mixed bundle is rejected before any
    group arithmetic happens.  A bundle that does not satisfy the ciphertext
    policy raises UnauthorizedError.
    """
    shares = list(shares)
    if not shares:
        raise UnauthorizedError("no key shares supplied")
    gids = {s.gid for s in shares}
    if len(gids) != 1:
        raise MalformedError(
            f"key shares span {len(gids)} distinct gids; refusing mixed bundles"
        )
    gid = shares[0].gid
    structure = compile_policy_text(ct.policy_text, pp.authority_names)
    if len(structure.matrix) != len(ct.rows):
        raise MalformedError("ciphertext row count does not match its policy")
    by_literal: Dict[tuple, KeyShare] = {}
    for sh in shares:
        by_literal.setdefault(sh.literal, sh)
    coeffs = compile_reconstruction(structure, by_literal)
    if coeffs is None:
        raise UnauthorizedError("held attributes do not satisfy the policy")
    gt_acc = None
    pairing_args = []
    c3_acc = None
    for idx, coeff in coeffs.items():
        row = ct.rows[idx]
        share = by_literal[structure.row_labels[idx]]
        term = row.c1 ** coeff
        gt_acc = term if gt_acc is None else gt_acc * term
        pairing_args.append((row.c2 * coeff, share.k))
        pairing_args.append((share.kp * coeff, row.c4))
        c3term = row.c3 * coeff
        c3_acc = c3term if c3_acc is None else c3_acc + c3term
    pairing_args.append((c3_acc, hash_gid(gid)))
    blinder = gt_acc * multi_pair(pairing_args)
    return ct.c0 / blinder


def compile_reconstruction(structure: AccessStructure, by_literal: Mapping) -> Optional[dict]:
    from .policy import lsss_reconstruct

    return lsss_reconstruct(structure, set(by_literal))

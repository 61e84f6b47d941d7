"""Hybrid message envelopes: policy-wrapped keys around AEAD-sealed fields.

Each slice of a message carries its own access policy.  A fresh random GT
element is wrapped under the policy with the attribute scheme; SHA-256 of its
canonical encoding keys AES-256-GCM for the actual field data.  The AEAD
associated data binds sender, case id, message id and slice id, so a sealed
slice cannot be transplanted into another message without detection.

Envelope JSON is canonical (sorted keys, compact separators) and versioned
with ``format: "martsia/1"``; serialize(parse(bytes)) is byte-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import maabe
from .encoding import b64decode_str, b64encode_str, canonical_json_bytes, parse_json_bytes
from .errors import IntegrityError, MalformedError
from .groups import GTElem, gt_pow_cached, random_scalar, serialize_element
from .policy import compile_policy_text

ENVELOPE_FORMAT = "martsia/1"
NONCE_BYTES = 12
ID_DIGITS = 8


def derive_slice_key(element: GTElem) -> bytes:
    """32-byte AEAD key from the canonical encoding of a GT element."""
    if not isinstance(element, GTElem):
        raise MalformedError("slice keys derive from GT elements")
    return hashlib.sha256(serialize_element(element)).digest()


def new_decimal_id(rng, digits: int = ID_DIGITS) -> str:
    return str(rng.randrange(10**digits)).zfill(digits)


def _is_decimal_id(value) -> bool:
    return isinstance(value, str) and len(value) == ID_DIGITS and value.isdigit()


@dataclass(frozen=True)
class MessageMetadata:
    sender: str
    case_id: str
    message_id: str

    def validate(self):
        if not self.sender or not isinstance(self.sender, str):
            raise MalformedError("metadata needs a sender address")
        if not self.case_id or not isinstance(self.case_id, str):
            raise MalformedError("metadata needs a case id")
        if not _is_decimal_id(self.message_id):
            raise MalformedError("message id must be 8 decimal digits")

    def to_dict(self) -> dict:
        return {"sender": self.sender, "case_id": self.case_id, "message_id": self.message_id}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MessageMetadata":
        try:
            md = cls(data["sender"], data["case_id"], data["message_id"])
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"invalid metadata: {exc}") from None
        md.validate()
        return md


def slice_aad(metadata: Optional[MessageMetadata], slice_id: Optional[str]) -> bytes:
    if metadata is None:
        return canonical_json_bytes({"sender": "", "case_id": "", "message_id": "", "slice_id": slice_id or ""})
    return canonical_json_bytes(
        {
            "sender": metadata.sender,
            "case_id": metadata.case_id,
            "message_id": metadata.message_id,
            "slice_id": slice_id or "",
        }
    )


@dataclass(frozen=True)
class SealedSlice:
    policy_text: str
    field_keys: tuple
    wrapped_key: maabe.Ciphertext
    nonce: bytes
    body: bytes
    slice_id: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "policy": self.policy_text,
            "field_keys": list(self.field_keys),
            "wrapped_key": self.wrapped_key.to_dict(),
            "nonce": b64encode_str(self.nonce),
            "body": b64encode_str(self.body),
        }
        if self.slice_id is not None:
            out["slice_id"] = self.slice_id
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "SealedSlice":
        try:
            slice_id = data.get("slice_id")
            parsed = cls(
                policy_text=data["policy"],
                field_keys=tuple(data["field_keys"]),
                wrapped_key=maabe.Ciphertext.from_dict(data["wrapped_key"]),
                nonce=b64decode_str(data["nonce"]),
                body=b64decode_str(data["body"]),
                slice_id=slice_id,
            )
        except (KeyError, TypeError) as exc:
            raise MalformedError(f"invalid sealed slice: {exc}") from None
        if len(parsed.nonce) != NONCE_BYTES:
            raise MalformedError("slice nonce must be 12 bytes")
        if parsed.slice_id is not None and not _is_decimal_id(parsed.slice_id):
            raise MalformedError("slice id must be 8 decimal digits")
        return parsed


def seal_slice(pp: maabe.GlobalParams, pubkeys: Mapping, policy_text: str,
               fields: Mapping[str, str], rng, *,
               metadata: Optional[MessageMetadata] = None,
               slice_id: Optional[str] = None) -> SealedSlice:
    """Wrap a fresh GT element under the policy and seal the fields with it."""
    if not fields:
        raise MalformedError("a slice needs at least one field")
    for key, value in fields.items():
        if not isinstance(key, str) or not isinstance(value, str):
            raise MalformedError("slice fields are string key/value pairs")
    structure = compile_policy_text(policy_text, pp.authority_names)
    kem_element = gt_pow_cached(pp.egg, random_scalar(rng))
    wrapped = maabe.encrypt(pp, kem_element, structure, pubkeys, rng)
    key = derive_slice_key(kem_element)
    nonce = rng.randbytes(NONCE_BYTES)
    plaintext = canonical_json_bytes(dict(fields))
    body = AESGCM(key).encrypt(nonce, plaintext, slice_aad(metadata, slice_id))
    return SealedSlice(
        policy_text=structure.policy_text,
        field_keys=tuple(sorted(fields)),
        wrapped_key=wrapped,
        nonce=nonce,
        body=body,
        slice_id=slice_id,
    )


def open_slice(pp: maabe.GlobalParams, sealed: SealedSlice, shares, *,
               metadata: Optional[MessageMetadata] = None) -> dict:
    """Recover the field map; unauthorized and tampered cases split cleanly.

    Raises UnauthorizedError when the shares cannot satisfy the policy and
    IntegrityError when policy-level decryption succeeded structurally but
    the AEAD tag refuses the payload (tampering, transplanted slice, forged
    or cross-user shares).
    """
    kem_element = maabe.decrypt(pp, sealed.wrapped_key, shares)
    key = derive_slice_key(kem_element)
    try:
        plaintext = AESGCM(key).decrypt(
            sealed.nonce, sealed.body, slice_aad(metadata, sealed.slice_id)
        )
    except InvalidTag:
        raise IntegrityError("slice payload failed authentication") from None
    fields = parse_json_bytes(plaintext)
    if not isinstance(fields, dict) or tuple(sorted(fields)) != tuple(sorted(sealed.field_keys)):
        raise MalformedError("slice fields do not match the declared keys")
    return fields


@dataclass(frozen=True)
class MessageEnvelope:
    metadata: MessageMetadata
    slices: tuple

    def to_dict(self) -> dict:
        return {
            "format": ENVELOPE_FORMAT,
            "metadata": self.metadata.to_dict(),
            "slices": [s.to_dict() for s in self.slices],
        }

    def to_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping) -> "MessageEnvelope":
        if not isinstance(data, Mapping) or data.get("format") != ENVELOPE_FORMAT:
            raise MalformedError(f"unsupported envelope format {data.get('format')!r}"
                                 if isinstance(data, Mapping) else "envelope must be an object")
        metadata = MessageMetadata.from_dict(data.get("metadata", {}))
        raw_slices = data.get("slices")
        if not isinstance(raw_slices, list) or not raw_slices:
            raise MalformedError("envelope needs at least one slice")
        slices = tuple(SealedSlice.from_dict(s) for s in raw_slices)
        return build_envelope(metadata, slices)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MessageEnvelope":
        return cls.from_dict(parse_json_bytes(data))

    def policies(self) -> tuple:
        return tuple(s.policy_text for s in self.slices)


def build_envelope(metadata: MessageMetadata, sealed_slices: Sequence[SealedSlice]) -> MessageEnvelope:
    """Assemble and validate; slice ids must be present exactly when needed.

    Ids are assigned before sealing (they are bound into the AEAD data), so
    an id clash here is a caller bug, not something to patch up silently.
    """
    metadata.validate()
    slices = tuple(sealed_slices)
    if not slices:
        raise MalformedError("envelope needs at least one slice")
    if len(slices) == 1:
        if slices[0].slice_id is not None:
            raise MalformedError("single-slice envelopes carry no slice id")
    else:
        ids = [s.slice_id for s in slices]
        if any(i is None for i in ids):
            raise MalformedError("multi-slice envelopes need a slice id on every slice")
        if len(set(ids)) != len(ids):
            raise MalformedError("slice ids must be unique within an envelope")
    return MessageEnvelope(metadata, slices)


def seal_message(pp: maabe.GlobalParams, pubkeys: Mapping, metadata: MessageMetadata,
                 parts: Sequence[tuple], rng) -> MessageEnvelope:
    """Seal ``[(policy_text, fields), ...]`` into one envelope.

    Slice ids (8 decimal digits) are drawn and deduplicated up front when the
    message has two or more slices.
    """
    metadata.validate()
    parts = list(parts)
    if not parts:
        raise MalformedError("a message needs at least one slice")
    if len(parts) == 1:
        ids = [None]
    else:
        ids = []
        seen = set()
        for _ in parts:
            sid = new_decimal_id(rng)
            while sid in seen:
                sid = new_decimal_id(rng)
            seen.add(sid)
            ids.append(sid)
    sealed = [
        seal_slice(pp, pubkeys, policy, fields, rng, metadata=metadata, slice_id=sid)
        for (policy, fields), sid in zip(parts, ids)
    ]
    return build_envelope(metadata, sealed)


def open_envelope_slice(pp: maabe.GlobalParams, envelope: MessageEnvelope, index: int, shares) -> dict:
    if not 0 <= index < len(envelope.slices):
        raise MalformedError(f"envelope has no slice {index}")
    return open_slice(pp, envelope.slices[index], shares, metadata=envelope.metadata)

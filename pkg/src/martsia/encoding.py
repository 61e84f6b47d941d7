"""Canonical byte encodings shared across modules.

All persisted or hashed structures go through ``canonical_json_bytes`` so
equal values always produce equal bytes: keys sorted, no whitespace, UTF-8,
binary payloads hex- or base64-armored by the caller.
"""

from __future__ import annotations

import base64
import json

from .errors import MalformedError


def canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def parse_json_bytes(data: bytes):
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedError(f"invalid JSON payload: {exc}") from None


def b64encode_str(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64decode_str(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (ValueError, TypeError) as exc:
        raise MalformedError(f"invalid base64: {exc}") from None


def hex_decode(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except (ValueError, TypeError):
        raise MalformedError("invalid hex string") from None

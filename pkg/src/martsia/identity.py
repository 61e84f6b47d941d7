"""Actor identities and the asymmetric crypto they carry.

Every actor derives all of its key material from the run seed through labeled
SHA-256 streams, so two runs with one seed produce byte-identical keys,
signatures, and ciphertexts.  That rules out library routines that reach for
os.urandom internally: RSA primes come from a seeded stream via gmpy2, and
OAEP encryption is implemented here (RFC 8017 EME-OAEP, SHA-256 + MGF1) so the
padding seed can be drawn from the caller's rng.  Challenge signatures use PSS
with a zero-length salt, which is deterministic by construction.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Optional

import gmpy2
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .encoding import b64decode_str, b64encode_str, canonical_json_bytes, parse_json_bytes
from .errors import IntegrityError, MalformedError, UnauthorizedError
from .ledger import address_from_verify_key

RSA_BITS = 2048
RSA_E = 65537
_HLEN = 32  # SHA-256
WRAP_AAD = b"martsia/keyshare"


def derived_rng(root_seed: int, *labels: str) -> random.Random:
    """Independent deterministic stream for (seed, label path)."""
    material = hashlib.sha256(
        canonical_json_bytes([int(root_seed), list(labels)])
    ).digest()
    return random.Random(int.from_bytes(material, "big"))


# ---------------------------------------------------------------------------
# deterministic RSA


def _draw_prime(rng: random.Random, bits: int) -> gmpy2.mpz:
    # top two bits forced so p*q always reaches the full modulus size
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        p = gmpy2.next_prime(cand)
        if p.bit_length() == bits and gmpy2.gcd(p - 1, RSA_E) == 1:
            return p


def generate_rsa_key(rng: random.Random, bits: int = RSA_BITS):
    half = bits // 2
    p = _draw_prime(rng, half)
    q = _draw_prime(rng, half)
    while q == p:
        q = _draw_prime(rng, half)
    n = p * q
    d = gmpy2.invert(RSA_E, gmpy2.lcm(p - 1, q - 1))
    public = rsa.RSAPublicNumbers(RSA_E, int(n))
    private = rsa.RSAPrivateNumbers(
        p=int(p),
        q=int(q),
        d=int(d),
        dmp1=int(d % (p - 1)),
        dmq1=int(d % (q - 1)),
        iqmp=int(gmpy2.invert(q, p)),
        public_numbers=public,
    )
    return private.private_key()


def rsa_public_pem(public_key) -> str:
    return public_key.public_bytes(
        serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
    ).decode()


def load_rsa_public_pem(pem: str):
    try:
        key = serialization.load_pem_public_key(pem.encode())
    except (ValueError, TypeError) as exc:
        raise MalformedError(f"unreadable RSA public key: {exc}") from None
    if not isinstance(key, rsa.RSAPublicKey):
        raise MalformedError("stored public key is not RSA")
    return key


# ---------------------------------------------------------------------------
# OAEP with caller-supplied randomness (RFC 8017, SHA-256, empty label)


def _mgf1(seed: bytes, length: int) -> bytes:
    out = b""
    for counter in range((length + _HLEN - 1) // _HLEN):
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
    return out[:length]


_L_HASH = hashlib.sha256(b"").digest()


def oaep_encrypt(public_key, message: bytes, rng: random.Random) -> bytes:
    numbers = public_key.public_numbers()
    k = (numbers.n.bit_length() + 7) // 8
    max_len = k - 2 * _HLEN - 2
    if len(message) > max_len:
        raise MalformedError(f"OAEP payload exceeds {max_len} bytes")
    ps = b"\x00" * (max_len - len(message))
    db = _L_HASH + ps + b"\x01" + message
    seed = rng.randbytes(_HLEN)
    masked_db = bytes(a ^ b for a, b in zip(db, _mgf1(seed, k - _HLEN - 1)))
    masked_seed = bytes(a ^ b for a, b in zip(seed, _mgf1(masked_db, _HLEN)))
    em = int.from_bytes(b"\x00" + masked_seed + masked_db, "big")
    c = gmpy2.powmod(em, numbers.e, numbers.n)
    return int(c).to_bytes(k, "big")


def oaep_decrypt(private_key, ciphertext: bytes) -> bytes:
    numbers = private_key.private_numbers()
    n = numbers.public_numbers.n
    k = (n.bit_length() + 7) // 8
    if len(ciphertext) != k:
        raise IntegrityError("RSA ciphertext has the wrong length")
    c = int.from_bytes(ciphertext, "big")
    if c >= n:
        raise IntegrityError("RSA ciphertext out of range")
    em = int(gmpy2.powmod(c, numbers.d, n)).to_bytes(k, "big")
    if em[0] != 0:
        raise IntegrityError("RSA payload failed padding checks")
    masked_seed, masked_db = em[1 : 1 + _HLEN], em[1 + _HLEN :]
    seed = bytes(a ^ b for a, b in zip(masked_seed, _mgf1(masked_db, _HLEN)))
    db = bytes(a ^ b for a, b in zip(masked_db, _mgf1(seed, k - _HLEN - 1)))
    if db[:_HLEN] != _L_HASH:
        raise IntegrityError("RSA payload failed padding checks")
    sep = db.find(b"\x01", _HLEN)
    if sep < 0 or any(db[_HLEN:sep]):
        raise IntegrityError("RSA payload failed padding checks")
    return db[sep + 1 :]


# ---------------------------------------------------------------------------
# PSS challenge signatures (zero salt keeps them deterministic)

_PSS = padding.PSS(mgf=padding.MGF1(hashes.SHA256()), salt_length=0)


def pss_sign(private_key, data: bytes) -> bytes:
    return private_key.sign(data, _PSS, hashes.SHA256())


def pss_verify(public_key, signature: bytes, data: bytes):
    try:
        public_key.verify(signature, data, _PSS, hashes.SHA256())
    except InvalidSignature:
        raise UnauthorizedError("challenge signature does not verify") from None


# ---------------------------------------------------------------------------
# hybrid wrap: RSA-OAEP around an AES-256-GCM payload


def wrap_payload(public_key_pem: str, payload: bytes, rng: random.Random) -> str:
    """Encrypt ``payload`` so only the PEM key's holder can read it."""
    key = rng.randbytes(32)
    nonce = rng.randbytes(12)
    body = AESGCM(key).encrypt(nonce, payload, WRAP_AAD)
    wrapped = oaep_encrypt(load_rsa_public_pem(public_key_pem), key, rng)
    return b64encode_str(
        canonical_json_bytes(
            {
                "wrapped_key": b64encode_str(wrapped),
                "nonce": b64encode_str(nonce),
                "body": b64encode_str(body),
            }
        )
    )


def unwrap_payload(private_key, blob: str) -> bytes:
    data = parse_json_bytes(b64decode_str(blob))
    try:
        wrapped = b64decode_str(data["wrapped_key"])
        nonce = b64decode_str(data["nonce"])
        body = b64decode_str(data["body"])
    except (KeyError, TypeError) as exc:
        raise MalformedError(f"invalid wrapped payload: {exc}") from None
    key = oaep_decrypt(private_key, wrapped)
    try:
        return AESGCM(key).decrypt(nonce, body, WRAP_AAD)
    except Exception:
        raise IntegrityError("wrapped payload failed authentication") from None


# ---------------------------------------------------------------------------
# identities


@dataclass
class ActorIdentity:
    """One ledger account: signing keys, optional RSA pair, address as GID."""

    name: str
    signing_key: Ed25519PrivateKey = field(repr=False)
    verify_key: bytes
    address: str
    rsa_key: Optional[object] = field(default=None, repr=False)

    @property
    def gid(self) -> str:
        return self.address

    @classmethod
    def generate(cls, root_seed: int, name: str, *, with_rsa: bool = False) -> "ActorIdentity":
        signing_key = Ed25519PrivateKey.from_private_bytes(
            derived_rng(root_seed, "ed25519", name).randbytes(32)
        )
        verify_key = signing_key.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        rsa_key = generate_rsa_key(derived_rng(root_seed, "rsa", name)) if with_rsa else None
        return cls(name, signing_key, verify_key, address_from_verify_key(verify_key), rsa_key)

    def rsa_public_pem(self) -> str:
        if self.rsa_key is None:
            raise MalformedError(f"actor {self.name!r} has no RSA keypair")
        return rsa_public_pem(self.rsa_key.public_key())

"""Public interface over the pairing groups.

Wraps the tuple-level arithmetic in small element classes with operator
support, canonical tagged serialization, digests, and deterministic hashing
onto the curve groups.  Scalars are plain ints reduced mod the group order.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from functools import lru_cache

import gmpy2

from ..errors import MalformedError
from . import curves as cv
from . import fields as fi
from . import pairing as pr

ORDER = int(fi.R)

SERIAL_VERSION = 1
_KIND_G1 = 1
_KIND_G2 = 2
_KIND_GT = 3
_KIND_SCALAR = 4


class G1Elem:
    """Element of the order-r subgroup of E(Fp); additive notation."""

    group = "G1"
    __slots__ = ("pt",)

    def __init__(self, pt):
        self.pt = pt

    def __add__(self, other):
        return G1Elem(cv.G1_OPS["add"](self.pt, other.pt))

    def __neg__(self):
        return G1Elem(cv.G1_OPS["neg"](self.pt))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k: int):
        return G1Elem(cv.G1_OPS["mul"](self.pt, int(k) % ORDER))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, G1Elem) and cv.G1_OPS["eq"](self.pt, other.pt)

    def __hash__(self):
        return hash((self.group, self.to_bytes()))

    def is_identity(self) -> bool:
        return cv.G1_OPS["is_identity"](self.pt)

    def to_bytes(self) -> bytes:
        return cv.g1_to_bytes(self.pt)

    def __repr__(self):
        return f"G1Elem({self.to_bytes().hex()[:16]}...)"


class G2Elem:
    group = "G2"
    __slots__ = ("pt",)

    def __init__(self, pt):
        self.pt = pt

    def __add__(self, other):
        return G2Elem(cv.G2_OPS["add"](self.pt, other.pt))

    def __neg__(self):
        return G2Elem(cv.G2_OPS["neg"](self.pt))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k: int):
        return G2Elem(cv.G2_OPS["mul"](self.pt, int(k) % ORDER))

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, G2Elem) and cv.G2_OPS["eq"](self.pt, other.pt)

    def __hash__(self):
        return hash((self.group, self.to_bytes()))

    def is_identity(self) -> bool:
        return cv.G2_OPS["is_identity"](self.pt)

    def to_bytes(self) -> bytes:
        return cv.g2_to_bytes(self.pt)

    def __repr__(self):
        return f"G2Elem({self.to_bytes().hex()[:16]}...)"


class GTElem:
    """Element of the order-r target group; multiplicative notation."""

    group = "GT"
    __slots__ = ("val",)

    def __init__(self, val):
        self.val = val

    def __mul__(self, other):
        return GTElem(fi.fp12_mul(self.val, other.val))

    def __truediv__(self, other):
        return GTElem(fi.fp12_mul(self.val, fi.fp12_conj(other.val)))

    def __pow__(self, k: int):
        return GTElem(fi.fp12_cyc_pow(self.val, int(k) % ORDER))

    def inverse(self):
        # conjugation inverts elements of the cyclotomic subgroup
        return GTElem(fi.fp12_conj(self.val))

    def __eq__(self, other):
        return isinstance(other, GTElem) and self.val == other.val

    def __hash__(self):
        return hash((self.group, self.to_bytes()))

    def is_identity(self) -> bool:
        return self.val == fi.FP12_ONE

    def to_bytes(self) -> bytes:
        (e0, e1, e2), (d0, d1, d2) = self.val
        parts = []
        for c in (e0, e1, e2, d0, d1, d2):
            parts.append(int(c[0]).to_bytes(48, "big"))
            parts.append(int(c[1]).to_bytes(48, "big"))
        return b"".join(parts)

    def __repr__(self):
        return f"GTElem({self.to_bytes().hex()[:16]}...)"


GroupElement = (G1Elem, G2Elem, GTElem)

G1_GENERATOR = G1Elem(cv.G1_GEN)
G2_GENERATOR = G2Elem(cv.G2_GEN)


def g1_identity() -> G1Elem:
    return G1Elem(cv.G1_OPS["identity"])


def g2_identity() -> G2Elem:
    return G2Elem(cv.G2_OPS["identity"])


def gt_identity() -> GTElem:
    return GTElem(fi.FP12_ONE)


def pair(a: G1Elem, b: G2Elem) -> GTElem:
    if not isinstance(a, G1Elem) or not isinstance(b, G2Elem):
        raise MalformedError("pair expects (G1, G2) arguments")
    return GTElem(pr.pair(a.pt, b.pt))


def multi_pair(pairs) -> GTElem:
    """Product of pairings with one shared final exponentiation."""
    return GTElem(pr.multi_pair([(a.pt, b.pt) for a, b in pairs]))


@lru_cache(maxsize=1)
def gt_generator() -> GTElem:
    return pair(G1_GENERATOR, G2_GENERATOR)


def random_scalar(rng) -> int:
    """Uniform in [1, order-1]."""
    return rng.randrange(1, ORDER)


def scalar_inv(k: int) -> int:
    k %= ORDER
    if k == 0:
        raise MalformedError("zero scalar has no inverse")
    return int(gmpy2.invert(k, ORDER))


def random_element(which: str, rng):
    k = random_scalar(rng)
    if which == "G1":
        return G1_GENERATOR * k
    if which == "G2":
        return G2_GENERATOR * k
    if which == "GT":
        return gt_generator() ** k
    raise MalformedError(f"unknown group {which!r}")


@lru_cache(maxsize=4096)
def _hash_to_g1_cached(data: bytes):
    return cv.hash_to_g1(data)


@lru_cache(maxsize=4096)
def _hash_to_g2_cached(data: bytes):
    return cv.hash_to_g2(data)


def hash_to_group(data: bytes, which: str):
    """Deterministic hash onto G1 or G2; never returns the identity."""
    if which == "G1":
        return G1Elem(_hash_to_g1_cached(bytes(data)))
    if which == "G2":
        return G2Elem(_hash_to_g2_cached(bytes(data)))
    raise MalformedError(f"cannot hash onto group {which!r}")


def serialize_element(elem) -> bytes:
    if isinstance(elem, G1Elem):
        kind = _KIND_G1
    elif isinstance(elem, G2Elem):
        kind = _KIND_G2
    elif isinstance(elem, GTElem):
        kind = _KIND_GT
    else:
        raise MalformedError("not a group element")
    return bytes((SERIAL_VERSION, kind)) + elem.to_bytes()


def serialize_scalar(k: int) -> bytes:
    return bytes((SERIAL_VERSION, _KIND_SCALAR)) + (int(k) % ORDER).to_bytes(32, "big")


def deserialize(data: bytes):
    """Parse a tagged encoding; validates range, curve and subgroup."""
    if len(data) < 2:
        raise MalformedError("encoding too short")
    version, kind = data[0], data[1]
    if version != SERIAL_VERSION:
        raise MalformedError(f"unsupported serialization version {version}")
    payload = data[2:]
    try:
        if kind == _KIND_G1:
            return G1Elem(cv.g1_from_bytes(payload))
        if kind == _KIND_G2:
            return G2Elem(cv.g2_from_bytes(payload))
        if kind == _KIND_GT:
            return _gt_from_bytes(payload)
        if kind == _KIND_SCALAR:
            if len(payload) != 32:
                raise ValueError("scalar must be 32 bytes")
            k = int.from_bytes(payload, "big")
            if k >= ORDER:
                raise ValueError("scalar out of range")
            return k
    except ValueError as exc:
        raise MalformedError(str(exc)) from None
    raise MalformedError(f"unknown element kind {kind}")


def _gt_from_bytes(payload: bytes) -> GTElem:
    if len(payload) != 576:
        raise ValueError("GT encoding must be 576 bytes")
    coeffs = []
    for i in range(12):
        c = int.from_bytes(payload[i * 48:(i + 1) * 48], "big")
        if c >= fi.P:
            raise ValueError("GT coefficient out of range")
        coeffs.append(gmpy2.mpz(c))
    fp2s = [(coeffs[i], coeffs[i + 1]) for i in range(0, 12, 2)]
    val = ((fp2s[0], fp2s[1], fp2s[2]), (fp2s[3], fp2s[4], fp2s[5]))
    if not pr.gt_is_valid(val):
        raise ValueError("element not in the target group")
    return GTElem(val)


def digest(elem) -> bytes:
    """SHA-256 over the canonical tagged serialization."""
    return hashlib.sha256(serialize_element(elem)).digest()


class _GTComb:
    """Fixed-base comb for GT exponentiation: no squarings at query time.

    tables[i][j] holds base^(j * 16^i) for the 64 nibbles of a 256-bit
    exponent; one exponentiation is then at most 63 multiplications.
    """

    __slots__ = ("tables",)

    def __init__(self, val):
        self.tables = []
        cur = val
        for i in range(64):
            row = [None, cur]
            for _ in range(14):
                row.append(fi.fp12_mul(row[-1], cur))
            self.tables.append(row)
            if i < 63:
                cur = fi.fp12_cyc_sqr(row[8])  # (base^(8*16^i))^2 = base^(16^(i+1))

    def pow(self, e: int):
        e = int(e) % ORDER
        acc = None
        i = 0
        while e:
            nib = e & 15
            if nib:
                t = self.tables[i][nib]
                acc = t if acc is None else fi.fp12_mul(acc, t)
            e >>= 4
            i += 1
        return acc if acc is not None else fi.FP12_ONE


_COMB_CACHE: "OrderedDict[bytes, _GTComb]" = OrderedDict()
_COMB_CACHE_MAX = 16


def gt_pow_cached(base: GTElem, e: int) -> GTElem:
    """Exponentiation that amortizes per-base precomputation.

    Worth using for bases that recur many times (pairing generator, authority
    public values); for one-off bases plain ``**`` is cheaper.
    """
    key = base.to_bytes()
    comb = _COMB_CACHE.get(key)
    if comb is None:
        comb = _GTComb(base.val)
        _COMB_CACHE[key] = comb
        if len(_COMB_CACHE) > _COMB_CACHE_MAX:
            _COMB_CACHE.popitem(last=False)
    else:
        _COMB_CACHE.move_to_end(key)
    return GTElem(comb.pow(e))

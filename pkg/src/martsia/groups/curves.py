"""BLS12-381 curve groups G1 (over Fp) and G2 (over Fp2).

Points are Jacobian tuples ``(X, Y, Z)`` of field elements; the identity has
``Z == 0``.  The two groups share the arithmetic through a closure factory so
formulas exist once.  Encodings follow the common 48/96-byte compressed
format: three flag bits in the top byte (compressed, infinity, larger-y) and
the x coordinate big-endian, with the imaginary half first for G2.
"""

from __future__ import annotations

import hashlib

import gmpy2
from gmpy2 import mpz

from . import fields as fi
from .fields import H1, H2, P, R

_HALF_P = (P - 1) // 2


def _make_ops(add, sub, mul, sqr, neg, inv, zero, one, b_coeff):
    identity = (one, one, zero)

    def is_identity(pt):
        return pt[2] == zero

    def double(pt):
        x, y, z = pt
        if z == zero or y == zero:
            return identity
        a = sqr(x)
        b = sqr(y)
        c = sqr(b)
        d = sub(sub(sqr(add(x, b)), a), c)
        d = add(d, d)
        e = add(add(a, a), a)
        f = sqr(e)
        x3 = sub(f, add(d, d))
        c8 = add(c, c)
        c8 = add(c8, c8)
        c8 = add(c8, c8)
        y3 = sub(mul(e, sub(d, x3)), c8)
        z3 = mul(add(y, y), z)
        return (x3, y3, z3)

    def padd(p1, p2):
        if p1[2] == zero:
            return p2
        if p2[2] == zero:
            return p1
        x1, y1, z1 = p1
        x2, y2, z2 = p2
        z1s = sqr(z1)
        z2s = sqr(z2)
        u1 = mul(x1, z2s)
        u2 = mul(x2, z1s)
        s1 = mul(mul(y1, z2), z2s)
        s2 = mul(mul(y2, z1), z1s)
        if u1 == u2:
            if s1 == s2:
                return double(p1)
            return identity
        h = sub(u2, u1)
        hh = sqr(add(h, h))
        j = mul(h, hh)
        rr = sub(s2, s1)
        rr = add(rr, rr)
        v = mul(u1, hh)
        x3 = sub(sub(sqr(rr), j), add(v, v))
        sj = mul(s1, j)
        y3 = sub(mul(rr, sub(v, x3)), add(sj, sj))
        z3 = mul(mul(z1, z2), add(h, h))
        return (x3, y3, z3)

    def pneg(pt):
        return (pt[0], neg(pt[1]), pt[2])

    def peq(p1, p2):
        if p1[2] == zero or p2[2] == zero:
            return p1[2] == zero and p2[2] == zero
        z1s = sqr(p1[2])
        z2s = sqr(p2[2])
        if mul(p1[0], z2s) != mul(p2[0], z1s):
            return False
        return mul(mul(p1[1], p2[2]), z2s) == mul(mul(p2[1], p1[2]), z1s)

    def to_affine(pt):
        if pt[2] == zero:
            return None
        zi = inv(pt[2])
        zi2 = sqr(zi)
        return (mul(pt[0], zi2), mul(mul(pt[1], zi), zi2))

    def from_affine(aff):
        if aff is None:
            return identity
        return (aff[0], aff[1], one)

    def mul_scalar(pt, k):
        k = int(k)
        if k < 0:
            return mul_scalar(pneg(pt), -k)
        if k == 0 or pt[2] == zero:
            return identity
        if k == 1:
            return pt
        # 4-bit fixed window
        table = [identity, pt]
        for _ in range(14):
            table.append(padd(table[-1], pt))
        nibbles = []
        while k:
            nibbles.append(k & 15)
            k >>= 4
        acc = table[nibbles[-1]]
        for nib in reversed(nibbles[:-1]):
            acc = double(double(double(double(acc))))
            if nib:
                acc = padd(acc, table[nib])
        return acc

    def on_curve(aff):
        if aff is None:
            return True
        x, y = aff
        return sqr(y) == add(mul(sqr(x), x), b_coeff)

    return {
        "identity": identity,
        "is_identity": is_identity,
        "double": double,
        "add": padd,
        "neg": pneg,
        "eq": peq,
        "to_affine": to_affine,
        "from_affine": from_affine,
        "mul": mul_scalar,
        "on_curve": on_curve,
    }


_fp_ops = _make_ops(
    add=lambda a, b: (a + b) % P,
    sub=lambda a, b: (a - b) % P,
    mul=lambda a, b: (a * b) % P,
    sqr=lambda a: (a * a) % P,
    neg=lambda a: -a % P,
    inv=lambda a: gmpy2.invert(a, P),
    zero=mpz(0),
    one=mpz(1),
    b_coeff=mpz(4),
)

_B2 = fi.fp2_scale(fi.XI, 4)  # twist coefficient 4(1 + u)

_fp2_ops = _make_ops(
    add=fi.fp2_add,
    sub=fi.fp2_sub,
    mul=fi.fp2_mul,
    sqr=fi.fp2_sqr,
    neg=fi.fp2_neg,
    inv=fi.fp2_inv,
    zero=fi.FP2_ZERO,
    one=fi.FP2_ONE,
    b_coeff=_B2,
)

G1_OPS = _fp_ops
G2_OPS = _fp2_ops

# standard generators
G1_GEN = (
    mpz(0x17F1D3A73197D7942695638C4FA9AC0FC3688C4F9774B905A14E3A3F171BAC586C55E83FF97A1AEFFB3AF00ADB22C6BB),
    mpz(0x08B3F481E3AAA0F1A09E30ED741D8AE4FCF5E095D5D00AF600DB18CB2C04B3EDD03CC744A2888AE40CAA232946C5E7E1),
    mpz(1),
)
G2_GEN = (
    (
        mpz(0x024AA2B2F08F0A91260805272DC51051C6E47AD4FA403B02B4510B647AE3D1770BAC0326A805BBEFD48056C8C121BDB8),
        mpz(0x13E02B6052719F607DACD3A088274F65596BD0D09920B61AB5DA61BBDC7F5049334CF11213945D57E5AC7D055D042B7E),
    ),
    (
        mpz(0x0CE5D527727D6E118CC9CDC6DA2E351AADFD9BAA8CBDD3A76D429A695160D12C923AC9CC3BACA289E193548608B82801),
        mpz(0x0606C4A02EA734CC32ACD2B02BC28B99CB3E287E85A763AF267492AB572E99AB3F370D275CEC1DA1AAA9075FF05F79BE),
    ),
    fi.FP2_ONE,
)

assert _fp_ops["on_curve"]((G1_GEN[0], G1_GEN[1]))
assert _fp2_ops["on_curve"]((G2_GEN[0], G2_GEN[1]))


# ---------------------------------------------------------------------------
# serialization (48-byte G1 / 96-byte G2 compressed)

def _fp_to_bytes(a):
    return int(a).to_bytes(48, "big")


def _fp2_lex_larger(y):
    y0, y1 = y
    if y1 != 0:
        return y1 > _HALF_P
    return y0 > _HALF_P


def g1_to_bytes(pt):
    aff = _fp_ops["to_affine"](pt)
    if aff is None:
        out = bytearray(48)
        out[0] = 0xC0
        return bytes(out)
    x, y = aff
    out = bytearray(_fp_to_bytes(x))
    out[0] |= 0x80
    if y > _HALF_P:
        out[0] |= 0x20
    return bytes(out)


def g2_to_bytes(pt):
    aff = _fp2_ops["to_affine"](pt)
    if aff is None:
        out = bytearray(96)
        out[0] = 0xC0
        return bytes(out)
    (x0, x1), y = aff
    out = bytearray(_fp_to_bytes(x1) + _fp_to_bytes(x0))
    out[0] |= 0x80
    if _fp2_lex_larger(y):
        out[0] |= 0x20
    return bytes(out)


def _sqrt_fp(a):
    cand = gmpy2.powmod(a, (P + 1) // 4, P)
    if (cand * cand) % P != a:
        return None
    return cand


def g1_from_bytes(data, *, check_subgroup=True):
    if len(data) != 48:
        raise ValueError("G1 encoding must be 48 bytes")
    flags = data[0]
    if not flags & 0x80:
        raise ValueError("uncompressed encodings not accepted")
    if flags & 0x40:
        if flags & 0x20 or any(data[1:]) or data[0] != 0xC0:
            raise ValueError("malformed infinity encoding")
        return _fp_ops["identity"]
    x = mpz(int.from_bytes(data, "big") & ((1 << 381) - 1))
    if x >= P:
        raise ValueError("x coordinate out of range")
    y = _sqrt_fp((x * x % P * x + 4) % P)
    if y is None:
        raise ValueError("x is not on the curve")
    if bool(flags & 0x20) != (y > _HALF_P):
        y = (P - y) % P
    pt = (x, y, mpz(1))
    if check_subgroup and not g1_in_subgroup(pt):
        raise ValueError("point not in the prime-order subgroup")
    return pt


def g2_from_bytes(data, *, check_subgroup=True):
    if len(data) != 96:
        raise ValueError("G2 encoding must be 96 bytes")
    flags = data[0]
    if not flags & 0x80:
        raise ValueError("uncompressed encodings not accepted")
    if flags & 0x40:
        if flags & 0x20 or any(data[1:]) or data[0] != 0xC0:
            raise ValueError("malformed infinity encoding")
        return _fp2_ops["identity"]
    x1 = mpz(int.from_bytes(data[:48], "big") & ((1 << 381) - 1))
    x0 = mpz(int.from_bytes(data[48:], "big"))
    if x0 >= P or x1 >= P:
        raise ValueError("x coordinate out of range")
    x = (x0, x1)
    rhs = fi.fp2_add(fi.fp2_mul(fi.fp2_sqr(x), x), _B2)
    try:
        y = fi.fp2_sqrt(rhs)
    except ValueError:
        raise ValueError("x is not on the curve") from None
    if bool(flags & 0x20) != _fp2_lex_larger(y):
        y = fi.fp2_neg(y)
    pt = (x, y, fi.FP2_ONE)
    if check_subgroup and not g2_in_subgroup(pt):
        raise ValueError("point not in the prime-order subgroup")
    return pt


def g1_in_subgroup(pt):
    return _fp_ops["is_identity"](_fp_ops["mul"](pt, R))


def g2_in_subgroup(pt):
    return _fp2_ops["is_identity"](_fp2_ops["mul"](pt, R))


# ---------------------------------------------------------------------------
# hash to curve: hash-and-try x, deterministic sign, cofactor cleared

def _hash_blocks(tag: bytes, msg: bytes, nbytes: int) -> bytes:
    out = b""
    block = 0
    while len(out) < nbytes:
        out += hashlib.sha256(tag + block.to_bytes(4, "big") + msg).digest()
        block += 1
    return out[:nbytes]


def hash_to_g1(msg: bytes):
    ctr = 0
    while True:
        stream = _hash_blocks(b"h2c/G1/%d/" % ctr, msg, 65)
        x = mpz(int.from_bytes(stream[:64], "big")) % P
        y = _sqrt_fp((x * x % P * x + 4) % P)
        ctr += 1
        if y is None:
            continue
        if (stream[64] & 1) != (y & 1):
            y = (P - y) % P
        pt = _fp_ops["mul"]((x, y, mpz(1)), H1)
        if _fp_ops["is_identity"](pt):
            continue
        return pt


def hash_to_g2(msg: bytes):
    ctr = 0
    while True:
        stream = _hash_blocks(b"h2c/G2/%d/" % ctr, msg, 129)
        x0 = mpz(int.from_bytes(stream[:64], "big")) % P
        x1 = mpz(int.from_bytes(stream[64:128], "big")) % P
        x = (x0, x1)
        rhs = fi.fp2_add(fi.fp2_mul(fi.fp2_sqr(x), x), _B2)
        ctr += 1
        try:
            y = fi.fp2_sqrt(rhs)
        except ValueError:
            continue
        if bool(stream[128] & 1) != _fp2_lex_larger(y):
            y = fi.fp2_neg(y)
        pt = _fp2_ops["mul"]((x, y, fi.FP2_ONE), H2)
        if _fp2_ops["is_identity"](pt):
            continue
        return pt

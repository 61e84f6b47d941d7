"""Tower-field arithmetic for BLS12-381.

Layout: Fp2 = Fp[u]/(u^2 + 1), Fp6 = Fp2[v]/(v^3 - xi) with xi = 1 + u,
Fp12 = Fp6[w]/(w^2 - v).  Elements are plain tuples of gmpy2 integers
(an Fp2 is ``(c0, c1)``, an Fp6 is a triple of Fp2, an Fp12 a pair of Fp6),
and operations are module-level functions.  Tuples keep the hot paths free
of attribute lookups; profiling showed object wrappers roughly double the
cost of a pairing.
"""

from __future__ import annotations

import gmpy2
from gmpy2 import mpz

# ---------------------------------------------------------------------------
# curve constants

P = mpz(0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB)
R = mpz(0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001)
#: BLS parameter; negative.  |X| drives the Miller loop and final exponentiation.
X = -mpz(0xD201000000010000)
H1 = mpz(0x396C8C005555E1568C00AAAB0000AAAB)
H2 = mpz(
    0x5D543A95414E7F1091D50792876A202CD91DE4547085ABAA68A205B2E5A7DDFA628F1CB4D9E82EF21537E293A6691AE1616EC6E786F0C70CF1C38E31C7238E5
)

assert P % 4 == 3 and P % 6 == 1
assert (P**4 - P**2 + 1) % R == 0

_ZERO = mpz(0)
_ONE = mpz(1)

FP2_ZERO = (_ZERO, _ZERO)
FP2_ONE = (_ONE, _ZERO)
FP6_ZERO = (FP2_ZERO, FP2_ZERO, FP2_ZERO)
FP6_ONE = (FP2_ONE, FP2_ZERO, FP2_ZERO)
FP12_ONE = (FP6_ONE, FP6_ZERO)

#: the Fp6 non-residue xi = 1 + u
XI = (_ONE, _ONE)


# ---------------------------------------------------------------------------
# Fp2

def fp2_add(a, b):
    return ((a[0] + b[0]) % P, (a[1] + b[1]) % P)


def fp2_sub(a, b):
    return ((a[0] - b[0]) % P, (a[1] - b[1]) % P)


def fp2_neg(a):
    return (-a[0] % P, -a[1] % P)


def fp2_conj(a):
    return (a[0], -a[1] % P)


def fp2_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    t0 = a0 * b0
    t1 = a1 * b1
    # Karatsuba: cross term from (a0+a1)(b0+b1)
    return ((t0 - t1) % P, ((a0 + a1) * (b0 + b1) - t0 - t1) % P)


def fp2_sqr(a):
    a0, a1 = a
    return (((a0 + a1) * (a0 - a1)) % P, (2 * a0 * a1) % P)


def fp2_scale(a, k):
    return ((a[0] * k) % P, (a[1] * k) % P)


def fp2_mul_xi(a):
    # (a0 + a1 u)(1 + u) = (a0 - a1) + (a0 + a1) u
    a0, a1 = a
    return ((a0 - a1) % P, (a0 + a1) % P)


def fp2_inv(a):
    a0, a1 = a
    d = gmpy2.invert(a0 * a0 + a1 * a1, P)
    return ((a0 * d) % P, (-a1 * d) % P)


def fp2_pow(a, e):
    result = FP2_ONE
    base = a
    e = int(e)
    while e:
        if e & 1:
            result = fp2_mul(result, base)
        base = fp2_sqr(base)
        e >>= 1
    return result


def fp2_is_square(a):
    # a is square in Fp2 iff its norm a0^2 + a1^2 is a square in Fp
    n = (a[0] * a[0] + a[1] * a[1]) % P
    return gmpy2.legendre(n, P) >= 0


def fp2_sqrt(a):
    """Square root for p = 3 mod 4; raises ValueError when none exists."""
    if a == FP2_ZERO:
        return FP2_ZERO
    a1 = fp2_pow(a, (P - 3) // 4)
    x0 = fp2_mul(a1, a)
    alpha = fp2_mul(a1, x0)
    if alpha == (P - 1, _ZERO):
        cand = (-x0[1] % P, x0[0])  # u * x0
    else:
        b = fp2_pow(fp2_add(FP2_ONE, alpha), (P - 1) // 2)
        cand = fp2_mul(b, x0)
    if fp2_sqr(cand) != a:
        raise ValueError("not a square in Fp2")
    return cand


# ---------------------------------------------------------------------------
# Fp6

def fp6_add(a, b):
    return (fp2_add(a[0], b[0]), fp2_add(a[1], b[1]), fp2_add(a[2], b[2]))


def fp6_sub(a, b):
    return (fp2_sub(a[0], b[0]), fp2_sub(a[1], b[1]), fp2_sub(a[2], b[2]))


def fp6_neg(a):
    return (fp2_neg(a[0]), fp2_neg(a[1]), fp2_neg(a[2]))


def fp6_mul(a, b):
    a0, a1, a2 = a
    b0, b1, b2 = b
    v0 = fp2_mul(a0, b0)
    v1 = fp2_mul(a1, b1)
    v2 = fp2_mul(a2, b2)
    t = fp2_mul(fp2_add(a1, a2), fp2_add(b1, b2))
    c0 = fp2_add(v0, fp2_mul_xi(fp2_sub(fp2_sub(t, v1), v2)))
    t = fp2_mul(fp2_add(a0, a1), fp2_add(b0, b1))
    c1 = fp2_add(fp2_sub(fp2_sub(t, v0), v1), fp2_mul_xi(v2))
    t = fp2_mul(fp2_add(a0, a2), fp2_add(b0, b2))
    c2 = fp2_add(fp2_sub(fp2_sub(t, v0), v2), v1)
    return (c0, c1, c2)


def fp6_sqr(a):
    a0, a1, a2 = a
    s0 = fp2_sqr(a0)
    s1 = fp2_sqr(a1)
    s2 = fp2_sqr(a2)
    t01 = fp2_mul(a0, a1)
    t12 = fp2_mul(a1, a2)
    t02 = fp2_mul(a0, a2)
    c0 = fp2_add(s0, fp2_mul_xi(fp2_add(t12, t12)))
    c1 = fp2_add(fp2_add(t01, t01), fp2_mul_xi(s2))
    c2 = fp2_add(fp2_add(t02, t02), s1)
    return (c0, c1, c2)


def fp6_mul_by_v(a):
    # (a0 + a1 v + a2 v^2) * v = xi a2 + a0 v + a1 v^2
    return (fp2_mul_xi(a[2]), a[0], a[1])


def fp6_scale(a, k):
    return (fp2_mul(a[0], k), fp2_mul(a[1], k), fp2_mul(a[2], k))


def fp6_inv(a):
    a0, a1, a2 = a
    c0 = fp2_sub(fp2_sqr(a0), fp2_mul_xi(fp2_mul(a1, a2)))
    c1 = fp2_sub(fp2_mul_xi(fp2_sqr(a2)), fp2_mul(a0, a1))
    c2 = fp2_sub(fp2_sqr(a1), fp2_mul(a0, a2))
    t = fp2_add(
        fp2_mul(a0, c0),
        fp2_mul_xi(fp2_add(fp2_mul(a2, c1), fp2_mul(a1, c2))),
    )
    ti = fp2_inv(t)
    return (fp2_mul(c0, ti), fp2_mul(c1, ti), fp2_mul(c2, ti))


# ---------------------------------------------------------------------------
# Fp12

def fp12_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    v0 = fp6_mul(a0, b0)
    v1 = fp6_mul(a1, b1)
    c0 = fp6_add(v0, fp6_mul_by_v(v1))
    t = fp6_mul(fp6_add(a0, a1), fp6_add(b0, b1))
    c1 = fp6_sub(fp6_sub(t, v0), v1)
    return (c0, c1)


def fp12_sqr(a):
    a0, a1 = a
    t = fp6_mul(a0, a1)
    c0 = fp6_sub(
        fp6_sub(fp6_mul(fp6_add(a0, a1), fp6_add(a0, fp6_mul_by_v(a1))), t),
        fp6_mul_by_v(t),
    )
    c1 = fp6_add(t, t)
    return (c0, c1)


def fp12_conj(a):
    return (a[0], fp6_neg(a[1]))


def fp12_inv(a):
    a0, a1 = a
    t = fp6_inv(fp6_sub(fp6_sqr(a0), fp6_mul_by_v(fp6_sqr(a1))))
    return (fp6_mul(a0, t), fp6_neg(fp6_mul(a1, t)))


# Frobenius constants: gamma[k] = xi^(k (p-1) / 6).  Computed rather than
# transcribed; the exponentiations run once at import.
_GAMMA = tuple(fp2_pow(XI, k * (P - 1) // 6) for k in range(6))


def fp12_frobenius(a):
    (e0, e1, e2), (d0, d1, d2) = a
    return (
        (
            fp2_conj(e0),
            fp2_mul(fp2_conj(e1), _GAMMA[2]),
            fp2_mul(fp2_conj(e2), _GAMMA[4]),
        ),
        (
            fp2_mul(fp2_conj(d0), _GAMMA[1]),
            fp2_mul(fp2_conj(d1), _GAMMA[3]),
            fp2_mul(fp2_conj(d2), _GAMMA[5]),
        ),
    )


def fp12_frobenius2(a):
    return fp12_frobenius(fp12_frobenius(a))


def fp12_pow(a, e):
    e = int(e)
    if e < 0:
        a = fp12_inv(a)
        e = -e
    result = FP12_ONE
    base = a
    while e:
        if e & 1:
            result = fp12_mul(result, base)
        base = fp12_sqr(base)
        e >>= 1
    return result


# ---------------------------------------------------------------------------
# cyclotomic subgroup helpers
#
# After the easy part of the final exponentiation every GT element satisfies
# f^(p^4 - p^2 + 1) = 1, which makes conjugation the inverse and enables the
# Granger-Scott squaring below.  The element is viewed over
# Fp4 = Fp2[s]/(s^2 - xi) as A0 + A1 w + A2 w^2 with w^3 = s.

def _fp4_sqr(a, b):
    t0 = fp2_sqr(a)
    t1 = fp2_sqr(b)
    return (
        fp2_add(t0, fp2_mul_xi(t1)),
        fp2_sub(fp2_sub(fp2_sqr(fp2_add(a, b)), t0), t1),
    )


def fp12_cyc_sqr(f):
    (e0, e1, e2), (d0, d1, d2) = f
    t0a, t0b = _fp4_sqr(e0, d1)  # A0^2
    t1a, t1b = _fp4_sqr(d0, e2)  # A1^2
    t2a, t2b = _fp4_sqr(e1, d2)  # A2^2
    # B0 = 3 A0^2 - 2 conj(A0); B1 = 3 s A2^2 + 2 conj(A1); B2 = 3 A1^2 - 2 conj(A2)
    e0n = (3 * t0a[0] - 2 * e0[0], 3 * t0a[1] - 2 * e0[1])
    d1n = (3 * t0b[0] + 2 * d1[0], 3 * t0b[1] + 2 * d1[1])
    sb = fp2_mul_xi(t2b)
    d0n = (3 * sb[0] + 2 * d0[0], 3 * sb[1] + 2 * d0[1])
    e2n = (3 * t2a[0] - 2 * e2[0], 3 * t2a[1] - 2 * e2[1])
    e1n = (3 * t1a[0] - 2 * e1[0], 3 * t1a[1] - 2 * e1[1])
    d2n = (3 * t1b[0] + 2 * d2[0], 3 * t1b[1] + 2 * d2[1])
    red = lambda c: (c[0] % P, c[1] % P)
    return (
        (red(e0n), red(e1n), red(e2n)),
        (red(d0n), red(d1n), red(d2n)),
    )


def fp12_cyc_pow(f, e):
    """Exponentiation using cyclotomic squaring; f must be cyclotomic.

    Negative exponents use conjugation, valid only in the cyclotomic subgroup.
    """
    e = int(e)
    if e == 0:
        return FP12_ONE
    if e < 0:
        f = fp12_conj(f)
        e = -e
    # 4-bit fixed window
    table = [FP12_ONE, f]
    for _ in range(14):
        table.append(fp12_mul(table[-1], f))
    nibbles = []
    while e:
        nibbles.append(e & 15)
        e >>= 4
    result = table[nibbles[-1]]
    for nib in reversed(nibbles[:-1]):
        result = fp12_cyc_sqr(result)
        result = fp12_cyc_sqr(result)
        result = fp12_cyc_sqr(result)
        result = fp12_cyc_sqr(result)
        if nib:
            result = fp12_mul(result, table[nib])
    return result


def fp12_is_cyclotomic(f):
    lhs = fp12_mul(fp12_frobenius2(fp12_frobenius2(f)), f)
    return lhs == fp12_frobenius2(f)


# sanity: Granger-Scott squaring must agree with plain squaring on a
# cyclotomic element; checked once on a cheap sample at import
def _cyc_selfcheck():
    f = ((FP2_ONE, (mpz(2), mpz(3)), (mpz(5), mpz(7))), ((mpz(11), mpz(1)), FP2_ONE, (mpz(9), mpz(4))))
    easy = fp12_mul(fp12_conj(f), fp12_inv(f))
    easy = fp12_mul(fp12_frobenius2(easy), easy)
    assert fp12_is_cyclotomic(easy)
    assert fp12_cyc_sqr(easy) == fp12_sqr(easy)


_cyc_selfcheck()

"""Access-policy language and its linear secret-sharing compilation.

Grammar (case-insensitive keywords, case-sensitive names)::

    policy  ::= orexpr
    orexpr  ::= andexpr ('or' andexpr)*
    andexpr ::= primary ('and' primary)*
    primary ::= '(' orexpr ')' | NAME '@' qualifier
    qualifier ::= DIGITS '+' | NAME

``Attr@Auth`` requires a credential for ``Attr`` issued by that authority;
``Attr@n+`` requires credentials for ``Attr`` from at least ``n`` distinct
authorities.  ``and`` binds tighter than ``or``; both associate left.

Compilation expands every ``n+`` qualifier into a threshold gate over the
ordered authority list, then builds a share-generating matrix by gate
insertion: an AND extends the parent vector with a fresh column (child rows
``v||1`` and ``0||-1``), an OR copies the parent vector to both children, and
a t-of-k threshold appends ``t-1`` fresh columns carrying powers ``i, i^2,
..., i^(t-1)`` for child ``i``.  Recombining any authorized row subset yields
the parent vector exactly, so gates nest.  The target vector is
``(1, 0, ..., 0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import gmpy2

from .errors import MalformedError, PolicySyntaxError
from .groups import ORDER

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class AtLeast:
    n: int


@dataclass(frozen=True)
class AuthRef:
    name: str


@dataclass(frozen=True)
class PolicyLit:
    attr: str
    qual: Union[AtLeast, AuthRef]
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PolicyAnd:
    left: "PolicyNode"
    right: "PolicyNode"


@dataclass(frozen=True)
class PolicyOr:
    left: "PolicyNode"
    right: "PolicyNode"


PolicyNode = Union[PolicyLit, PolicyAnd, PolicyOr]

# ---------------------------------------------------------------------------
# lexer / parser


_KEYWORDS = {"and", "or"}


def _tokenize(text: str):
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()@+":
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isalnum():
            j = i
            while j < n and text[j].isalnum():
                j += 1
            word = text[i:j]
            if word.lower() in _KEYWORDS:
                tokens.append((word.lower(), word, i))
            else:
                tokens.append(("NAME", word, i))
            i = j
            continue
        raise PolicySyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            raise PolicySyntaxError(f"expected {kind!r}, found {tok[1] or 'end of input'!r}", tok[2])
        return self.advance()

    def parse(self) -> PolicyNode:
        node = self.parse_or()
        tok = self.peek()
        if tok[0] != "EOF":
            raise PolicySyntaxError(f"unexpected trailing {tok[1]!r}", tok[2])
        return node

    def parse_or(self) -> PolicyNode:
        node = self.parse_and()
        while self.peek()[0] == "or":
            self.advance()
            node = PolicyOr(node, self.parse_and())
        return node

    def parse_and(self) -> PolicyNode:
        node = self.parse_primary()
        while self.peek()[0] == "and":
            self.advance()
            node = PolicyAnd(node, self.parse_primary())
        return node

    def parse_primary(self) -> PolicyNode:
        tok = self.peek()
        if tok[0] == "(":
            self.advance()
            node = self.parse_or()
            self.expect(")")
            return node
        if tok[0] != "NAME":
            raise PolicySyntaxError(
                f"expected attribute or '(', found {tok[1] or 'end of input'!r}", tok[2]
            )
        name_tok = self.advance()
        self.expect("@")
        qual_tok = self.peek()
        if qual_tok[0] != "NAME":
            raise PolicySyntaxError("expected authority name or threshold after '@'", qual_tok[2])
        self.advance()
        if qual_tok[1].isdigit() and self.peek()[0] == "+":
            self.advance()
            count = int(qual_tok[1])
            if count < 1:
                raise PolicySyntaxError("threshold must be at least 1", qual_tok[2])
            return PolicyLit(name_tok[1], AtLeast(count), name_tok[2])
        return PolicyLit(name_tok[1], AuthRef(qual_tok[1]), name_tok[2])


def parse_policy(text: str) -> PolicyNode:
    if not isinstance(text, str) or not text.strip():
        raise PolicySyntaxError("empty policy", 0)
    return _Parser(text).parse()


def policy_to_text(node: PolicyNode) -> str:
    """Canonical text; reparsing yields an equal AST."""

    def prec(n):
        if isinstance(n, PolicyOr):
            return 1
        if isinstance(n, PolicyAnd):
            return 2
        return 3

    def render(n, parent_prec, right_side):
        p = prec(n)
        if isinstance(n, PolicyLit):
            if isinstance(n.qual, AtLeast):
                s = f"{n.attr}@{n.qual.n}+"
            else:
                s = f"{n.attr}@{n.qual.name}"
        else:
            op = "or" if isinstance(n, PolicyOr) else "and"
            s = f"{render(n.left, p, False)} {op} {render(n.right, p, True)}"
        if p < parent_prec or (p == parent_prec and right_side and not isinstance(n, PolicyLit)):
            return f"({s})"
        return s

    return render(node, 0, False)


def normalize_policy_text(text: str) -> str:
    return policy_to_text(parse_policy(text))


# ---------------------------------------------------------------------------
# expansion to concrete (attribute, authority) literals


@dataclass(frozen=True)
class FLit:
    attr: str
    auth: str


@dataclass(frozen=True)
class FGate:
    kind: str  # "and" | "or" | "thresh"
    threshold: int
    children: tuple


def expand(node: PolicyNode, authorities) -> Union[FLit, FGate]:
    """Rewrite ``@n+`` literals as thresholds over the ordered authority list."""
    authorities = list(authorities)
    auth_set = set(authorities)

    def walk(n):
        if isinstance(n, PolicyLit):
            if isinstance(n.qual, AuthRef):
                if n.qual.name not in auth_set:
                    raise MalformedError(
                        f"policy names unknown authority {n.qual.name!r}", position=n.pos
                    )
                return FLit(n.attr, n.qual.name)
            count = n.qual.n
            if count > len(authorities):
                raise MalformedError(
                    f"threshold {count}+ exceeds the {len(authorities)} available authorities",
                    position=n.pos,
                )
            children = tuple(FLit(n.attr, a) for a in authorities)
            return FGate("thresh", count, children)
        if isinstance(n, PolicyAnd):
            return FGate("and", 2, (walk(n.left), walk(n.right)))
        return FGate("or", 1, (walk(n.left), walk(n.right)))

    return walk(node)


def evaluate(node: PolicyNode, owned, authorities) -> bool:
    """Boolean truth of the policy for a set of (attr, authority) literals.

    Decided directly on the AST, independently of the matrix compiler.
    """
    authorities = list(authorities)
    auth_set = set(authorities)
    owned = set(owned)

    def walk(n):
        if isinstance(n, PolicyLit):
            if isinstance(n.qual, AuthRef):
                if n.qual.name not in auth_set:
                    raise MalformedError(
                        f"policy names unknown authority {n.qual.name!r}", position=n.pos
                    )
                return (n.attr, n.qual.name) in owned
            if n.qual.n > len(authorities):
                raise MalformedError(
                    f"threshold {n.qual.n}+ exceeds the {len(authorities)} available authorities",
                    position=n.pos,
                )
            held = sum(1 for a in authorities if (n.attr, a) in owned)
            return held >= n.qual.n
        if isinstance(n, PolicyAnd):
            return walk(n.left) and walk(n.right)
        return walk(n.left) or walk(n.right)

    return walk(node)


# ---------------------------------------------------------------------------
# LSSS compilation


@dataclass(frozen=True)
class AccessStructure:
    """Share-generating matrix with one labelled row per concrete literal."""

    matrix: tuple  # tuple of row tuples, entries reduced mod the group order
    row_labels: tuple  # tuple of (attr, authority)
    width: int
    policy_text: str

    def rows_for(self, owned):
        owned = set(owned)
        return [i for i, lab in enumerate(self.row_labels) if lab in owned]


def compile_lsss(node: PolicyNode, authorities) -> AccessStructure:
    formula = expand(node, authorities)
    rows = []
    width = 1

    def walk(n, vec):
        nonlocal width
        if isinstance(n, FLit):
            rows.append((vec, (n.attr, n.auth)))
            return
        if n.kind == "or":
            for child in n.children:
                walk(child, vec)
            return
        if n.kind == "and":
            padded = vec + [0] * (width - len(vec))
            left_vec = padded + [1]
            right_vec = [0] * width + [-1]
            width += 1
            walk(n.children[0], left_vec)
            walk(n.children[1], right_vec)
            return
        # threshold gate: fresh polynomial coefficients for t-1 columns,
        # child i evaluates the polynomial at point i
        t = n.threshold
        padded = vec + [0] * (width - len(vec))
        width += t - 1
        for i, child in enumerate(n.children, start=1):
            point_powers = [pow(i, j) for j in range(1, t)]
            walk(child, padded + point_powers)

    walk(formula, [1])
    matrix = tuple(
        tuple(v % ORDER for v in vec) + (0,) * (width - len(vec)) for vec, _ in rows
    )
    labels = tuple(label for _, label in rows)
    return AccessStructure(matrix, labels, width, policy_to_text(node))


def compile_policy_text(text: str, authorities) -> AccessStructure:
    return compile_lsss(parse_policy(text), authorities)


def lsss_reconstruct(structure: AccessStructure, owned) -> Optional[dict]:
    """Coefficients c with sum(c_i * row_i) == (1, 0, ..., 0) mod order.

    ``owned`` is a set of (attr, authority) literals.  Returns a map from row
    index to nonzero coefficient, or None when the rows cannot reach the
    target (the literal set does not satisfy the policy).
    """
    idxs = structure.rows_for(owned)
    if not idxs:
        return None
    m = len(idxs)
    w = structure.width
    # solve A^T c = e1: one equation per matrix column
    aug = [[structure.matrix[i][col] for i in idxs] + [1 if col == 0 else 0] for col in range(w)]
    pivot_of_col = [-1] * m
    row = 0
    for var in range(m):
        sel = next((rr for rr in range(row, w) if aug[rr][var] != 0), None)
        if sel is None:
            continue
        aug[row], aug[sel] = aug[sel], aug[row]
        inv = int(gmpy2.invert(aug[row][var], ORDER))
        aug[row] = [(val * inv) % ORDER for val in aug[row]]
        for rr in range(w):
            if rr != row and aug[rr][var]:
                factor = aug[rr][var]
                aug[rr] = [(a - factor * b) % ORDER for a, b in zip(aug[rr], aug[row])]
        pivot_of_col[var] = row
        row += 1
    # inconsistent system: a zero row with nonzero rhs
    for rr in range(row, w):
        if aug[rr][m] != 0:
            return None
    coeffs = {}
    for var in range(m):
        if pivot_of_col[var] >= 0:
            val = aug[pivot_of_col[var]][m]
            if val:
                coeffs[idxs[var]] = val
    return coeffs

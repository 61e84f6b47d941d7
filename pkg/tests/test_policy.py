import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import AUTHS, random_policy_text
from martsia.errors import MalformedError, PolicySyntaxError
from martsia.groups import ORDER
from martsia.policy import (
    AtLeast,
    AuthRef,
    PolicyAnd,
    PolicyLit,
    PolicyOr,
    compile_lsss,
    compile_policy_text,
    evaluate,
    lsss_reconstruct,
    normalize_policy_text,
    parse_policy,
    policy_to_text,
)

SUPPLY_CHAIN_POLICIES = [
    "43175279@2+ and (Manufacturer@1+ or (Supplier@1+ and International@1+))",
    "Customs@A or (43175279@2+ and ((Supplier@1+ and International@1+)"
    " or Manufacturer@1+ or (Carrier@1+ and International@1+)))",
    "Customs@A or (43175279@2+ and (Manufacturer@1+ or (Supplier@1+ and International@1+)))",
    "Customs@A or (43175279@2+ and Manufacturer@1+)",
    "Customs@A or (43175279@2+ and (Manufacturer@1+ or Supplier@1+ or Carrier@1+))",
    # variant phrasing of the clearance rule with a certifier-count threshold
    "Customs@3+ or (43175279@2+ and ((Supplier@1+ and International@1+)"
    " or Manufacturer@1+ or (Carrier@1+ and International@1+)))",
]


def all_subsets(labels):
    labels = sorted(set(labels))
    for mask in range(1 << len(labels)):
        yield {labels[i] for i in range(len(labels)) if mask >> i & 1}


def test_parse_literal_forms():
    node = parse_policy("Manufacturer@A")
    assert isinstance(node, PolicyLit)
    assert node.attr == "Manufacturer"
    assert node.qual == AuthRef("A")

    node = parse_policy("43175279@2+")
    assert node.attr == "43175279"
    assert node.qual == AtLeast(2)


def test_parse_precedence_and_associativity():
    # and binds tighter than or
    node = parse_policy("a@A or b@B and c@C")
    assert isinstance(node, PolicyOr)
    assert isinstance(node.right, PolicyAnd)
    # explicit parens win
    node = parse_policy("(a@A or b@B) and c@C")
    assert isinstance(node, PolicyAnd)
    assert isinstance(node.left, PolicyOr)


def test_parse_error_positions():
    with pytest.raises(PolicySyntaxError) as err:
        parse_policy("a@A and")
    assert err.value.position == 7
    with pytest.raises(PolicySyntaxError) as err:
        parse_policy("(a@A or b@B")
    assert err.value.position == 11
    with pytest.raises(PolicySyntaxError) as err:
        parse_policy("a@0+")
    assert err.value.position >= 0
    with pytest.raises(PolicySyntaxError):
        parse_policy("")
    with pytest.raises(PolicySyntaxError):
        parse_policy("a @@ A")


def test_canonical_text_round_trips_corpus():
    for text in SUPPLY_CHAIN_POLICIES:
        ast = parse_policy(text)
        canonical = policy_to_text(ast)
        assert parse_policy(canonical) == ast
        # canonicalization is a fixed point
        assert normalize_policy_text(canonical) == canonical


def test_normalization_merges_textual_variants():
    a = normalize_policy_text("a@A and (b@B)")
    b = normalize_policy_text("((a@A) and b@B)")
    assert a == b


def test_evaluate_concrete_and_threshold():
    ast = parse_policy("43175279@2+ and (Manufacturer@1+ or (Supplier@1+ and International@1+))")
    own = {("43175279", "A"), ("43175279", "B"), ("Manufacturer", "C")}
    assert evaluate(ast, own, AUTHS)
    # only one authority vouches for the case attribute: threshold unmet
    own = {("43175279", "A"), ("Manufacturer", "C")}
    assert not evaluate(ast, own, AUTHS)
    # supplier branch needs both conjuncts
    own = {("43175279", "A"), ("43175279", "C"), ("Supplier", "B")}
    assert not evaluate(ast, own, AUTHS)
    own = {("43175279", "A"), ("43175279", "C"), ("Supplier", "B"), ("International", "A")}
    assert evaluate(ast, own, AUTHS)


def test_evaluate_rejects_unknown_authority_and_oversize_threshold():
    with pytest.raises(MalformedError):
        evaluate(parse_policy("a@Z"), set(), AUTHS)
    with pytest.raises(MalformedError):
        evaluate(parse_policy("a@4+"), set(), AUTHS)
    with pytest.raises(MalformedError):
        compile_policy_text("a@4+", AUTHS)
    with pytest.raises(MalformedError):
        compile_policy_text("a@Z", AUTHS)


def test_compile_shapes():
    s = compile_policy_text("a@A", AUTHS)
    assert len(s.matrix) == 1 and s.width == 1
    assert s.matrix[0][0] == 1
    assert s.row_labels == (("a", "A"),)

    s = compile_policy_text("a@A and b@B", AUTHS)
    assert len(s.matrix) == 2 and s.width == 2

    s = compile_policy_text("a@A or b@B", AUTHS)
    assert len(s.matrix) == 2 and s.width == 1

    # a 2-of-3 threshold compiles to one row per authority and one new column
    s = compile_policy_text("a@2+", AUTHS)
    assert len(s.matrix) == 3 and s.width == 2
    assert s.row_labels == (("a", "A"), ("a", "B"), ("a", "C"))


def test_reconstruction_coefficients_hit_target():
    for text in SUPPLY_CHAIN_POLICIES:
        ast = parse_policy(text)
        s = compile_lsss(ast, AUTHS)
        labels = set(s.row_labels)
        coeffs = lsss_reconstruct(s, labels)
        assert coeffs is not None
        combo = [0] * s.width
        for idx, c in coeffs.items():
            for col in range(s.width):
                combo[col] = (combo[col] + c * s.matrix[idx][col]) % ORDER
        assert combo[0] == 1
        assert all(v == 0 for v in combo[1:])


def test_reconstruction_matches_evaluator_on_corpus():
    for text in SUPPLY_CHAIN_POLICIES:
        ast = parse_policy(text)
        s = compile_lsss(ast, AUTHS)
        for owned in all_subsets(s.row_labels):
            want = evaluate(ast, owned, AUTHS)
            got = lsss_reconstruct(s, owned) is not None
            assert want == got, (text, sorted(owned))


def test_reconstruction_matches_evaluator_randomized():
    rng = random.Random(2026)
    done = 0
    while done < 60:
        text = random_policy_text(rng, max_leaves=4)
        ast = parse_policy(text)
        s = compile_lsss(ast, AUTHS)
        labels = sorted(set(s.row_labels))
        if len(labels) > 8:
            continue
        done += 1
        for owned in all_subsets(labels):
            want = evaluate(ast, owned, AUTHS)
            coeffs = lsss_reconstruct(s, owned)
            assert want == (coeffs is not None), (text, sorted(owned))
            if coeffs is None:
                continue
            combo = [0] * s.width
            for idx, c in coeffs.items():
                for col in range(s.width):
                    combo[col] = (combo[col] + c * s.matrix[idx][col]) % ORDER
            assert combo == [1] + [0] * (s.width - 1)


def test_irrelevant_literals_never_flip_the_answer():
    ast = parse_policy("a@A and b@2+")
    s = compile_lsss(ast, AUTHS)
    base = {("a", "A"), ("b", "B"), ("b", "C")}
    assert lsss_reconstruct(s, base) is not None
    noisy = base | {("zz", "A"), ("Customs", "B")}
    assert lsss_reconstruct(s, noisy) is not None
    short = {("a", "A"), ("b", "B")}
    assert lsss_reconstruct(s, short) is None
    assert lsss_reconstruct(s, short | {("zz", "C")}) is None


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_random_policies_parse_and_canonicalize(seed):
    rng = random.Random(seed)
    text = random_policy_text(rng)
    ast = parse_policy(text)
    canonical = policy_to_text(ast)
    assert parse_policy(canonical) == ast


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**9), st.integers(min_value=0, max_value=128))
def test_monotonicity_adding_literals_never_revokes(seed, mask):
    rng = random.Random(seed)
    ast = parse_policy(random_policy_text(rng, max_leaves=3))
    s = compile_lsss(ast, AUTHS)
    labels = sorted(set(s.row_labels))
    owned = {labels[i] for i in range(len(labels)) if mask >> i & 1}
    if evaluate(ast, owned, AUTHS):
        assert evaluate(ast, set(labels), AUTHS)
        extra = owned | {("unrelated", "A")}
        assert evaluate(ast, extra, AUTHS)

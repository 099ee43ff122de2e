import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwcard.errors import NonSubgroupElement, SuiteMismatch
from pwcard.group import (
    MERSENNE_61,
    DebugGroup,
    GroupElement,
    HashRole,
    TargetElement,
    hmac_tag,
    role_hash,
    unwrap_key,
    wrap_key,
)

SMALL = DebugGroup(q=11)
BIG = DebugGroup()
scalars = st.integers(min_value=0, max_value=MERSENNE_61 - 1)


def test_exp_of_generator():
    assert SMALL.exp(SMALL.generator, 5) == SMALL.element(5)


def test_exp_by_zero_is_identity():
    assert SMALL.exp(SMALL.element(7), 0) == SMALL.identity


def test_exp_hand_value():
    # 3 * 7 = 21 = 10 mod 11
    assert SMALL.exp(SMALL.element(3), 7).exponent == 10


def test_mul_hand_value_and_identity():
    assert SMALL.mul(SMALL.element(4), SMALL.element(9)).exponent == 2
    x = SMALL.element(6)
    assert SMALL.mul(SMALL.identity, x) == x


@given(scalars, scalars)
def test_mul_commutes(a, b):
    x, y = BIG.element(a), BIG.element(b)
    assert BIG.mul(x, y) == BIG.mul(y, x)


def test_scalar_inverse_hand_values():
    assert SMALL.scalar_inverse(1) == 1
    assert SMALL.scalar_inverse(3) == 4
    with pytest.raises(ValueError):
        SMALL.scalar_inverse(0)


def test_scalar_inverse_thousand_draws():
    rng = random.Random(11)
    for _ in range(1000):
        k = rng.randrange(1, MERSENNE_61)
        assert k * BIG.scalar_inverse(k) % MERSENNE_61 == 1


def test_pairing_hand_values():
    assert SMALL.pair(SMALL.element(4), SMALL.element(9)).exponent == 3
    assert SMALL.pair(SMALL.identity, SMALL.element(5)) == SMALL.target_identity
    g = BIG.subgroup_generator
    assert BIG.pair(BIG.exp(g, 2), BIG.exp(g, 3)) == BIG.target_exp(BIG.pair(g, g), 6)


def test_pairing_with_cofactor_uses_reduced_exponents():
    g = DebugGroup(q=11, t=3)
    # g^(3*2) and g^(3*5) pair to exponent 10
    assert g.pair(g.element(6), g.element(15)).exponent == 10
    with pytest.raises(NonSubgroupElement):
        g.pair(g.element(4), g.element(3))


@settings(max_examples=200)
@given(scalars, scalars, st.integers(1, MERSENNE_61 - 1), st.integers(1, MERSENNE_61 - 1))
def test_bilinearity(a, b, ex, ey):
    x, y = BIG.element(ex), BIG.element(ey)
    assert BIG.pair(BIG.exp(x, a), BIG.exp(y, b)) == BIG.target_exp(BIG.pair(x, y), a * b)


def test_subgroup_membership_hand_values():
    g = DebugGroup(q=11, t=3)
    assert g.is_in_subgroup(g.identity)
    assert g.is_in_subgroup(g.element(3))
    assert not g.is_in_subgroup(g.element(4))


def test_check_element_rejects_identity_and_low_order():
    g = DebugGroup(q=11, t=3)
    with pytest.raises(NonSubgroupElement):
        g.check_element(g.identity)
    with pytest.raises(NonSubgroupElement):
        g.check_element(g.element(11))
    assert g.check_element(g.element(3)) == g.element(3)


def test_hash_to_group_properties():
    a = BIG.hash_to_group(HashRole.H2G, b"alice")
    assert a == BIG.hash_to_group(HashRole.H2G, b"alice")
    assert a != BIG.hash_to_group(HashRole.H2G, b"bob")
    assert BIG.is_in_subgroup(a) and a != BIG.identity
    g3 = DebugGroup(t=3)
    assert g3.is_in_subgroup(g3.hash_to_group(HashRole.H2G, b"alice"))


def test_hash_roles_are_separated():
    assert role_hash(HashRole.H2S, b"x") != role_hash(HashRole.PI, b"x")
    with pytest.raises(ValueError):
        BIG.hash_to_scalar(HashRole.H2G, b"x")
    with pytest.raises(ValueError):
        BIG.hash_to_group(HashRole.PI, b"x")


def test_field_encoding_prevents_concatenation_collisions():
    assert role_hash(HashRole.KDF, b"ab", b"c") != role_hash(HashRole.KDF, b"a", b"bc")


def test_hash_to_scalar_nonzero_on_tiny_modulus():
    g = DebugGroup(q=2)
    rng = random.Random(5)
    values = {g.hash_to_scalar(HashRole.H2S, rng.randbytes(8)) for _ in range(10_000)}
    assert values == {1}


def test_hash_to_scalar_nonzero_and_deterministic():
    rng = random.Random(1)
    for _ in range(10_000):
        m = rng.randbytes(12)
        v = SMALL.hash_to_scalar(HashRole.H2S, m)
        assert 0 < v < 11
    assert BIG.hash_to_scalar(HashRole.H2S, b"m") == BIG.hash_to_scalar(HashRole.H2S, b"m")


def test_pi_is_order_sensitive():
    from pwcard.pscab import pi
    rng = random.Random(2)
    for _ in range(50):
        ra, rb = BIG.element(rng.randrange(1, MERSENNE_61)), BIG.element(rng.randrange(1, MERSENNE_61))
        assert pi(BIG, ra, rb) != pi(BIG, rb, ra)


def test_hmac_tag():
    t1 = hmac_tag(b"k", b"message")
    assert len(t1) == 32
    assert t1 == hmac_tag(b"k", b"message")
    flipped = bytes([b"message"[0] ^ 1]) + b"message"[1:]
    assert hmac_tag(b"k", flipped) != t1


def test_wrap_round_trip_and_wrong_password():
    plain = bytes(range(32))
    wrapped = wrap_key("correct horse", plain)
    assert wrapped == wrap_key("correct horse", plain)
    assert unwrap_key("correct horse", wrapped) == plain
    other = unwrap_key("battery staple", wrapped)
    assert len(other) == 32 and other != plain


def test_unwrap_total_over_dictionary():
    wrapped = wrap_key("pw", bytes(32))
    outs = {unwrap_key(f"word{i}", wrapped) for i in range(1000)}
    assert len(outs) == 1000
    assert all(len(o) == 32 for o in outs)


def test_wrap_rejects_wrong_length():
    with pytest.raises(ValueError):
        wrap_key("pw", b"short")


@given(scalars)
def test_element_encoding_round_trip(e):
    x = BIG.element(e)
    assert BIG.decode_element(BIG.encode_element(x)) == x


@given(st.integers(0, MERSENNE_61 - 1))
def test_target_and_scalar_round_trip(e):
    t = TargetElement(BIG.suite_id, e)
    assert BIG.decode_target(BIG.encode_target(t)) == t
    assert BIG.decode_scalar(BIG.encode_scalar(e)) == e


def test_element_and_target_encodings_are_distinct():
    x = BIG.element(5)
    with pytest.raises(ValueError):
        BIG.decode_target(BIG.encode_element(x))


def test_decode_rejects_bad_input():
    with pytest.raises(ValueError):
        BIG.decode_element(b"\x01\x01\x00")
    with pytest.raises(ValueError):
        BIG.decode_element(bytes([1, 1]) + (MERSENNE_61).to_bytes(BIG.width, "big"))
    with pytest.raises(SuiteMismatch):
        BIG.decode_element(bytes([9, 1]) + bytes(BIG.width))


def test_suite_mismatch():
    other = DebugGroup(suite_id=2)
    with pytest.raises(SuiteMismatch):
        BIG.mul(BIG.generator, other.generator)
    with pytest.raises(SuiteMismatch):
        BIG.exp(GroupElement(7, 1), 2)


def test_config_validation():
    with pytest.raises(ValueError):
        DebugGroup(q=12)
    with pytest.raises(ValueError):
        DebugGroup(q=11, t=0)
    with pytest.raises(ValueError):
        DebugGroup(q=11, t=22)

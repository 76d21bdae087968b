import random
from fractions import Fraction

import pytest

from motint import polynomials as P
from motint.errors import NotInA, QOutOfRange
from motint.ring_a import (
    ARat, L, L_pow, ONE, ZERO, arat, from_int, from_rational,
    in_a, inv_one_minus_L_neg, is_nonneg, lax, parse_ratfunc, theta,
)


def test_canonical_form():
    a = lax((2, 2), (4,))           # (2L+2)/4 -> (L+1)/2
    assert a.numer == (1, 1) and a.denom == (2,)
    assert not in_a(a)              # content 2 in the denominator
    b = arat((-1, 0, 1), (-1, 1))   # (L^2-1)/(L-1) -> L+1
    assert b == arat((1, 1))
    # sign convention: denominator leading coefficient positive
    c = lax((1,), (0, -1))
    assert c.denom == (0, 1) and c.numer == (-1,)


def test_generator_identity():
    # 1/(1 - L^-1) - 1 = 1/(L - 1)
    a = inv_one_minus_L_neg(1) - ONE
    assert a == arat((1,), (-1, 1))
    assert theta(a, 2) == 1
    assert theta(a, 3) == Fraction(1, 2)


def test_membership():
    assert in_a(L_pow(-3))
    assert in_a(arat((1,), (0, 0, 1)))
    assert in_a(inv_one_minus_L_neg(4))
    assert in_a(arat((1,), (1, 1)))        # 1/(L+1) = (L-1)/(L^2-1) * L^0
    with pytest.raises(NotInA):
        arat((1,), (-2, 1))                # 1/(L-2)
    with pytest.raises(NotInA):
        arat((1,), (1, 2))                 # 1/(2L+1)
    with pytest.raises(NotInA):
        arat((1,), (2,))                   # 1/2
    # a bad factor hiding behind a good one
    with pytest.raises(NotInA):
        arat((1,), P.mul((-1, 1), (-2, 1)))


def test_division_strictness():
    a = (ONE / arat((-1, 1))) * arat((-1, 1))
    assert a == ONE
    with pytest.raises(NotInA):
        ONE / arat((-2, 1))
    with pytest.raises(ZeroDivisionError):
        ONE / ZERO


def test_pow():
    assert L ** 3 == arat((0, 0, 0, 1))
    assert L ** -2 == L_pow(-2)
    assert (L - ONE) ** 0 == ONE
    with pytest.raises(NotInA):
        (L - from_int(2)) ** -1


def test_theta_basics():
    assert theta(L, 2) == 2
    assert theta(L_pow(-2), 3) == Fraction(1, 9)
    assert theta(arat((0, 1), (1, 1)), 2) == Fraction(2, 3)   # L/(L+1)
    with pytest.raises(QOutOfRange):
        theta(L, 1)
    with pytest.raises(QOutOfRange):
        theta(L, Fraction(1, 2))


def _random_element(rng: random.Random) -> ARat:
    # assembled from ring generators so membership holds by construction
    num = tuple(rng.randint(-4, 4) for _ in range(rng.randint(1, 4)))
    if P.is_zero(P.trim(num)):
        num = (1,)
    a = arat(P.trim(num))
    a = a * L_pow(rng.randint(-3, 3))
    for _ in range(rng.randint(0, 2)):
        a = a * inv_one_minus_L_neg(rng.randint(1, 4))
    return a


def test_theta_is_a_homomorphism():
    rng = random.Random(20260818)
    qs = [Fraction(2), Fraction(3), Fraction(7, 2)]
    for _ in range(200):
        a, b = _random_element(rng), _random_element(rng)
        for q in qs:
            assert theta(a + b, q) == theta(a, q) + theta(b, q)
            assert theta(a * b, q) == theta(a, q) * theta(b, q)
            assert theta(-a, q) == -theta(a, q)


def test_equality_iff_enough_evaluations():
    # two canonical fractions agree iff they agree at
    # 1 + max(deg num + deg den) distinct points beyond 1
    rng = random.Random(7)
    for _ in range(50):
        a, b = _random_element(rng), _random_element(rng)
        n = 1 + max(
            P.degree(a.numer) + P.degree(a.denom),
            P.degree(b.numer) + P.degree(b.denom),
            0,
        )
        qs = [Fraction(2) + Fraction(k, 1) for k in range(n)]
        same_values = all(theta(a, q) == theta(b, q) for q in qs)
        assert same_values == (a == b)


NONNEG_CORPUS = [
    (ZERO, True),
    (ONE, True),
    (-ONE, False),
    (L, True),
    (arat((-1, 1)), True),                          # L - 1
    (arat((-2, 1)), False),                         # L - 2
    (lax(P.mul((-2, 1), (-2, 1)), (-1, 1)), True),  # (L-2)^2/(L-1)
    (arat((-1, 1), (0, 1)), True),                  # 1 - L^-1
    (arat((1,), (-1, 1)), True),                    # 1/(L-1)
    (arat((-1,), (-1, 1)), False),                  # -1/(L-1)
    (arat(P.mul((-1, 1), (-2, 1))), False),         # (L-1)(L-2)
    (lax((0, 0, 1), (-2, 1)), False),               # L^2/(L-2) flips at 2
    (lax(P.mul((-3, 1), (-3, 1)), (-2, 1)), False), # (L-3)^2/(L-2)
    (arat((1, -2, 1)), True),                       # (L-1)^2
    (arat((4, -4, 1)), True),                       # (L-2)^2
    (arat((-8, 12, -6, 1)), False),                 # (L-2)^3
    (arat((0, -2, 1)), False),                      # L(L-2)
    (arat((2, 1)), True),                           # L + 2
    (lax((1,), (2,)), True),                        # 1/2
    (lax((-1,), (2,)), False),                      # -1/2
    (arat((6, -5, 1)), False),                      # (L-2)(L-3)
    (arat((1,), (1, 1)), True),                     # 1/(L+1)
]


def test_is_nonneg_corpus():
    for a, expected in NONNEG_CORPUS:
        assert is_nonneg(a) == expected, f"is_nonneg({a})"


def test_is_nonneg_agrees_with_sampling():
    # sampling can only refute, never certify: any negative sample must
    # force a False verdict, and a True verdict must survive all samples
    rng = random.Random(99)
    qs = [Fraction(num, den) for num in range(2, 40) for den in (1, 3, 7) if Fraction(num, den) > 1]
    for _ in range(100):
        a = _random_element(rng) - _random_element(rng)
        refuted = any(theta(a, q) < 0 for q in qs)
        if is_nonneg(a):
            assert not refuted
        # a False verdict with no sampled refutation is legitimate
        # (the sign change may sit between or beyond the samples)


def test_parse_ratfunc():
    assert parse_ratfunc("L/(L - 1)") == arat((0, 1), (-1, 1))
    assert parse_ratfunc("(L^2 - 1)/(L - 1)") == arat((1, 1))
    assert parse_ratfunc("1 - L^-1") == arat((-1, 1), (0, 1))
    assert parse_ratfunc("L**2 * L**-2") == ONE
    assert parse_ratfunc("1/(L-2) * (L-2)") == ONE
    with pytest.raises(NotInA):
        parse_ratfunc("1/(L - 2)")
    assert parse_ratfunc("1/(L-2)", strict=False) == lax((1,), (-2, 1))


def test_str_and_json_round_trip():
    a = arat((0, 1), (-1, 1))
    assert str(a) == "L/(L - 1)"
    assert str(ZERO) == "0"
    assert str(from_int(-3)) == "-3"
    b = ARat.from_json(a.to_json())
    assert b == a


def test_from_rational():
    assert from_rational(Fraction(3, 4)) == lax((3,), (4,))
    assert from_rational(Fraction(-2)) == from_int(-2)

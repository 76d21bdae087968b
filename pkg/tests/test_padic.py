"""Galois rings, exact p-adic elements, counting, and level volumes."""

import random
from fractions import Fraction
from math import inf

import pytest

from motint.errors import CapExceeded, InsufficientPrecision, MotintError, SortError
from motint.formula import RES, VF, VG, parse_formula
from motint.padic import (
    GaloisRing, PadicElem, PContext, TruncatedElem, count_points,
    default_modulus, rational_ac, rational_ord, shell_volume, vol_level,
)


def test_default_moduli_small_cases():
    assert default_modulus(2, 1) == (0, 1)
    # x^2 + x + 1 is the first irreducible quadratic over F_2
    assert default_modulus(2, 2) == (1, 1, 1)
    # -1 is not a square mod 3, so x^2 + 1 works and nothing smaller does
    assert default_modulus(3, 2) == (1, 0, 1)
    # mod 5: -1 = 4 is a square, -2 = 3 is not
    assert default_modulus(5, 2) == (2, 0, 1)
    assert default_modulus(2, 3) == (1, 1, 0, 1)


def test_ring_size_and_arithmetic():
    ring = GaloisRing(3, 2, 2, default_modulus(3, 2))
    assert ring.size == 81
    w = ring.make((0, 1))
    # modulus x^2 + 1: w^2 = -1
    assert (w * w).coeffs == ((-1) % 9, 0)
    assert (w ** 4).coeffs == (1, 0)
    a = ring.make((5, 7))
    b = ring.make((8, 2))
    assert (a + b).coeffs == (4, 0)
    assert (a - b).coeffs == ((5 - 8) % 9, 5)
    assert (a * b - b * a).is_zero()


def test_f4_multiplication_table():
    ring = GaloisRing(2, 1, 2, default_modulus(2, 2))
    w = ring.make((0, 1))
    assert (w * w).coeffs == (1, 1)          # w^2 = w + 1
    assert (w ** 3).coeffs == (1, 0)         # multiplicative order 3
    units = [e for e in ring.elements() if not e.is_zero()]
    assert len(units) == 3


def test_enumeration_order_and_cap():
    ring = GaloisRing(2, 1, 2, default_modulus(2, 2))
    seq = [e.coeffs for e in ring.elements()]
    assert seq == [(0, 0), (0, 1), (1, 0), (1, 1)]
    big = GaloisRing(2, 10, 3, default_modulus(2, 3))
    with pytest.raises(CapExceeded) as ei:
        list(big.elements(cap=1000))
    assert ei.value.needed == 2 ** 30
    assert ei.value.cap == 1000


def test_mixing_rings_rejected():
    r1 = GaloisRing(2, 1, 1, default_modulus(2, 1))
    r2 = GaloisRing(2, 2, 1, default_modulus(2, 1))
    with pytest.raises(SortError):
        r1.one() + r2.one()


def test_rational_ord_and_ac():
    assert rational_ord(Fraction(12), 2) == 2
    assert rational_ord(Fraction(3, 4), 2) == -2
    assert rational_ord(Fraction(0), 2) == inf
    assert rational_ac(Fraction(12), 2, 1) == 1
    assert rational_ac(Fraction(12), 2, 2) == 3
    assert rational_ac(Fraction(3, 4), 2, 2) == 3
    assert rational_ac(Fraction(0), 2, 3) == 0


def test_exact_elem_ord_ac():
    x = PadicElem.from_rational(2, 1, Fraction(12))
    assert x.ord() == 2
    assert x.ac(1).coeffs == (1,)
    assert x.ac(2).coeffs == (3,)
    zero = PadicElem.from_rational(2, 1, Fraction(0))
    assert zero.ord() == inf
    assert zero.ac(2).is_zero()


def test_exact_elem_degree_two():
    # 3*w + 9 over Q_3 with w a Teichmueller-type generator: ord is the
    # minimum coordinate order
    x = PadicElem.exact(3, 2, (Fraction(9), Fraction(3)))
    assert x.ord() == 1
    assert x.ac(1).coeffs == (0, 1)
    assert x.ac(2).coeffs == (3, 1)
    w = PadicElem.exact(2, 2, (0, 1))
    sq = w * w
    # modulus x^2 + x + 1 gives w^2 = -w - 1
    assert sq.coeffs == (Fraction(-1), Fraction(-1))
    assert sq.ac(1).coeffs == (1, 1)


def test_truncated_elem():
    t = TruncatedElem.make(2, 1, 3, (4,))
    assert t.ord() == 2
    assert t.ac(1).coeffs == (1,)
    with pytest.raises(InsufficientPrecision):
        t.ac(2)
    z = TruncatedElem.make(2, 1, 3, (8,))
    with pytest.raises(InsufficientPrecision):
        z.ord()


def test_count_residue_square_zero():
    # x ranges over the depth-2 residue ring of Q_2, here Z/4
    f = parse_formula("x^2 = 0", defaults={"x": RES(2)})
    assert count_points(f, PContext(2, 1)) == 2
    # over Z/8 the solutions to x^2 = 0 are 0 and 4
    f3 = parse_formula("x^2 = 0", defaults={"x": RES(3)})
    assert count_points(f3, PContext(2, 1)) == 2


def test_count_with_vg_box_and_chunks():
    f = parse_formula("x^2 = 0 && 0 <= n && n <= 5", defaults={"x": RES(2), "n": VG})
    ctx = PContext(2, 1)
    base = count_points(f, ctx, boxes={"n": (-3, 10)})
    assert base == 2 * 6
    for chunks in (2, 3, 7):
        assert count_points(f, ctx, boxes={"n": (-3, 10)}, chunks=chunks) == base
    with pytest.raises(MotintError):
        count_points(f, ctx)


def test_count_cap():
    f = parse_formula("x = x", defaults={"x": RES(4)})
    with pytest.raises(CapExceeded):
        count_points(f, PContext(2, 1), cap=10)


def test_count_projection():
    f = parse_formula("proj_2_1(x) = 0", defaults={"x": RES(2)})
    assert count_points(f, PContext(2, 1)) == 2
    assert count_points(f, PContext(3, 1)) == 3


def test_count_quantified_squares():
    # number of squares in the residue field, counted through a quantifier
    f = parse_formula("exists y : res(1) . y * y = x", defaults={"x": RES(1)})
    assert count_points(f, PContext(3, 1)) == 2      # {0, 1} in F_3
    assert count_points(f, PContext(5, 1)) == 3      # {0, 1, 4} in F_5
    assert count_points(f, PContext(3, 2)) == 5      # F_9: 0 plus 4 nonzero squares


def test_modulus_independence():
    f = parse_formula("exists y : res(1) . y * y = x", defaults={"x": RES(1)})
    a = count_points(f, PContext(3, 2))
    b = count_points(f, PContext(3, 2, modulus=(2, 2, 1)))
    assert a == b == 5


def test_reducible_modulus_rejected():
    with pytest.raises(MotintError):
        PContext(3, 2, modulus=(0, 0, 1))


def test_vol_ord_equals_two():
    f = parse_formula("ord(x) = 2", default_sort=VF)
    assert vol_level(f, 3, PContext(2, 1)) == Fraction(1, 8)
    assert vol_level(f, 5, PContext(2, 1)) == Fraction(1, 8)
    assert vol_level(f, 3, PContext(3, 1)) == Fraction(2, 27)
    assert vol_level(f, 3, PContext(3, 2)) == Fraction(8, 729)


def test_vol_unit_product():
    f = parse_formula("ord(x * y) = 0", default_sort=VF)
    assert vol_level(f, 1, PContext(2, 1)) == Fraction(1, 4)
    assert vol_level(f, 2, PContext(2, 1)) == Fraction(1, 4)
    assert vol_level(f, 1, PContext(3, 1)) == Fraction(4, 9)


def test_vol_with_quantifier_and_ac():
    # units whose angular component is a square in the residue field
    f = parse_formula("ord(x) = 0 && (exists u : res(1) . u * u = ac_1(x))",
                      default_sort=VF)
    assert vol_level(f, 1, PContext(3, 1)) == Fraction(1, 3)
    assert vol_level(f, 2, PContext(3, 1)) == Fraction(1, 3)
    assert vol_level(f, 1, PContext(5, 1)) == Fraction(2, 5)


def test_shell_volume_known_values():
    ctx2 = PContext(2, 1)
    assert shell_volume(0, ctx2) == Fraction(1, 2)
    assert shell_volume(2, ctx2) == Fraction(1, 8)
    ctx32 = PContext(3, 2)
    assert shell_volume(0, ctx32) == Fraction(8, 9)
    assert shell_volume(1, ctx32) == Fraction(8, 81)
    # large level exercises the cylinder path; compare with the formula
    assert shell_volume(25, ctx2) == Fraction(1, 2 ** 26)


def test_eval_vg_quantifier_bounds():
    f = parse_formula("exists z : vg in [0, 3] . ord(x) = z", default_sort=VF)
    ctx = PContext(2, 1)
    assert vol_level(f, 5, ctx) == Fraction(15, 16)  # ord in 0..3
    g = parse_formula("forall z : vg in [0, 1] . ord(x) <= z", default_sort=VF)
    assert vol_level(g, 3, ctx) == Fraction(1, 2)    # ord x = 0 and below


def test_ord_infinite_comparisons():
    ctx = PContext(2, 1)
    f = parse_formula("ord(x) >= 5", default_sort=VF)
    # the zero representative has infinite order, which satisfies >= 5
    assert vol_level(f, 5, ctx) == Fraction(1, 32)
    # odd order below the level: 2, 6, 10, 14 and 8 modulo 16; the zero
    # class has infinite order and congruences never hold there
    g = parse_formula("ord(x) = 3 mod 2", default_sort=VF)
    assert vol_level(g, 4, ctx) == Fraction(5, 16)


def test_random_ord_ac_multiplicativity():
    rng = random.Random(7)
    for _ in range(60):
        a = PadicElem.exact(3, 2, (Fraction(rng.randint(-40, 40)),
                                   Fraction(rng.randint(-40, 40))))
        b = PadicElem.exact(3, 2, (Fraction(rng.randint(-40, 40)),
                                   Fraction(rng.randint(-40, 40))))
        if a.is_zero() or b.is_zero():
            continue
        prod = a * b
        assert prod.ord() == a.ord() + b.ord()
        assert prod.ac(1).coeffs == (a.ac(1) * b.ac(1)).coeffs
        assert prod.ac(2).coeffs == (a.ac(2) * b.ac(2)).coeffs

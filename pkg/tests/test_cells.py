"""Cell machinery: every operation is checked against brute-force
enumeration over a finite box, including disjointness of the output."""

import random
from fractions import Fraction

import pytest

from motint.cells import (
    AffineForm, PCell, VarCell, add_cong, add_eq, add_ineq, complement,
    disjoint_union, ensure_known_value_mod, enumerate_points,
    from_constraints, intersect, reorder, subtract, universe,
)
from motint.errors import FrameMismatch, MotintError


def af(coeffs=None, const=0):
    return AffineForm.make(coeffs or {}, const)


def box_points(names, box):
    def rec(i, env):
        if i == len(names):
            yield dict(env)
            return
        lo, hi = box[names[i]]
        for x in range(lo, hi + 1):
            env[names[i]] = x
            yield from rec(i + 1, env)
        env.pop(names[i], None)
    yield from rec(0, {})


def covered(cells, box):
    """Points covered by the cells, asserting no point is covered twice."""
    names = cells[0].vars if cells else ()
    out = set()
    for env in box_points(names, box):
        hits = sum(1 for c in cells if c.contains(env))
        assert hits <= 1, f"point {env} covered {hits} times"
        if hits:
            out.add(tuple(env[n] for n in names))
    return out


def predicate_points(names, box, pred):
    return {tuple(env[n] for n in names)
            for env in box_points(names, box) if pred(env)}


def test_affine_form_basics():
    f = af({"i": 2, "j": Fraction(-1, 2)}, 3)
    g = af({"i": -2, "k": 1})
    s = f + g
    assert s.coeff("i") == 0
    assert s.coeff("k") == 1
    assert s.const == 3
    assert f.evaluate({"i": 1, "j": 4}) == 3
    sub = f.substitute("j", af({"i": 1}, 1))
    assert sub.evaluate({"i": 3}) == f.evaluate({"i": 3, "j": 4})
    assert f.denom_lcm() == 2
    assert not f.is_integral()
    assert AffineForm.from_json(f.to_json()) == f


def test_affine_form_str():
    assert str(af({"i": 1, "j": -1}, 2)) == "i - j + 2"
    assert str(af()) == "0"
    assert str(af({"n": Fraction(3, 2)})) == "3/2*n"


def test_cell_json_round_trip():
    c = PCell(("i", "j"),
              (VarCell(af(const=0), af(const=10), 2, 1),
               VarCell(af({"i": 1}), None, 3, 2)))
    assert PCell.from_json(c.to_json()) == c


def test_varcell_validation():
    with pytest.raises(MotintError):
        VarCell(None, None, 0, 0)
    with pytest.raises(MotintError):
        VarCell(None, None, 3, 5)
    with pytest.raises(MotintError):
        PCell(("i", "j"), (VarCell(af({"j": 1}), None), VarCell(None, None)))


BOX2 = {"i": (-6, 6), "j": (-6, 6)}


def test_add_ineq_single_and_merge():
    u = universe(("i", "j"))
    cells = add_ineq(u, af({"j": 1, "i": -1}))          # j <= i
    cells = [c for base in cells for c in add_ineq(base, af({"j": -1}, -2))]  # j >= -2
    cells = [c for base in cells for c in add_ineq(base, af({"j": 2, "i": 1}, -4))]
    want = predicate_points(("i", "j"), BOX2,
                            lambda e: e["j"] <= e["i"] and e["j"] >= -2
                            and 2 * e["j"] + e["i"] <= 4)
    assert covered(cells, BOX2) == want


def test_add_ineq_fractional_bound():
    u = universe(("i", "j"))
    # 2j <= i gives the fractional bound j <= i/2
    cells = add_ineq(u, af({"j": 2, "i": -1}))
    want = predicate_points(("i", "j"), BOX2, lambda e: 2 * e["j"] <= e["i"])
    assert covered(cells, BOX2) == want


def test_add_cong_multivariable():
    u = universe(("i", "j"))
    cells = add_cong(u, af({"i": 2, "j": 3}, -1), 4)
    want = predicate_points(("i", "j"), BOX2,
                            lambda e: (2 * e["i"] + 3 * e["j"] - 1) % 4 == 0)
    assert covered(cells, BOX2) == want
    # residues in the tower are constant
    for c in cells:
        for vc in c.tower:
            assert isinstance(vc.res, int)


def test_add_cong_requires_integer_coefficients():
    u = universe(("i",))
    with pytest.raises(MotintError):
        add_cong(u, af({"i": Fraction(1, 2)}), 3)


def test_add_eq_pins_innermost():
    u = universe(("i", "b", "a"))
    box = {"i": (0, 12), "b": (0, 6), "a": (0, 6)}
    pre = add_ineq(u, af({"b": -1}))                      # b >= 0
    pre = [c for base in pre for c in add_ineq(base, af({"a": -1}))]
    cells = [c for base in pre for c in add_eq(base, af({"a": 2, "b": 3, "i": -1}))]
    want = predicate_points(("i", "b", "a"), box,
                            lambda e: e["a"] >= 0 and e["b"] >= 0
                            and 2 * e["a"] + 3 * e["b"] == e["i"])
    assert covered(cells, box) == want
    # the pinned slot has matching affine bounds
    for c in cells:
        vc = c.tower[2]
        assert vc.lo == vc.hi


def test_add_eq_constant_cases():
    u = universe(("i",))
    assert add_eq(u, af(const=0)) == [u]
    assert add_eq(u, af(const=3)) == []


def test_intersect_matches_sets():
    a_cells = from_constraints(("i", "j"), [
        ("ineq", af({"i": -1})), ("ineq", af({"i": 1}, -5)),
        ("ineq", af({"j": -1}, -1)), ("ineq", af({"j": 1, "i": -1})),
    ])
    b_cells = from_constraints(("i", "j"), [
        ("cong", af({"j": 1}), 2), ("ineq", af({"j": -2, "i": 1})),
    ])
    got = set()
    pieces = [p for a in a_cells for b in b_cells for p in intersect(a, b)]
    got = covered(pieces, BOX2)
    in_a = predicate_points(("i", "j"), BOX2,
                            lambda e: 0 <= e["i"] <= 5 and -1 <= e["j"] <= e["i"])
    in_b = predicate_points(("i", "j"), BOX2,
                            lambda e: e["j"] % 2 == 0 and 2 * e["j"] >= e["i"])
    assert got == in_a & in_b


def test_subtract_and_union_and_complement():
    sq = from_constraints(("i", "j"), [
        ("ineq", af({"i": -1})), ("ineq", af({"i": 1}, -4)),
        ("ineq", af({"j": -1})), ("ineq", af({"j": 1}, -4)),
    ])
    assert len(sq) == 1
    strip = from_constraints(("i", "j"), [
        ("ineq", af({"j": -1}, 2)), ("ineq", af({"j": 1}, -3)),
    ])
    assert len(strip) == 1
    diff = subtract(sq[0], strip[0])
    in_sq = predicate_points(("i", "j"), BOX2,
                             lambda e: 0 <= e["i"] <= 4 and 0 <= e["j"] <= 4)
    in_strip = predicate_points(("i", "j"), BOX2, lambda e: 2 <= e["j"] <= 3)
    assert covered(diff, BOX2) == in_sq - in_strip
    uni = disjoint_union(sq + strip)
    assert covered(uni, BOX2) == in_sq | in_strip
    comp = complement(sq, ("i", "j"))
    assert covered(comp, BOX2) == covered([universe(("i", "j"))], BOX2) - in_sq


def test_frame_mismatch():
    with pytest.raises(FrameMismatch):
        intersect(universe(("i",)), universe(("j",)))
    with pytest.raises(FrameMismatch):
        reorder(universe(("i", "j")), ("i", "k"))


def test_reorder_preserves_membership():
    cells = from_constraints(("i", "j"), [
        ("ineq", af({"j": -1})),                      # j >= 0
        ("ineq", af({"j": 1, "i": -1})),              # j <= i
        ("cong", af({"i": 1, "j": 1}), 2),            # i + j even
    ])
    want = covered(cells, BOX2)
    flipped = [p for c in cells for p in reorder(c, ("j", "i"))]
    got = {(e["i"], e["j"])
           for e in box_points(("j", "i"), BOX2)
           if sum(1 for c in flipped if c.contains(e)) == 1}
    missed = {tuple(e[n] for n in ("j", "i"))
              for e in box_points(("j", "i"), BOX2)
              if sum(1 for c in flipped if c.contains(e)) > 1}
    assert not missed
    assert got == want


def test_ensure_known_value_mod():
    cells = from_constraints(("i", "j"), [("ineq", af({"j": 1, "i": -1}))])
    form = af({"i": Fraction(1, 2), "j": 1}, Fraction(1, 2))
    total_points = covered(cells, BOX2)
    refined = []
    for c in cells:
        refined += ensure_known_value_mod(c, form, 3)
    pieces = [c for c, _, _ in refined]
    assert covered(pieces, BOX2) == total_points
    for c, d, val in refined:
        assert d == 2
        for env in box_points(("i", "j"), BOX2):
            if c.contains(env):
                assert (env["i"] + 2 * env["j"] + 1) % 6 == val


def test_enumerate_points_matches_contains():
    cells = from_constraints(("i", "j"), [
        ("ineq", af({"i": -1})), ("ineq", af({"i": 1}, -6)),
        ("ineq", af({"j": -1})), ("ineq", af({"j": 2, "i": -1})),
        ("cong", af({"j": 1}, -1), 3),
    ])
    box = {"i": (0, 6), "j": (0, 6)}
    for c in cells:
        listed = {tuple(e[n] for n in ("i", "j")) for e in enumerate_points(c, box)}
        direct = {tuple(e[n] for n in ("i", "j"))
                  for e in box_points(("i", "j"), box) if c.contains(e)}
        assert listed == direct


def test_random_constraint_systems():
    rng = random.Random(31)
    names = ("i", "j", "k")
    box = {n: (-5, 5) for n in names}
    for trial in range(40):
        cons = []
        preds = []
        for _ in range(rng.randint(1, 4)):
            kind = rng.choice(["ineq", "ineq", "cong", "eq"])
            coeffs = {n: rng.randint(-2, 2) for n in rng.sample(names, rng.randint(1, 3))}
            const = rng.randint(-4, 4)
            if all(v == 0 for v in coeffs.values()):
                continue
            form = af(coeffs, const)
            if kind == "cong":
                m = rng.choice([2, 3, 4])
                cons.append(("cong", form, m))
                preds.append(lambda e, c=dict(coeffs), k=const, m=m:
                             (sum(cc * e[n] for n, cc in c.items()) + k) % m == 0)
            elif kind == "eq":
                cons.append(("eq", form))
                preds.append(lambda e, c=dict(coeffs), k=const:
                             sum(cc * e[n] for n, cc in c.items()) + k == 0)
            else:
                cons.append(("ineq", form))
                preds.append(lambda e, c=dict(coeffs), k=const:
                             sum(cc * e[n] for n, cc in c.items()) + k <= 0)
        cells = from_constraints(names, cons)
        want = predicate_points(names, box, lambda e: all(p(e) for p in preds))
        assert covered(cells, box) == want, f"trial {trial}: {cons}"

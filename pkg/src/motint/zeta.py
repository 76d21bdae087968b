"""Valuation zeta series for polynomial maps on integer tuples.

For a polynomial H over the valuation ring in n variables, the regions
X_i = {x : ord H(x) = i} have motivic volumes mu(X_i); the series
Z(T) = sum mu(X_i) T^i is rational for the families supported here, with
denominator a product of factors 1 - L^a T^b.  This module computes:

* ``zmot_monomial`` -- the closed-form series for monomial H, through the
  cell-decomposition integrator run with the shell level as a parameter;
* ``zmot_from_cells`` -- the closed form from a user-supplied parametrized
  cell family, for conditions the automatic fragment does not reach;
* ``zprime_count`` -- exact Haar volumes of X_i over the unramified
  degree-d extension of Q_p, by counting residue classes (ord H(x) = i
  only depends on x modulo the (i+1)-st power of the maximal ideal);
* ``verify_meuser`` -- the interpolation check: applying the point-count
  specialization to the closed form coefficientwise reproduces the
  counted volumes for every unramified degree, exactly.

Polynomials are written in the ``x^2*y^3 - 2*x + 7`` syntax; see
``parse_poly``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from . import formula as F
from . import ring_a as R
from .cells import AffineForm, universe
from .cplus import CTerm, MotFun, normal_form, specialize, unit_class
from .errors import (CapExceeded, FrameMismatch, MotintError,
                     NonGeometricFamily, NotIntegrable, ParseError,
                     UnsupportedH)
from .padic import PContext, enumeration_cap, rational_ord
from .presburger import PFun, PTerm
from .vfint import CellDecomposition, integrate_cell_family, integrate_iterated

__all__ = [
    "Poly", "parse_poly", "RatSeries", "CoeffList",
    "series_from_parameter", "zmot_monomial", "zmot_from_cells",
    "zprime_count", "verify_meuser", "heuristic_pade_fit",
]


# ---------------------------------------------------------------------------
# multivariate polynomials


@dataclass(frozen=True)
class Poly:
    """Multivariate polynomial with exact rational coefficients.

    ``terms`` is a canonical tuple of (coefficient, monomial) pairs where
    a monomial is a sorted tuple of (variable, exponent) with exponents
    >= 1; the constant monomial is the empty tuple.
    """

    terms: tuple

    @staticmethod
    def make(data) -> "Poly":
        acc: dict = {}
        for c, mono in data:
            c = Fraction(c)
            merged: dict = {}
            for v, e in mono:
                e = int(e)
                if e < 0:
                    raise ParseError(f"negative exponent on {v}")
                merged[v] = merged.get(v, 0) + e
            key = tuple(sorted((v, e) for v, e in merged.items() if e))
            acc[key] = acc.get(key, Fraction(0)) + c
        terms = tuple(sorted(((c, k) for k, c in acc.items() if c != 0),
                             key=lambda t: t[1]))
        return Poly(terms)

    def is_zero(self) -> bool:
        return not self.terms

    def variables(self) -> tuple:
        out: set = set()
        for _, mono in self.terms:
            out.update(v for v, _ in mono)
        return tuple(sorted(out))

    def as_monomial(self):
        """(coefficient, monomial) when the polynomial has one term."""
        if len(self.terms) != 1:
            return None
        return self.terms[0]

    def eval_residue(self, ring, env: dict):
        """Value in a residue ring, with variables bound to ring elements."""
        total = ring.zero()
        for c, mono in self.terms:
            val = ring.from_rational(c)
            for v, e in mono:
                val = val * (env[v] ** e)
            total = total + val
        return total

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for c, mono in self.terms:
            factors = [v if e == 1 else f"{v}^{e}" for v, e in mono]
            if not factors:
                body = str(abs(c))
            elif abs(c) == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(abs(c))] + factors)
            parts.append(("- " if c < 0 else "+ ") + body)
        head = parts[0][2:] if parts[0].startswith("+ ") else "-" + parts[0][2:]
        return " ".join([head] + parts[1:])


_POLY_TOKEN = re.compile(r"\s*(\d+|[A-Za-z_]\w*|[\^*+/-])")


def parse_poly(text: str) -> Poly:
    """Parse ``x^2*y^3 - 2*x + 7``: sums of products of variables with
    ``^`` powers and rational constants (``3`` or ``3/4``)."""
    toks: list = []
    pos = 0
    while pos < len(text):
        m = _POLY_TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(
                    f"unexpected character {text[pos:].strip()[0]!r} "
                    "in polynomial")
            break
        toks.append(m.group(1))
        pos = m.end()
    idx = [0]

    def peek():
        return toks[idx[0]] if idx[0] < len(toks) else None

    def take():
        t = peek()
        idx[0] += 1
        return t

    def number() -> int:
        t = take()
        if t is None or not t.isdigit():
            raise ParseError(f"number expected, found {t!r}")
        return int(t)

    def term(sign: int):
        coeff = Fraction(sign)
        powers: list = []
        while True:
            t = peek()
            if t is None:
                raise ParseError("polynomial term is empty")
            if t.isdigit():
                take()
                num = int(t)
                if peek() == "/":
                    take()
                    coeff *= Fraction(num, number())
                else:
                    coeff *= num
            elif re.fullmatch(r"[A-Za-z_]\w*", t):
                take()
                e = 1
                if peek() == "^":
                    take()
                    e = number()
                powers.append((t, e))
            else:
                raise ParseError(f"unexpected token {t!r} in polynomial")
            if peek() == "*":
                take()
                continue
            return coeff, tuple(powers)

    data = []
    sign = 1
    if peek() in ("+", "-"):
        sign = -1 if take() == "-" else 1
    if peek() is None:
        raise ParseError("empty polynomial")
    data.append(term(sign))
    while peek() is not None:
        t = take()
        if t == "+":
            data.append(term(1))
        elif t == "-":
            data.append(term(-1))
        else:
            raise ParseError(f"'+' or '-' expected, found {t!r}")
    return Poly.make(data)


def _as_poly(h) -> Poly:
    return parse_poly(h) if isinstance(h, str) else h


# ---------------------------------------------------------------------------
# rational series and coefficient lists


def _point_fun(a: R.ARat, rc=None) -> MotFun:
    pf = PFun((), ((universe(()), (PTerm(a, AffineForm.make()),)),))
    return MotFun((), (), (CTerm(F.TRUE, pf, unit_class() if rc is None
                                 else rc),))


def scalar_of(fun: MotFun):
    """The ARat value of a point function that is a plain scalar, else None."""
    if fun.res_vars or fun.vg_vars:
        return None
    if not fun.terms:
        return R.ZERO
    if len(fun.terms) != 1:
        return None
    ct = fun.terms[0]
    if ct.guard != F.TRUE or ct.rc != unit_class():
        return None
    pieces = ct.pf.pieces
    if len(pieces) != 1 or len(pieces[0][1]) != 1:
        return None
    term = pieces[0][1][0]
    if term.lpow != AffineForm.make() or term.factors:
        return None
    return term.coef


@dataclass(frozen=True)
class RatSeries:
    """Rational series in T: numerator polynomial with point-function
    coefficients over a denominator product of factors 1 - L^a T^b.

    ``numerator`` maps T-powers to normalized point functions as a sorted
    tuple of (power, value); ``denominator`` is the sorted multiset of
    (a, b) exponent pairs, b >= 1.
    """

    numerator: tuple
    denominator: tuple

    def __post_init__(self):
        last = -1
        for i, coeff in self.numerator:
            if i <= last:
                raise MotintError("numerator powers must be increasing")
            if i < 0:
                raise MotintError("numerator powers must be >= 0")
            last = i
            if coeff.res_vars or coeff.vg_vars:
                raise FrameMismatch(
                    "series coefficients must be point functions")
        if tuple(sorted(self.denominator)) != self.denominator:
            raise MotintError("denominator factors must be sorted")
        for a, b in self.denominator:
            if b < 1:
                raise MotintError(
                    f"denominator factor 1 - L^{a}*T^{b} needs b >= 1")

    def is_zero(self) -> bool:
        return not self.numerator

    def expand(self, i_max: int) -> list:
        """Series coefficients of T^0..T^i_max as point functions."""
        zero = MotFun.zero((), ())
        out = [zero] * (i_max + 1)
        for i, coeff in self.numerator:
            if i <= i_max:
                out[i] = out[i] + coeff
        for a, b in self.denominator:
            la = R.L_pow(a)
            for i in range(b, i_max + 1):
                out[i] = out[i] + out[i - b].scale(la)
        return [normal_form(c) for c in out]

    def expand_counts(self, ctx: PContext, i_max: int) -> list:
        """Exact rational series coefficients after the point-count
        specialization at ctx: numerator coefficients are counted, the
        denominator factors become 1 - q^a T^b, and the quotient is
        expanded over Q."""
        out = [Fraction(0)] * (i_max + 1)
        for i, coeff in self.numerator:
            if i <= i_max:
                out[i] += specialize(coeff, ctx)
        q = Fraction(ctx.q)
        for a, b in self.denominator:
            qa = q ** a
            for i in range(b, i_max + 1):
                out[i] += qa * out[i - b]
        return out

    def to_json(self) -> dict:
        return {"format": "motint.ratseries/1",
                "numerator": [[i, c.to_json()] for i, c in self.numerator],
                "denominator": [list(f) for f in self.denominator]}

    @staticmethod
    def from_json(data) -> "RatSeries":
        if data.get("format") != "motint.ratseries/1":
            raise ParseError("not a motint.ratseries/1 object")
        num = tuple((int(i), MotFun.from_json(c))
                    for i, c in data["numerator"])
        den = tuple(sorted((int(a), int(b)) for a, b in data["denominator"]))
        return RatSeries(num, den)

    def __str__(self) -> str:
        if not self.numerator:
            return "0"
        parts = []
        for i, coeff in self.numerator:
            s = scalar_of(coeff)
            body = f"({s})" if s is not None else "<class-valued>"
            if i == 0:
                parts.append(body)
            elif i == 1:
                parts.append(f"{body}*T")
            else:
                parts.append(f"{body}*T^{i}")
        num = " + ".join(parts)
        if not self.denominator:
            return num
        den = "*".join(
            f"(1 - L^{a}*T^{b})" if b != 1 else f"(1 - L^{a}*T)"
            for a, b in self.denominator)
        return f"[{num}] / [{den}]"


@dataclass(frozen=True)
class CoeffList:
    """Exact Haar volumes of {ord H = i} for i = 0..i_max."""

    i_max: int
    values: tuple

    def __post_init__(self):
        if len(self.values) != self.i_max + 1:
            raise MotintError(
                f"expected {self.i_max + 1} values, got {len(self.values)}")
        for v in self.values:
            if not 0 <= v <= 1:
                raise MotintError(f"a Haar volume must lie in [0,1]: {v}")

    def to_json(self) -> dict:
        return {"format": "motint.coefflist/1", "i_max": self.i_max,
                "values": [str(v) for v in self.values]}

    @staticmethod
    def from_json(data) -> "CoeffList":
        if data.get("format") != "motint.coefflist/1":
            raise ParseError("not a motint.coefflist/1 object")
        return CoeffList(int(data["i_max"]),
                         tuple(Fraction(v) for v in data["values"]))


# ---------------------------------------------------------------------------
# closed form extraction from a parametrized value


@lru_cache(maxsize=None)
def _stirling2(n: int, k: int) -> int:
    if n == k:
        return 1
    if k == 0 or k > n:
        return 0
    return k * _stirling2(n - 1, k) + _stirling2(n - 1, k - 1)


def _poly_mul(a: list, b: list) -> list:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _first_class_point(bound: Fraction, m: int, res: int) -> int:
    """Smallest integer >= bound congruent to res mod m."""
    n = math.ceil(bound)
    return n + (res - n) % m


def _infinite_piece(coef, lpow, factors, start: int, m: int, rc, contribs,
                    param: str) -> None:
    """One congruence class start + m*k, k >= 0, turned into a rational
    contribution (numerator polynomial, denominator factor with power)."""
    e = lpow.coeff(param)
    if e >= 0:
        raise NonGeometricFamily(
            f"the exponent of L grows with the parameter (slope {e}) on an "
            "unbounded piece; the series has no geometric closed form")
    em = e * Fraction(m)
    if em.denominator != 1:
        # refine the class so each sub-class steps the exponent by an integer
        t = em.denominator
        for j in range(t):
            _infinite_piece(coef, lpow, factors, start + j * m, m * t, rc,
                            contribs, param)
        return
    beta0 = lpow.evaluate({param: start})
    if Fraction(beta0).denominator != 1:
        raise NonGeometricFamily(
            f"the exponent of L is not an integer at parameter {start}")
    a, b = int(em), m
    pairs = []
    scalar = Fraction(1)
    for f in factors:
        u = Fraction(f.evaluate({param: start}))
        g = f.coeff(param) * m
        if g == 0:
            scalar *= u
            if u == 0:
                return
        else:
            pairs.append((u, g))
    poly = [scalar]
    for u, g in pairs:
        poly = _poly_mul(poly, [u, g])
    deg = len(poly) - 1
    falling = [Fraction(0)] * (deg + 1)
    for s, c in enumerate(poly):
        for j in range(s + 1):
            falling[j] += c * _stirling2(s, j)
    base = coef * R.L_pow(int(beta0))
    num: dict = {}
    for j in range(deg + 1):
        if falling[j] == 0:
            continue
        for r in range(deg - j + 1):
            w = falling[j] * math.factorial(j) * math.comb(deg - j, r) \
                * (-1) ** r
            if w == 0:
                continue
            power = start + b * (j + r)
            val = base * R.from_rational(w) * R.L_pow(a * (j + r))
            num[power] = num.get(power, R.ZERO) + val
    contribs.append((num, rc, {(a, b): deg + 1}))


def series_from_parameter(fun: MotFun, param: str = "i") -> RatSeries:
    """Closed rational form of sum over i >= 0 of fun(i) * T^i for a
    value parametrized by one value-group variable."""
    if fun.res_vars or fun.vg_vars != (param,):
        raise FrameMismatch(
            f"expected a value over the single parameter {param!r}, got "
            f"({fun.res_vars}, {fun.vg_vars})")
    contribs: list = []
    for ct in fun.terms:
        if ct.guard != F.TRUE:
            raise MotintError(
                "a parametrized series value carries an unresolved guard")
        for cell, terms in ct.pf.pieces:
            slot = cell.tower[0]
            m, res = slot.mod, slot.res
            lo = Fraction(0) if slot.lo is None else max(
                Fraction(slot.lo.const), Fraction(0))
            start = _first_class_point(lo, m, res)
            for t in terms:
                if slot.hi is not None:
                    hi = math.floor(Fraction(slot.hi.const))
                    num: dict = {}
                    i = start
                    while i <= hi:
                        beta = t.lpow.evaluate({param: i})
                        if Fraction(beta).denominator != 1:
                            raise NonGeometricFamily(
                                "the exponent of L is not an integer at "
                                f"parameter {i}")
                        w = Fraction(1)
                        for f in t.factors:
                            w *= Fraction(f.evaluate({param: i}))
                        if w != 0:
                            val = t.coef * R.L_pow(int(beta)) \
                                * R.from_rational(w)
                            num[i] = num.get(i, R.ZERO) + val
                        i += m
                    if num:
                        contribs.append((num, ct.rc, {}))
                else:
                    _infinite_piece(t.coef, t.lpow, t.factors, start, m,
                                    ct.rc, contribs, param)
    if not contribs:
        return RatSeries((), ())
    denom: dict = {}
    for _, _, d in contribs:
        for f, k in d.items():
            denom[f] = max(denom.get(f, 0), k)
    coeffs: dict = {}
    for num, rc, d in contribs:
        for f, k in denom.items():
            missing = k - d.get(f, 0)
            a, b = f
            la = R.L_pow(a)
            for _ in range(missing):
                nxt: dict = {}
                for i, c in num.items():
                    nxt[i] = nxt.get(i, R.ZERO) + c
                    nxt[i + b] = nxt.get(i + b, R.ZERO) - c * la
                num = nxt
        for i, c in num.items():
            if c == R.ZERO:
                continue
            add = _point_fun(c, rc)
            coeffs[i] = coeffs[i] + add if i in coeffs else add
    numerator = []
    for i in sorted(coeffs):
        val = normal_form(coeffs[i])
        if val.terms:
            numerator.append((i, val))
    den_flat = tuple(sorted(f for f, k in denom.items() for _ in range(k)))
    if not numerator:
        return RatSeries((), ())
    return RatSeries(tuple(numerator), den_flat)


# ---------------------------------------------------------------------------
# motivic series


def zmot_monomial(h, p: int | None = None) -> RatSeries:
    """Closed-form series for a monomial c*x1^k1*...*xn^kn.

    The result is independent of the residue characteristic when c = +-1;
    otherwise the valuation of c shifts the series and a prime must be
    given to compute it.
    """
    h = _as_poly(h)
    mono = h.as_monomial()
    if mono is None:
        raise UnsupportedH(
            "the closed form covers single monomials; supply a parametrized "
            "cell family for other polynomials")
    c, powers = mono
    shift = 0
    if abs(c) != 1:
        if p is None:
            raise UnsupportedH(
                f"the coefficient {c} is not a unit at every prime; give a "
                "prime to value it")
        shift = rational_ord(c, p)
    if not powers:
        if shift < 0:
            return RatSeries((), ())
        return RatSeries(((shift, _point_fun(R.ONE)),), ())
    names = tuple(v for v, _ in powers)
    parts = [F.Le(F.IntLit(0, F.VG), F.Ord(F.Var(v, F.VF))) for v in names]
    total = None
    for v, k in powers:
        piece = F.BinOp("*", F.IntLit(k, F.VG), F.Ord(F.Var(v, F.VF)))
        total = piece if total is None else F.BinOp("+", total, piece)
    if shift:
        total = F.BinOp("+", total, F.IntLit(shift, F.VG))
    parts.append(F.Eq(total, F.Var("i", F.VG)))
    # centers are all at the origin, so the decomposition is the same over
    # every residue characteristic; any context works as scaffolding
    out = integrate_iterated(F.land(*parts), names, PContext(2, 1),
                             base_vg=("i",))
    return series_from_parameter(out.value, "i")


def zmot_from_cells(stages, param: str = "i", log=None) -> RatSeries:
    """Closed-form series from user-supplied parametrized cell families.

    ``stages`` lists one decomposition per valued-field variable,
    outermost first: the first stage is based on the single value-group
    parameter, and each later stage's base frame extends the previous
    stage's by its shell and angular variables.  Values are integrated
    innermost-first; the result must be geometric in the parameter.
    """
    stages = list(stages)
    if not stages:
        return RatSeries((), ())
    first = stages[0]
    if first.base_res != () or first.base_vg != (param,):
        raise FrameMismatch(
            f"the outermost stage must be based on ({param!r},) alone, got "
            f"({first.base_res}, {first.base_vg})")
    inner = None
    for dec in reversed(stages):
        if inner is not None:
            vals = [v * inner if cell.kind == "ball" else v
                    for cell, v in zip(dec.cells, dec.values)]
            dec = dec.with_values(vals)
        inner = integrate_cell_family(dec, log=log).value
    return series_from_parameter(inner, param)


# ---------------------------------------------------------------------------
# p-adic counting


def _shell_volumes(powers, shift: int, q: int, i_max: int) -> list:
    """Volumes of {sum k_j * ord x_j = i - shift} by per-variable shells."""
    unit = Fraction(q - 1, q)
    vols = [Fraction(0)] * (i_max + 1)

    def walk(idx: int, remaining: int, vol: Fraction) -> None:
        if idx == len(powers):
            if remaining == 0:
                nonlocal_target[0] += vol
            return
        k = powers[idx][1]
        a = 0
        while k * a <= remaining:
            walk(idx + 1, remaining - k * a, vol * unit / q ** a)
            a += 1

    for i in range(i_max + 1):
        target = i - shift
        if target < 0:
            continue
        nonlocal_target = [Fraction(0)]
        walk(0, target, Fraction(1))
        vols[i] = nonlocal_target[0]
    return vols


def _count_cylinders(h: Poly, ctx: PContext, i_max: int, cap: int) -> list:
    """Refine residue classes level by level, crediting each class whose
    valuation becomes determined; classes still vanishing beyond level
    i_max + 1 cannot meet any requested coefficient and are dropped."""
    names = h.variables()
    n = len(names)
    p, d = ctx.p, ctx.d
    q = p ** d
    counts = [Fraction(0)] * (i_max + 1)
    frontier = [tuple((0,) * d for _ in names)]
    visited = 0
    digits = list(itertools.product(range(p), repeat=d * n))
    for level in range(1, i_max + 2):
        need = len(frontier) * len(digits)
        if visited + need > cap:
            raise CapExceeded(
                f"refining {len(frontier)} classes to level {level} needs "
                f"{visited + need} evaluations, over the cap {cap}; the "
                f"largest feasible i_max is {level - 2}",
                needed=visited + need, cap=cap)
        visited += need
        ring = ctx.residue_ring(level)
        step = p ** (level - 1)
        vol = Fraction(1, q ** (n * level))
        nxt = []
        for coords in frontier:
            for delta in digits:
                child = tuple(
                    tuple(cv + step * delta[j * d + t]
                          for t, cv in enumerate(coord))
                    for j, coord in enumerate(coords))
                env = {v: ring.make(child[j]) for j, v in enumerate(names)}
                val = h.eval_residue(ring, env)
                if val.is_zero():
                    if level <= i_max:
                        nxt.append(child)
                    continue
                v = val.ord_capped()
                if v <= i_max:
                    counts[v] += vol
        frontier = nxt
        if not frontier:
            break
    return counts


def _count_enumerate(h: Poly, ctx: PContext, i_max: int, cap: int) -> list:
    """Per-level full enumeration: count solutions of ord H = i over the
    residue ring at level i + 1 and divide by the ring size."""
    names = h.variables()
    n = len(names)
    q = ctx.p ** ctx.d
    vols = []
    for i in range(i_max + 1):
        ring = ctx.residue_ring(i + 1)
        total = ring.size ** n
        if total > cap:
            raise CapExceeded(
                f"counting at level {i + 1} needs {total} tuples, over the "
                f"cap {cap}; the largest feasible i_max is {i - 1}",
                needed=total, cap=cap)
        count = 0
        for tup in itertools.product(list(ring.elements(cap=cap)), repeat=n):
            env = dict(zip(names, tup))
            if h.eval_residue(ring, env).ord_capped() == i:
                count += 1
        vols.append(Fraction(count, q ** (n * (i + 1))))
    return vols


def zprime_count(h, p: int, d: int, i_max: int, *, cap: int | None = None,
                 method: str = "auto") -> CoeffList:
    """Exact volumes of {x : ord H(x) = i} over the unramified degree-d
    extension, for i = 0..i_max.

    Methods: ``enumerate`` counts full residue-ring tuples at each level;
    ``cylinder`` refines residue classes level by level, crediting a
    class once its valuation is determined (same counts, far fewer
    evaluations); ``shells`` aggregates per-variable valuation shells and
    applies only to monomials; ``auto`` picks shells for monomials and
    cylinder refinement otherwise.
    """
    h = _as_poly(h)
    if i_max < 0:
        raise MotintError("i_max must be >= 0")
    cap = enumeration_cap() if cap is None else cap
    ctx = PContext(p, d)
    q = p ** d
    if h.is_zero():
        return CoeffList(i_max, tuple([Fraction(0)] * (i_max + 1)))
    mono = h.as_monomial()
    if method == "auto":
        method = "shells" if mono is not None else "cylinder"
    if method == "shells":
        if mono is None:
            raise UnsupportedH(
                "shell counting applies to monomials only; use the "
                "cylinder or enumerate method")
        c, powers = mono
        shift = rational_ord(c, p)
        if not powers:
            vols = [Fraction(int(i == shift)) for i in range(i_max + 1)]
        else:
            vols = _shell_volumes(powers, shift, q, i_max)
    elif method == "cylinder":
        if not h.variables():
            return zprime_count(h, p, d, i_max, cap=cap, method="shells")
        vols = _count_cylinders(h, ctx, i_max, cap)
    elif method == "enumerate":
        if not h.variables():
            return zprime_count(h, p, d, i_max, cap=cap, method="shells")
        vols = _count_enumerate(h, ctx, i_max, cap)
    else:
        raise MotintError(f"unknown counting method {method!r}")
    return CoeffList(i_max, tuple(vols))


# ---------------------------------------------------------------------------
# interpolation check


def verify_meuser(h, p: int, d: int, i_max: int, *, cap: int | None = None,
                  series: RatSeries | None = None,
                  method: str = "auto") -> dict:
    """Check that the counted series equals the point-count specialization
    of the closed form, coefficient by coefficient, exactly.

    When ``series`` is given it is used as the closed form (so one object
    can serve every degree); otherwise the monomial closed form is
    computed.  The report lists both values for each i.
    """
    h = _as_poly(h)
    rs = zmot_monomial(h) if series is None else series
    ctx = PContext(p, d)
    motivic = rs.expand_counts(ctx, i_max)
    counted = zprime_count(h, p, d, i_max, cap=cap, method=method).values
    rows = []
    for i in range(i_max + 1):
        rows.append({"i": i, "motivic": motivic[i], "counted": counted[i],
                     "match": motivic[i] == counted[i]})
    return {"h": str(h), "p": p, "d": d, "q": p ** d, "i_max": i_max,
            "rows": rows, "all_match": all(r["match"] for r in rows)}


# ---------------------------------------------------------------------------
# heuristic fitting (never used for verification)


def heuristic_pade_fit(values, max_den_degree: int = 4):
    """Heuristic rational fit of a coefficient list (Pade style).

    Tries denominator degrees from 0 up and returns (numerator, denominator)
    coefficient tuples over Q with denominator constant term 1, or None.
    The result is a conjecture fitted to finitely many terms -- it is
    never used by the verification pipeline and proves nothing.
    """
    v = [Fraction(x) for x in values]
    n = len(v)
    for k in range(0, max_den_degree + 1):
        spare = max(k, 2)                # terms held back as a consistency check
        num_deg = n - 1 - k - spare
        if num_deg < 0:
            break
        rows = []
        rhs = []
        for i in range(num_deg + 1, n):
            rows.append([v[i - j] if i - j >= 0 else Fraction(0)
                         for j in range(1, k + 1)])
            rhs.append(-v[i])
        sol = _solve_exact(rows, rhs, k)
        if sol is None:
            continue
        den = [Fraction(1)] + sol
        num = []
        for i in range(num_deg + 1):
            s = v[i]
            for j in range(1, min(i, k) + 1):
                s += den[j] * v[i - j]
            num.append(s)
        while num and num[-1] == 0:
            num.pop()
        return tuple(num), tuple(den)
    return None


def _solve_exact(rows, rhs, k):
    """Least-degree exact solution of an overdetermined linear system over
    Q by elimination; None when inconsistent."""
    if k == 0:
        return [] if all(r == 0 for r in rhs) else None
    mat = [list(row) + [b] for row, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(k):
        piv = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        scale = mat[r][c]
        mat[r] = [x / scale for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][c] != 0:
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append(c)
        r += 1
    for i in range(r, len(mat)):
        if mat[i][k] != 0:
            return None
    sol = [Fraction(0)] * k
    for i, c in enumerate(pivots):
        sol[c] = mat[i][k]
    return sol

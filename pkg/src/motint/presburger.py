"""Constructible functions on integer cells and their exact summation.

A function is a finite list of disjoint cells, each carrying a sum of
terms coef * L^lpow * prod(factors), where coef lives in the coefficient
ring, lpow is an affine form with integer values on the cell, and each
factor is an affine form.  Summing over the innermost variable stays in
this class: geometric directions contribute Eulerian-polynomial closed
forms, flat directions contribute Stirling/binomial closed forms, and
congruence classes are handled by arithmetic-progression reindexing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations

from . import polynomials as P
from . import ring_a as R
from .cells import (
    AffineForm, PCell, VarCell, add_ineq, ensure_known_value_mod,
    intersect, refine_residue, reorder as reorder_cell, subtract_many,
)
from .errors import FrameMismatch, MotintError, NotIntegrable
from .ring_a import ARat


# ---------------------------------------------------------------------------
# terms

@dataclass(frozen=True)
class PTerm:
    """coef * L^lpow * product of factors."""

    coef: ARat
    lpow: AffineForm
    factors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))

    def is_zero(self) -> bool:
        if self.coef.is_zero():
            return True
        return any(f.is_constant() and f.const == 0 for f in self.factors)

    def scale(self, c: ARat) -> "PTerm":
        return PTerm(self.coef * c, self.lpow, self.factors)

    def __mul__(self, other: "PTerm") -> "PTerm":
        return PTerm(self.coef * other.coef, self.lpow + other.lpow,
                     self.factors + other.factors)

    def substitute(self, name: str, form: AffineForm) -> "PTerm":
        return PTerm(self.coef,
                     self.lpow.substitute(name, form),
                     tuple(f.substitute(name, form) for f in self.factors))

    def eval_arat(self, env: dict) -> ARat:
        e = self.lpow.evaluate(env)
        if e.denominator != 1:
            raise MotintError(f"non-integer exponent {e} at {env}")
        prod = Fraction(1)
        for f in self.factors:
            prod *= f.evaluate(env)
        if prod.denominator != 1:
            raise MotintError(f"non-integer factor product {prod} at {env}")
        return self.coef * R.L_pow(int(e)) * R.from_int(int(prod))

    def eval_theta(self, q, env: dict) -> Fraction:
        e = self.lpow.evaluate(env)
        if e.denominator != 1:
            raise MotintError(f"non-integer exponent {e} at {env}")
        val = R.theta(self.coef, q) * Fraction(q) ** int(e)
        for f in self.factors:
            val *= f.evaluate(env)
        return val

    def to_json(self):
        return {"coef": self.coef.to_json(), "lpow": self.lpow.to_json(),
                "factors": [f.to_json() for f in self.factors]}

    @staticmethod
    def from_json(data) -> "PTerm":
        return PTerm(R.lax(tuple(data["coef"]["numer"]), tuple(data["coef"]["denom"])),
                     AffineForm.from_json(data["lpow"]),
                     tuple(AffineForm.from_json(f) for f in data["factors"]))


def _clean(terms) -> tuple:
    return tuple(t for t in terms if not t.is_zero())


# ---------------------------------------------------------------------------
# functions

@dataclass(frozen=True)
class PFun:
    """Piecewise sum of terms over disjoint cells; zero off all cells."""

    vars: tuple
    pieces: tuple            # ((PCell, (PTerm, ...)), ...)

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        cleaned = []
        for cell, terms in self.pieces:
            if cell.vars != self.vars:
                raise FrameMismatch(
                    f"piece over {cell.vars} in a function over {self.vars}")
            terms = _clean(terms)
            if terms:
                cleaned.append((cell, terms))
        object.__setattr__(self, "pieces", tuple(cleaned))

    @staticmethod
    def zero(vars) -> "PFun":
        return PFun(tuple(vars), ())

    @staticmethod
    def constant(vars, coef: ARat) -> "PFun":
        from .cells import universe
        return PFun(tuple(vars),
                    ((universe(vars), (PTerm(coef, AffineForm.const_form(0)),)),))

    @staticmethod
    def indicator(vars, cells, term: PTerm | None = None) -> "PFun":
        term = term or PTerm(R.ONE, AffineForm.const_form(0))
        return PFun(tuple(vars), tuple((c, (term,)) for c in cells))

    def is_zero_fun(self) -> bool:
        return not self.pieces

    def __add__(self, other: "PFun") -> "PFun":
        if self.vars != other.vars:
            raise FrameMismatch(f"{self.vars} vs {other.vars}")
        pieces = []
        b_cells = [cb for cb, _ in other.pieces]
        for ca, ta in self.pieces:
            for cb, tb in other.pieces:
                for c in intersect(ca, cb):
                    pieces.append((c, ta + tb))
            for c in subtract_many([ca], b_cells):
                pieces.append((c, ta))
        a_cells = [ca for ca, _ in self.pieces]
        for cb, tb in other.pieces:
            for c in subtract_many([cb], a_cells):
                pieces.append((c, tb))
        return PFun(self.vars, tuple(pieces))

    def __neg__(self) -> "PFun":
        return self.scale(-R.ONE)

    def __sub__(self, other: "PFun") -> "PFun":
        return self + (-other)

    def __mul__(self, other: "PFun") -> "PFun":
        if self.vars != other.vars:
            raise FrameMismatch(f"{self.vars} vs {other.vars}")
        pieces = []
        for ca, ta in self.pieces:
            for cb, tb in other.pieces:
                for c in intersect(ca, cb):
                    pieces.append((c, tuple(x * y for x in ta for y in tb)))
        return PFun(self.vars, tuple(pieces))

    def scale(self, c: ARat) -> "PFun":
        return PFun(self.vars,
                    tuple((cell, tuple(t.scale(c) for t in terms))
                          for cell, terms in self.pieces))

    def eval_arat(self, env: dict) -> ARat:
        total = R.ZERO
        for cell, terms in self.pieces:
            if cell.contains(env):
                for t in terms:
                    total = total + t.eval_arat(env)
        return total

    def eval_theta(self, q, env: dict) -> Fraction:
        total = Fraction(0)
        for cell, terms in self.pieces:
            if cell.contains(env):
                for t in terms:
                    total += t.eval_theta(q, env)
        return total

    def reorder(self, new_vars) -> "PFun":
        new_vars = tuple(new_vars)
        pieces = []
        for cell, terms in self.pieces:
            for c in reorder_cell(cell, new_vars):
                pieces.append((c, terms))
        return PFun(new_vars, tuple(pieces))

    def extend(self, new_vars) -> "PFun":
        """Embed into a larger variable tuple; new_vars must contain the
        current variables as a subsequence."""
        new_vars = tuple(new_vars)
        it = iter(new_vars)
        for v in self.vars:
            for w in it:
                if w == v:
                    break
            else:
                raise FrameMismatch(
                    f"{self.vars} is not a subsequence of {new_vars}")
        pieces = []
        for cell, terms in self.pieces:
            slots = dict(zip(cell.vars, cell.tower))
            tower = tuple(slots.get(v, VarCell(None, None)) for v in new_vars)
            pieces.append((PCell(new_vars, tower), terms))
        return PFun(new_vars, tuple(pieces))

    def to_json(self):
        return {"format": "motint.pfun/1",
                "vars": list(self.vars),
                "pieces": [{"cell": c.to_json(),
                            "terms": [t.to_json() for t in ts]}
                           for c, ts in self.pieces]}

    @staticmethod
    def from_json(data) -> "PFun":
        if data.get("format", "motint.pfun/1") != "motint.pfun/1":
            raise ParseError(f"unsupported function format {data['format']!r}")
        pieces = tuple((PCell.from_json(p["cell"]),
                        tuple(PTerm.from_json(t) for t in p["terms"]))
                       for p in data["pieces"])
        return PFun(tuple(data["vars"]), pieces)


# ---------------------------------------------------------------------------
# closed forms for one-variable sums

@lru_cache(maxsize=None)
def _eulerian(t: int) -> tuple:
    """Numerator N_t of sum_{k>=0} k^t y^k = N_t(y) / (1-y)^(t+1)."""
    if t == 0:
        return (1,)
    prev = _eulerian(t - 1)
    part = P.add(P.mul(P.derivative(prev), (1, -1)), P.scale(prev, t))
    return P.shift_up(part, 1)


@lru_cache(maxsize=None)
def _geom_power_sum(e: int, t: int) -> ARat:
    """sum_{k>=0} k^t L^(e*k) as a ring element; needs e < 0."""
    if e >= 0:
        raise NotIntegrable(f"geometric direction must decay, got exponent {e}")
    num = R.ZERO
    for j, a in enumerate(_eulerian(t)):
        if a:
            num = num + R.from_int(a) * R.L_pow(e * j)
    den = (R.ONE - R.L_pow(e)) ** (t + 1)
    return num / den


@lru_cache(maxsize=None)
def _stirling2(t: int, j: int) -> int:
    if j == 0:
        return 1 if t == 0 else 0
    if j > t:
        return 0
    return j * _stirling2(t - 1, j) + _stirling2(t - 1, j - 1)


def _split_factors(term: PTerm, var: str, start: AffineForm, m: int):
    """Rewrite each factor a(n) with n = start + m*k as u + g*k."""
    out = []
    for f in term.factors:
        u = f.substitute(var, start)
        g = f.coeff(var) * m
        out.append((u, g))
    return out


def _tail_terms(term: PTerm, var: str, start: AffineForm, m: int, e: int):
    """Terms for sum over n = start + m*k, k >= 0, of the given term;
    e = (coefficient of var in lpow) * m < 0."""
    beta0 = term.lpow.substitute(var, start)
    pairs = _split_factors(term, var, start, m)
    growing = [i for i, (_, g) in enumerate(pairs) if g != 0]
    out = []
    for size in range(len(growing) + 1):
        for S in combinations(growing, size):
            gmul = Fraction(1)
            for i in S:
                gmul *= pairs[i][1]
            coef = term.coef * R.from_rational(gmul) * _geom_power_sum(e, size)
            alphas = tuple(pairs[i][0] for i in range(len(pairs)) if i not in S)
            out.append(PTerm(coef, beta0, alphas))
    return out


def _flat_terms(term: PTerm, var: str, start: AffineForm, m: int,
                kmax: AffineForm):
    """Terms for sum over n = start + m*k, 0 <= k <= kmax, when the lpow
    does not move with the variable."""
    beta0 = term.lpow.substitute(var, start)
    pairs = _split_factors(term, var, start, m)
    growing = [i for i, (_, g) in enumerate(pairs) if g != 0]
    out = []
    for size in range(len(growing) + 1):
        for S in combinations(growing, size):
            gmul = Fraction(1)
            for i in S:
                gmul *= pairs[i][1]
            base = tuple(pairs[i][0] for i in range(len(pairs)) if i not in S)
            t = size
            for j in range(t + 1):
                s2 = _stirling2(t, j)
                if s2 == 0:
                    continue
                coef = term.coef * R.from_rational(gmul * Fraction(s2, j + 1))
                falling = tuple(kmax.shift(1 - s) for s in range(j + 1))
                out.append(PTerm(coef, beta0, base + falling))
    return out


# ---------------------------------------------------------------------------
# summation over the innermost variable

def _first_in_class(lo: AffineForm, d: int, val: int, m: int, res: int) -> AffineForm:
    """Smallest point >= lo in the class res mod m, given that d*lo is
    congruent to val modulo d*m on the branch."""
    delta = Fraction((d * res - val) % (d * m), d)
    return lo.shift(delta)


def _sum_cell_term(cell: PCell, term: PTerm, var: str):
    """Disjoint (prefix_cell, terms) pieces for the fiber sums of one term
    over one cell's innermost variable."""
    last = len(cell.vars) - 1
    if cell.vars[last] != var:
        raise FrameMismatch("summation variable must be innermost")
    slot = cell.tower[last]
    prefix = PCell(cell.vars[:last], cell.tower[:last])
    m, res = slot.mod, slot.res
    c = term.lpow.coeff(var)

    # the progression step must move the exponent by an integer
    if (c * m).denominator != 1:
        out = []
        for refined in refine_residue(cell, last, m * (c * m).denominator):
            out += _sum_cell_term(refined, term, var)
        return out

    if slot.lo is None and slot.hi is None:
        nonneg = cell.with_slot(last, VarCell(AffineForm.const_form(0), None, m, res))
        neg = cell.with_slot(last, VarCell(None, AffineForm.const_form(-1), m, res))
        return _sum_cell_term(nonneg, term, var) + _sum_cell_term(neg, term, var)

    if slot.lo is None:
        # reflect n -> -n to sum upward
        flip = AffineForm.make({var: -1})
        flipped_cell = cell.with_slot(
            last, VarCell(slot.hi.scale(-1), None, m, (-res) % m))
        return _sum_cell_term(flipped_cell, term.substitute(var, flip), var)

    if slot.hi is None:
        if c >= 0:
            raise NotIntegrable(
                f"sum over {var} diverges upward: exponent slope {c}")
        out = []
        for pc, d, val in ensure_known_value_mod(prefix, slot.lo, m):
            n0 = _first_in_class(slot.lo, d, val, m, res)
            out.append((pc, tuple(_tail_terms(term, var, n0, m, int(c * m)))))
        return out

    if c > 0:
        flip = AffineForm.make({var: -1})
        flipped_cell = cell.with_slot(
            last, VarCell(slot.hi.scale(-1), slot.lo.scale(-1), m, (-res) % m))
        return _sum_cell_term(flipped_cell, term.substitute(var, flip), var)

    # bounded sum, c <= 0
    out = []
    for pc1, d1, v1 in ensure_known_value_mod(prefix, slot.lo, m):
        n0 = _first_in_class(slot.lo, d1, v1, m, res)
        for pc2, d2, v2 in ensure_known_value_mod(pc1, slot.hi, m):
            # branch where the fiber is nonempty: n0 <= hi
            gap = n0 - slot.hi
            for pc3 in add_ineq(pc2, gap.scale(gap.denom_lcm())):
                eps = Fraction((v2 - d2 * res) % (d2 * m), d2)
                top = slot.hi.shift(-eps)   # last class point <= hi
                if c < 0:
                    up = top.shift(m)       # first class point > hi
                    terms = (_tail_terms(term, var, n0, m, int(c * m))
                             + [t.scale(-R.ONE)
                                for t in _tail_terms(term, var, up, m, int(c * m))])
                else:
                    # flat direction: Faulhaber up to the class top
                    kmax = (top - n0).scale(Fraction(1, m))
                    terms = _flat_terms(term, var, n0, m, kmax)
                out.append((pc3, tuple(terms)))
    return out


def sum_fibers(f: PFun, var: str | None = None) -> PFun:
    """Sum out the innermost variable exactly.  Raises NotIntegrable when
    some piece diverges."""
    if not f.vars:
        raise FrameMismatch("no variables left to sum")
    var = f.vars[-1] if var is None else var
    if var != f.vars[-1]:
        raise FrameMismatch(
            f"{var} is not innermost in {f.vars}; reorder first")
    out_vars = f.vars[:-1]
    result = PFun.zero(out_vars)
    for cell, terms in f.pieces:
        for term in terms:
            for pc, ts in _sum_cell_term(cell, term, var):
                piece = PFun(out_vars, ((pc, ts),))
                result = result + piece
    return result


def sum_all(f: PFun) -> PFun:
    """Sum out all variables, innermost first."""
    while f.vars:
        f = sum_fibers(f)
    return f


def sum_value(f: PFun) -> ARat:
    return sum_all(f).eval_arat({})


def is_integrable(f: PFun) -> bool:
    """Whether the iterated innermost-first sum converges at every level."""
    try:
        sum_all(f)
        return True
    except NotIntegrable:
        return False

"""Constructible functions: Presburger data tensored with residue classes.

A function here lives over a base with residue parameters and value-group
variables.  It is a finite sum of terms, each one

    indicator(guard on residue parameters) * pf(value-group point) (x) rc

where pf is a piecewise Presburger function with coefficients in the ring
of L-rational constants and rc is a formal residue class.  The tensor is
over the scalar subring: a factor of L or L-1 may sit on either side, and
the normal form fixes one side for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import formula as F
from . import ring_a as R
from .cells import AffineForm, PCell, VarCell, universe
from .errors import FrameMismatch, MotintError, NotIntegrable
from .padic import GRElem, PContext, eval_formula
from .presburger import PFun, PTerm, sum_fibers
from .qplus import (ResClass, ResGen, RewriteLog, count_class, from_formula,
                    normal_form as class_normal_form, one as unit_class)


@dataclass(frozen=True)
class CTerm:
    guard: F.Formula
    pf: PFun
    rc: ResClass

    def to_json(self):
        return {"guard": F.formula_str(self.guard),
                "pf": self.pf.to_json(),
                "rc": self.rc.to_json()}


@dataclass(frozen=True)
class MotFun:
    """Sum of guarded tensor terms over a fixed frame."""

    res_vars: tuple            # ((name, depth), ...) residue parameters
    vg_vars: tuple             # value-group variable names, ordered
    terms: tuple               # CTerm entries

    def __post_init__(self):
        object.__setattr__(self, "res_vars", tuple(self.res_vars))
        object.__setattr__(self, "vg_vars", tuple(self.vg_vars))
        depths = dict(self.res_vars)
        kept = []
        for t in self.terms:
            if t.pf.vars != self.vg_vars:
                raise FrameMismatch(
                    f"term over {t.pf.vars} in a function over {self.vg_vars}")
            for v in F.free_vars(t.guard):
                if v.var_sort.kind != "res":
                    raise FrameMismatch(
                        f"guard variable {v.name} is not residue-sorted")
                if depths.get(v.name) != v.var_sort.depth:
                    raise FrameMismatch(
                        f"guard variable {v.name}:{v.var_sort.depth} is not "
                        f"a declared parameter")
            if not t.pf.is_zero_fun() and not t.rc.is_zero():
                kept.append(t)
        object.__setattr__(self, "terms", tuple(kept))

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(res_vars=(), vg_vars=()) -> "MotFun":
        return MotFun(tuple(res_vars), tuple(vg_vars), ())

    @staticmethod
    def unit(res_vars=(), vg_vars=()) -> "MotFun":
        return MotFun.from_pfun(PFun.constant(tuple(vg_vars), R.ONE),
                                res_vars)

    @staticmethod
    def from_pfun(pf: PFun, res_vars=()) -> "MotFun":
        return MotFun(tuple(res_vars), pf.vars,
                      (CTerm(F.TRUE, pf, unit_class()),))

    @staticmethod
    def from_class(rc: ResClass, res_vars=(), vg_vars=()) -> "MotFun":
        return MotFun(tuple(res_vars), tuple(vg_vars),
                      (CTerm(F.TRUE, PFun.constant(tuple(vg_vars), R.ONE),
                             rc),))

    @staticmethod
    def indicator(res_vars, vg_vars, guard: F.Formula = F.TRUE,
                  cells=None) -> "MotFun":
        vg_vars = tuple(vg_vars)
        cells = tuple(cells) if cells is not None else (universe(vg_vars),)
        return MotFun(tuple(res_vars), vg_vars,
                      (CTerm(guard, PFun.indicator(vg_vars, cells),
                             unit_class()),))

    # -- semiring -----------------------------------------------------

    def _check(self, other: "MotFun") -> None:
        if self.res_vars != other.res_vars or self.vg_vars != other.vg_vars:
            raise FrameMismatch(
                f"({self.res_vars},{self.vg_vars}) vs "
                f"({other.res_vars},{other.vg_vars})")

    def __add__(self, other: "MotFun") -> "MotFun":
        self._check(other)
        return MotFun(self.res_vars, self.vg_vars, self.terms + other.terms)

    def __mul__(self, other: "MotFun") -> "MotFun":
        self._check(other)
        out = []
        for a in self.terms:
            for b in other.terms:
                g = F.simplify(F.land(a.guard, b.guard))
                if isinstance(g, F.FalseF):
                    continue
                out.append(CTerm(g, a.pf * b.pf, a.rc * b.rc))
        return MotFun(self.res_vars, self.vg_vars, tuple(out))

    def scale(self, c: R.ARat) -> "MotFun":
        return MotFun(self.res_vars, self.vg_vars,
                      tuple(CTerm(t.guard, t.pf.scale(c), t.rc)
                            for t in self.terms))

    def scale_class(self, rc: ResClass) -> "MotFun":
        return MotFun(self.res_vars, self.vg_vars,
                      tuple(CTerm(t.guard, t.pf, t.rc * rc)
                            for t in self.terms))

    # -- frame maps ---------------------------------------------------

    def extend_vg(self, new_vg) -> "MotFun":
        new_vg = tuple(new_vg)
        return MotFun(self.res_vars, new_vg,
                      tuple(CTerm(t.guard, t.pf.extend(new_vg), t.rc)
                            for t in self.terms))

    def extend_res(self, new_res) -> "MotFun":
        new_res = tuple(new_res)
        it = iter(new_res)
        if any(rv not in it for rv in self.res_vars):
            raise FrameMismatch(f"{self.res_vars} not within {new_res}")
        return MotFun(new_res, self.vg_vars, self.terms)

    def reorder_vg(self, new_vg) -> "MotFun":
        new_vg = tuple(new_vg)
        return MotFun(self.res_vars, new_vg,
                      tuple(CTerm(t.guard, t.pf.reorder(new_vg), t.rc)
                            for t in self.terms))

    def to_json(self):
        return {"format": "motint.motfun/1",
                "res_vars": [[n, d] for n, d in self.res_vars],
                "vg_vars": list(self.vg_vars),
                "terms": [t.to_json() for t in self.terms]}

    @staticmethod
    def from_json(data) -> "MotFun":
        res_vars = tuple((n, int(d)) for n, d in data["res_vars"])
        vg_vars = tuple(data["vg_vars"])
        defaults = {n: F.RES(d) for n, d in res_vars}
        terms = tuple(
            CTerm(F.parse_formula(t["guard"], defaults),
                  PFun.from_json(t["pf"]),
                  ResClass.from_json(t["rc"]))
            for t in data["terms"])
        return MotFun(res_vars, vg_vars, terms)


def semiring(a: MotFun, b: MotFun, op: str) -> MotFun:
    if op == "+":
        return a + b
    if op in ("*", "x"):
        return a * b
    raise MotintError(f"unknown semiring operation {op!r}")


# ---------------------------------------------------------------------------
# pullback along simple value-group substitutions

def pullback_vg_affine(a: MotFun, name: str, sign: int = 1,
                       delta: int = 0) -> MotFun:
    """Precompose with the map sending the named coordinate to
    sign*z + delta.  Only unimodular maps are bijections on integers."""
    if sign not in (1, -1):
        raise MotintError("pullback needs coefficient 1 or -1 on "
                          "a value-group coordinate")
    if name not in a.vg_vars:
        raise FrameMismatch(f"{name} is not a value-group variable")
    return MotFun(a.res_vars, a.vg_vars,
                  tuple(CTerm(t.guard, _map_pfun_var(t.pf, name, sign, delta),
                              t.rc)
                        for t in a.terms))


def _map_pfun_var(pf: PFun, name: str, sign: int, delta: int) -> PFun:
    form = AffineForm.make({name: Fraction(sign)}, Fraction(delta))
    pieces = []
    for cell, terms in pf.pieces:
        i = cell.index(name)
        tower = list(cell.tower)
        vc = tower[i]
        # lo <= sign*z + delta <= hi pulls back to bounds on z
        if sign == 1:
            lo = vc.lo.shift(-delta) if vc.lo is not None else None
            hi = vc.hi.shift(-delta) if vc.hi is not None else None
            res = (vc.res - delta) % vc.mod
        else:
            lo = vc.hi.scale(-1).shift(delta) if vc.hi is not None else None
            hi = vc.lo.scale(-1).shift(delta) if vc.lo is not None else None
            res = (delta - vc.res) % vc.mod
        tower[i] = VarCell(lo, hi, vc.mod, res)
        for j in range(i + 1, len(tower)):
            w = tower[j]
            tower[j] = VarCell(
                w.lo.substitute(name, form) if w.lo is not None else None,
                w.hi.substitute(name, form) if w.hi is not None else None,
                w.mod, w.res)
        pieces.append((PCell(cell.vars, tuple(tower)),
                       tuple(t.substitute(name, form) for t in terms)))
    return PFun(pf.vars, tuple(pieces))


# ---------------------------------------------------------------------------
# normal form

def _torus_factor(conjunct: F.Formula, name: str, depth: int) -> bool:
    """Does the conjunct say exactly 'the variable is a unit'?"""
    if not isinstance(conjunct, F.Not) or not isinstance(conjunct.body, F.Eq):
        return False
    eq = conjunct.body
    for v_side, z_side in ((eq.left, eq.right), (eq.right, eq.left)):
        if not (isinstance(z_side, F.IntLit) and z_side.value == 0):
            continue
        if depth == 1 and isinstance(v_side, F.Var) and v_side.name == name:
            return True
        if (depth > 1 and isinstance(v_side, F.Proj) and v_side.dst == 1
                and isinstance(v_side.arg, F.Var)
                and v_side.arg.name == name):
            return True
    return False


def _extract_gen(gen: ResGen):
    """Move scalar content of one generator into a coefficient: its L-power,
    ground conjuncts, and full torus factors.  Returns (coef, ground parts,
    reduced generator or None)."""
    coef = R.L_pow(gen.lpow)
    parts = list(_gen_conjuncts(gen.phi))
    ground = [p for p in parts if not F.free_vars(p)]
    parts = [p for p in parts if F.free_vars(p)]
    vars_ = list(gen.vars)
    changed = True
    while changed:
        changed = False
        for name, depth in vars_:
            touching = [p for p in parts
                        if name in {v.name for v in F.free_vars(p)}]
            if len(touching) == 1 and _torus_factor(touching[0], name, depth):
                coef = coef * R.L_pow(depth - 1) * (R.L - R.ONE)
                parts.remove(touching[0])
                vars_.remove((name, depth))
                changed = True
                break
            if not touching:
                coef = coef * R.L_pow(depth)
                vars_.remove((name, depth))
                changed = True
                break
    if not vars_ and not parts:
        return coef, ground, None
    return coef, ground, ResGen(tuple(vars_), F.land(*parts) if parts
                                else F.TRUE, 0)


def _gen_conjuncts(phi: F.Formula) -> tuple:
    if isinstance(phi, F.And):
        return phi.parts
    if isinstance(phi, F.TrueF):
        return ()
    return (phi,)


def _canon_pfun(pf: PFun) -> PFun:
    pieces = []
    for cell, terms in pf.pieces:
        merged: dict = {}
        for t in terms:
            # constant factors and constant L-powers belong in the
            # coefficient, so that terms equal up to scalars share a key
            if any(f.is_constant() and f.const.denominator == 1
                   for f in t.factors):
                coef, keep = t.coef, []
                for f in t.factors:
                    if f.is_constant() and f.const.denominator == 1:
                        coef = coef * R.from_int(int(f.const))
                    else:
                        keep.append(f)
                t = PTerm(coef, t.lpow, tuple(keep))
            if t.lpow.const != 0 and t.lpow.const.denominator == 1:
                t = PTerm(t.coef * R.L_pow(int(t.lpow.const)),
                          t.lpow.shift(-t.lpow.const), t.factors)
            key = (t.lpow, tuple(sorted(t.factors, key=str)))
            if key in merged:
                merged[key] = PTerm(merged[key].coef + t.coef, t.lpow,
                                    key[1])
            else:
                merged[key] = PTerm(t.coef, t.lpow, key[1])
        out = tuple(sorted((t for t in merged.values() if not t.is_zero()),
                           key=lambda t: (str(t.lpow), str(t.coef),
                                          tuple(map(str, t.factors)))))
        if out:
            pieces.append((cell, out))
    pieces.sort(key=lambda p: str(p[0]))
    return PFun(pf.vars, tuple(pieces))


def _reduce_tensor(rc: ResClass, log: RewriteLog | None):
    """Split a class into (coefficient, ground conjuncts, reduced generator)
    items with all scalar content extracted, iterating until stable."""
    work = [(R.ONE, (), g) for g in class_normal_form(rc, log).gens]
    out = []
    while work:
        coef0, ground0, gen = work.pop()
        coef, ground, reduced = _extract_gen(gen)
        coef = coef0 * coef
        ground = ground0 + tuple(ground)
        if reduced is None:
            out.append((coef, ground, None))
            continue
        renorm = class_normal_form(ResClass((reduced,)), log)
        if renorm.gens == (reduced,):
            out.append((coef, ground, reduced))
        else:
            work.extend((coef, ground, g) for g in renorm.gens)
    return out


def normal_form(a: MotFun, log: RewriteLog | None = None) -> MotFun:
    """Canonical presentation: residue classes normalized with scalar
    content (L-powers, torus factors, closed conjuncts) moved to the
    Presburger side, terms grouped by guard and class, pieces sorted."""
    buckets: dict = {}
    for t in a.terms:
        for coef, ground, reduced in _reduce_tensor(t.rc, log):
            guard = F.simplify(F.land(t.guard, *ground))
            if isinstance(guard, F.FalseF):
                continue
            rc2 = unit_class() if reduced is None else ResClass((reduced,))
            pf2 = t.pf.scale(coef)
            key = (F.formula_str(guard),
                   tuple(g.key() for g in rc2.gens))
            if key in buckets:
                prev_guard, prev_pf, prev_rc = buckets[key]
                buckets[key] = (prev_guard, prev_pf + pf2, prev_rc)
            else:
                buckets[key] = (guard, pf2, rc2)
    terms = []
    for key in sorted(buckets):
        guard, pf, rc = buckets[key]
        pf = _canon_pfun(pf)
        if not pf.is_zero_fun():
            terms.append(CTerm(guard, pf, rc))
    return MotFun(a.res_vars, a.vg_vars, tuple(terms))


def is_equal(a: MotFun, b: MotFun) -> str:
    """'equal' when normal forms coincide, otherwise 'unknown'."""
    if normal_form(a) == normal_form(b):
        return "equal"
    return "unknown"


def refute(a: MotFun, b: MotFun, ctxs, rng, tries: int = 40,
           vg_lo: int = -5, vg_hi: int = 5):
    """Search for a specialization witness separating two functions.
    Returns (ctx, env) or None if none was found."""
    a._check(b)
    for _ in range(tries):
        for ctx in ctxs:
            env = {}
            for name, depth in a.res_vars:
                ring = ctx.residue_ring(depth)
                env[name] = ring.make([rng.randrange(ring.char)
                                       for _ in range(ctx.d)])
            for name in a.vg_vars:
                env[name] = rng.randint(vg_lo, vg_hi)
            if specialize(a, ctx, env) != specialize(b, ctx, env):
                return ctx, env
    return None


def equal_or_refute(a: MotFun, b: MotFun, ctxs, rng, tries: int = 40):
    if is_equal(a, b) == "equal":
        return "equal", None
    witness = refute(a, b, ctxs, rng, tries)
    if witness is not None:
        return "differ", witness
    return "unknown", None


# ---------------------------------------------------------------------------
# specialization

def specialize(a: MotFun, ctx: PContext, env: dict | None = None,
               cap: int | None = None) -> Fraction:
    """Evaluate at a prime-power context and a point of the base."""
    env = env or {}
    res_env = {}
    for name, depth in a.res_vars:
        if name not in env:
            raise MotintError(f"no value for residue parameter {name}")
        val = env[name]
        res_env[name] = (val if isinstance(val, GRElem)
                         else ctx.residue_ring(depth).from_int(int(val)))
    vg_env = {}
    for name in a.vg_vars:
        if name not in env:
            raise MotintError(f"no value for value-group variable {name}")
        vg_env[name] = int(env[name])
    total = Fraction(0)
    for t in a.terms:
        if not eval_formula(t.guard, res_env, ctx, cap=cap):
            continue
        val = t.pf.eval_theta(ctx.q, vg_env)
        if val:
            total += val * count_class(t.rc, ctx, cap=cap)
    return total


# ---------------------------------------------------------------------------
# integration over value-group and residue fibers

def _split_guard(guard: F.Formula, out_names: set):
    kept, moved = [], []
    for c in _gen_conjuncts(guard):
        names = {v.name for v in F.free_vars(c)}
        if names & out_names:
            if names <= out_names:
                moved.append(c)
            else:
                raise MotintError(
                    "a guard conjunct links integrated residue variables "
                    f"to kept parameters: {F.formula_str(c)}")
        else:
            kept.append(c)
    return F.land(*kept), F.land(*moved)


def mu_vg_res(a: MotFun, vg_out=None, res_out=None,
              log: RewriteLog | None = None) -> MotFun:
    """Sum over the named value-group variables (an innermost block) and
    the named residue parameters.  Value-group sums go through the exact
    Presburger engine and raise NotIntegrable on divergence; residue
    parameters move into the class side as fresh fiber variables."""
    vg_out = tuple(a.vg_vars if vg_out is None else vg_out)
    res_out = tuple(n for n, _ in a.res_vars) if res_out is None \
        else tuple(res_out)
    if vg_out and tuple(a.vg_vars[-len(vg_out):]) != vg_out:
        raise FrameMismatch(
            f"{vg_out} is not an innermost block of {a.vg_vars}")
    depths = dict(a.res_vars)
    unknown = [n for n in res_out if n not in depths]
    if unknown:
        raise FrameMismatch(f"not residue parameters: {unknown}")
    out_set = set(res_out)
    kept_res = tuple(rv for rv in a.res_vars if rv[0] not in out_set)
    kept_vg = a.vg_vars[:len(a.vg_vars) - len(vg_out)]
    out_vars = tuple((n, depths[n]) for n in res_out)
    terms = []
    for t in a.terms:
        pf = t.pf
        for _ in vg_out:
            pf = sum_fibers(pf)
        guard, moved = _split_guard(t.guard, out_set)
        rc = t.rc
        if out_vars:
            rc = rc * from_formula(out_vars, moved)
        terms.append(CTerm(guard, pf, rc))
    out = MotFun(kept_res, kept_vg, tuple(terms))
    return normal_form(out, log)


def is_integrable(a: MotFun, vg_out=None) -> bool:
    try:
        mu_vg_res(a, vg_out=vg_out, res_out=())
    except NotIntegrable:
        return False
    return True


# ---------------------------------------------------------------------------
# lifting classes back to explicit residue variables

def lift(a: MotFun):
    """Present every class by explicit fiber variables: returns a function
    over an extended residue frame together with the new names, such that
    integrating them back out reproduces the input."""
    taken = {n for n, _ in a.res_vars}
    new_vars = []
    raw = []                        # (guard, pf, gen or None, own vars)
    counter = 0
    for t in a.terms:
        rc_n = class_normal_form(t.rc)
        for gen in rc_n.gens:
            mapping = {}
            for name, depth in gen.vars:
                counter += 1
                fresh = f"w{counter}"
                while fresh in taken:
                    counter += 1
                    fresh = f"w{counter}"
                taken.add(fresh)
                mapping[name] = fresh
                new_vars.append((fresh, depth))
            gen2 = gen.rename(mapping) if mapping else gen
            raw.append((t.guard, t.pf.scale(R.L_pow(gen2.lpow)), gen2))
    terms = []
    for guard, pf, gen in raw:
        own = {n for n, _ in gen.vars}
        pins = [F.Eq(F.Var(w, F.RES(dw)), F.IntLit(0, F.RES(dw)))
                for w, dw in new_vars if w not in own]
        terms.append(CTerm(F.land(guard, gen.phi, *pins), pf, unit_class()))
    lifted = MotFun(a.res_vars + tuple(new_vars), a.vg_vars, tuple(terms))
    return lifted, tuple(n for n, _ in new_vars)

"""Command-line front end.

One binary with subcommands wiring the parsers, the summation and
integration engines, the counting oracle, and the interpolation check.

Configuration values may be preloaded from a ``key = value`` file passed
as ``--config``; explicit flags win over the file.  The enumeration cap
falls back to the MOTINT_CAP environment variable when neither a flag
nor a config entry sets it.  Reports are deterministic for a given
configuration; JSON output is key-sorted and byte-identical across
thread counts.

Exit status: 0 on success (including a verification that matched
everywhere), 2 when a verification ran to completion and found a
mismatch, 1 on any error (bad usage, bad input, resource caps).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from . import formula as F
from . import ring_a as R
from .cplus import specialize
from .errors import CapExceeded, MotintError, ParseError, UnsupportedH
from .padic import PContext, enumeration_cap, eval_formula
from .presburger import PFun, sum_fibers
from .vfint import integrate_iterated
from .zeta import (parse_poly, scalar_of, verify_meuser, zmot_monomial,
                   zprime_count)

CONFIG_KEYS = ("p", "d", "level", "imax", "cap", "threads", "q", "method",
               "json")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Validated numeric/run options shared by the subcommands."""

    command: str
    json_out: bool
    p: int | None = None
    d: int | None = None
    level: int | None = None
    i_max: int | None = None
    cap: int | None = None
    threads: int = 1
    q: int | None = None
    method: str = "auto"

    def __post_init__(self):
        if self.p is not None and not _is_prime(self.p):
            raise ParseError(f"p must be prime, got {self.p}")
        if self.d is not None and self.d < 1:
            raise ParseError(f"d must be >= 1, got {self.d}")
        if self.level is not None and self.level < 1:
            raise ParseError(f"level must be >= 1, got {self.level}")
        if self.i_max is not None and self.i_max < 0:
            raise ParseError(f"imax must be >= 0, got {self.i_max}")
        if self.cap is not None and self.cap < 1:
            raise ParseError(f"cap must be >= 1, got {self.cap}")
        if self.threads < 1:
            raise ParseError(f"threads must be >= 1, got {self.threads}")
        if self.q is not None and self.q < 2:
            raise ParseError(f"q must be >= 2, got {self.q}")
        if self.method not in ("auto", "shells", "cylinder", "enumerate"):
            raise ParseError(f"unknown counting method {self.method!r}")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % k == 0:
            return False
        k += 1
    return True


def _load_config(path: str) -> dict:
    """Read a key = value file; '#' starts a comment, blank lines ignored."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParseError(
                        f"{path}:{lineno}: expected key = value, got {line!r}")
                key, _, value = line.partition("=")
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ParseError(f"cannot read config file {path}: {exc}") from None
    return out


def _merge_config(args: argparse.Namespace) -> None:
    """Fill flag values that were not given from the config file."""
    if not getattr(args, "config", None):
        return
    file_values = _load_config(args.config)
    unknown = set(file_values) - set(CONFIG_KEYS)
    if unknown:
        raise ParseError(
            f"unknown config keys: {', '.join(sorted(unknown))}")
    for key, text in file_values.items():
        if getattr(args, key, None) is not None:
            continue                      # explicit flag wins
        if key == "method":
            setattr(args, key, text)
        elif key == "json":
            if text not in ("true", "false"):
                raise ParseError(f"config json must be true or false, got {text!r}")
            args.json = text == "true"
        else:
            try:
                setattr(args, key, int(text))
            except ValueError:
                raise ParseError(
                    f"config {key} must be an integer, got {text!r}") from None


def _runconfig(args: argparse.Namespace) -> RunConfig:
    return RunConfig(command=args.command,
                     json_out=bool(getattr(args, "json", None)),
                     p=getattr(args, "p", None),
                     d=getattr(args, "d", None),
                     level=getattr(args, "level", None),
                     i_max=getattr(args, "imax", None),
                     cap=getattr(args, "cap", None),
                     threads=getattr(args, "threads", None) or 1,
                     q=getattr(args, "q", None),
                     method=getattr(args, "method", None) or "auto")


# ---------------------------------------------------------------------------
# small parsing helpers


def _sort_of(text: str) -> F.Sort:
    if text == "vf":
        return F.VF
    if text == "vg":
        return F.VG
    if text.startswith("res:"):
        try:
            return F.RES(int(text[4:]))
        except ValueError:
            raise ParseError(f"bad residue depth in sort {text!r}") from None
    raise ParseError(f"unknown sort {text!r} (use vf, vg, or res:N)")


def _parse_sorts(text: str | None) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        name, sep, sort = item.partition("=")
        if not sep or not name.strip():
            raise ParseError(f"bad sort assignment {item!r} (use name=sort)")
        out[name.strip()] = _sort_of(sort.strip())
    return out


def _parse_point(text: str) -> dict:
    env = {}
    for item in text.split(","):
        name, sep, value = item.partition("=")
        if not sep:
            raise ParseError(f"bad point entry {item!r} (use name=integer)")
        try:
            env[name.strip()] = int(value)
        except ValueError:
            raise ParseError(f"point value for {name.strip()!r} must be an "
                             f"integer, got {value!r}") from None
    return env


def _parse_weight(items) -> tuple:
    """Weights 'mult:var:center' with integer mult and rational center."""
    out = []
    for item in items or ():
        parts = item.split(":")
        if len(parts) != 3:
            raise ParseError(f"bad weight {item!r} (use mult:var:center)")
        try:
            mult = int(parts[0])
            center = Fraction(parts[2])
        except ValueError:
            raise ParseError(f"bad weight numbers in {item!r}") from None
        out.append((mult, parts[1].strip(), center))
    return tuple(out)


def _parse_grid(text: str, fallback_p, fallback_d) -> list:
    """Grid syntax 'p=2,3;d=1,2' -> sorted (p, d) pairs."""
    ps, ds = None, None
    if text:
        for group in text.split(";"):
            key, sep, values = group.partition("=")
            key = key.strip()
            if not sep or key not in ("p", "d"):
                raise ParseError(f"bad grid group {group!r} (use p=..;d=..)")
            try:
                parsed = [int(v) for v in values.split(",") if v.strip()]
            except ValueError:
                raise ParseError(f"bad grid values {values!r}") from None
            if not parsed:
                raise ParseError(f"empty grid group {group!r}")
            if key == "p":
                ps = parsed
            else:
                ds = parsed
    if ps is None:
        ps = [fallback_p if fallback_p is not None else 2]
    if ds is None:
        ds = [fallback_d if fallback_d is not None else 1]
    for p in ps:
        if not _is_prime(p):
            raise ParseError(f"grid p must be prime, got {p}")
    for d in ds:
        if d < 1:
            raise ParseError(f"grid d must be >= 1, got {d}")
    return [(p, d) for p in sorted(set(ps)) for d in sorted(set(ds))]


def _fun_str(fun) -> str:
    s = scalar_of(fun)
    return str(s) if s is not None else "<class-valued>"


# ---------------------------------------------------------------------------
# subcommands: each returns (exit_status, report_dict, text_lines)


def _cmd_parse(cfg: RunConfig, args) -> tuple:
    given = [opt for opt in ("formula", "ratfunc", "poly")
             if getattr(args, opt) is not None]
    if len(given) != 1:
        raise ParseError("parse needs exactly one of --formula, --ratfunc, "
                         "--poly")
    kind = given[0]
    text = getattr(args, kind)
    if kind == "formula":
        defaults = _parse_sorts(args.sorts)
        default_sort = _sort_of(args.default_sort) if args.default_sort else None
        f = F.parse_formula(text, defaults, default_sort)
        free = [{"name": v.name, "sort": str(v.var_sort)}
                for v in F.free_vars(f)]
        report = {"kind": "formula", "input": text,
                  "canonical": F.formula_str(f), "free_vars": free}
        lines = [report["canonical"]]
        lines += [f"  {v['name']} : {v['sort']}" for v in free]
    elif kind == "ratfunc":
        a = R.parse_ratfunc(text)
        report = {"kind": "ratfunc", "input": text, "canonical": str(a),
                  "is_nonneg": R.is_nonneg(a)}
        lines = [report["canonical"]]
    else:
        h = parse_poly(text)
        mono = h.as_monomial()
        report = {"kind": "poly", "input": text, "canonical": str(h),
                  "variables": list(h.variables()),
                  "monomial": mono is not None}
        lines = [report["canonical"]]
    return 0, report, lines


def _load_pfun(path: str) -> PFun:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None
    return PFun.from_json(data)


def _cmd_sum(cfg: RunConfig, args) -> tuple:
    pf = _load_pfun(args.file)
    if args.var is not None:
        if args.var not in pf.vars:
            raise ParseError(f"{args.file} has no variable {args.var!r}")
        out = sum_fibers(pf, args.var)
    else:
        out = pf
        while out.vars:
            out = sum_fibers(out)
    report = {"vars_in": list(pf.vars), "vars_out": list(out.vars),
              "result": out.to_json()}
    lines = []
    if not out.vars:
        value = out.eval_arat({})
        report["value"] = str(value)
        lines.append(str(value))
        if cfg.q is not None:
            report["theta"] = {str(cfg.q): str(R.theta(value, cfg.q))}
            lines.append(f"theta_{cfg.q} = {R.theta(value, cfg.q)}")
    else:
        lines.append(f"summed to a function of {', '.join(out.vars)} "
                     f"({len(out.pieces)} pieces)")
    return 0, report, lines


def _cmd_count(cfg: RunConfig, args) -> tuple:
    p = cfg.p if cfg.p is not None else 2
    d = cfg.d if cfg.d is not None else 1
    level = cfg.level if cfg.level is not None else 1
    ctx = PContext(p, d)
    f = F.parse_formula(args.formula, _parse_sorts(args.sorts),
                        F.RES(level))
    free = F.free_vars(f)
    bad = [v.name for v in free if v.var_sort.kind != "res"]
    if bad:
        raise ParseError(
            f"count needs residue-sorted free variables; {', '.join(bad)} "
            f"are not (quantify value-group variables with bounded "
            f"quantifiers)")
    rings = [ctx.residue_ring(v.var_sort.depth) for v in free]
    cap = cfg.cap if cfg.cap is not None else enumeration_cap()
    total = 1
    for ring in rings:
        total *= ring.size
    if total > cap:
        raise CapExceeded(
            f"counting needs {total} assignments, over the cap {cap}",
            needed=total, cap=cap)
    count = 0
    for values in _assignments(rings, cap):
        env = {v.name: x for v, x in zip(free, values)}
        if eval_formula(f, env, ctx, cap=cap):
            count += 1
    report = {"formula": F.formula_str(f), "p": p, "d": d, "level": level,
              "free_vars": [v.name for v in free],
              "assignments": total, "count": count}
    return 0, report, [str(count)]


def _assignments(rings, cap):
    if not rings:
        yield ()
        return
    for head in rings[0].elements(cap=cap):
        for rest in _assignments(rings[1:], cap):
            yield (head,) + rest


def _integrate_common(cfg: RunConfig, args, weight) -> tuple:
    p = cfg.p if cfg.p is not None else 2
    d = cfg.d if cfg.d is not None else 1
    ctx = PContext(p, d)
    order = tuple(v.strip() for v in args.order.split(",") if v.strip())
    if not order:
        raise ParseError("empty --order")
    cond = F.parse_formula(args.cond, _parse_sorts(args.sorts), F.VF)
    strict = not getattr(args, "lenient", False)
    out = integrate_iterated(cond, order, ctx, weight=weight, strict=strict)
    report = {"condition": F.formula_str(cond), "order": list(order),
              "p": p, "d": d,
              "weight": [[m, v, str(c)] for m, v, c in weight],
              "result": out.to_json(), "value": _fun_str(out.value)}
    lines = [f"value = {report['value']}"]
    if not out.integrable:
        lines.append("not integrable in some direction")
    if out.discarded:
        lines.append(f"discarded {len(out.discarded)} measure-zero loci")
    if getattr(args, "count", False):
        spec = specialize(out.value, ctx)
        report["counted"] = {"q": ctx.q, "value": str(spec)}
        lines.append(f"N at q={ctx.q}: {spec}")
    return 0, report, lines


def _cmd_vol(cfg: RunConfig, args) -> tuple:
    return _integrate_common(cfg, args, ())


def _cmd_integrate(cfg: RunConfig, args) -> tuple:
    return _integrate_common(cfg, args, _parse_weight(args.weight))


def _cmd_eval(cfg: RunConfig, args) -> tuple:
    pf = _load_pfun(args.file)
    env = _parse_point(args.point)
    missing = [v for v in pf.vars if v not in env]
    if missing:
        raise ParseError(f"point misses variables: {', '.join(missing)}")
    value = pf.eval_arat(env)
    report = {"point": {k: env[k] for k in sorted(env)},
              "value": str(value)}
    lines = [str(value)]
    if cfg.q is not None:
        report["theta"] = {str(cfg.q): str(R.theta(value, cfg.q))}
        lines.append(f"theta_{cfg.q} = {R.theta(value, cfg.q)}")
    return 0, report, lines


def _cmd_theta(cfg: RunConfig, args) -> tuple:
    if cfg.q is None:
        raise ParseError("theta needs --q")
    a = R.parse_ratfunc(args.expr)
    value = R.theta(a, cfg.q)
    report = {"expr": str(a), "q": cfg.q, "value": str(value)}
    return 0, report, [str(value)]


def _cmd_zeta_motivic(cfg: RunConfig, args) -> tuple:
    rs = zmot_monomial(parse_poly(args.H), p=cfg.p)
    report = {"h": args.H, "series": rs.to_json(), "display": str(rs)}
    return 0, report, [str(rs)]


def _cmd_zeta_count(cfg: RunConfig, args) -> tuple:
    if cfg.p is None or cfg.i_max is None:
        raise ParseError("zeta-count needs --p and --imax")
    d = cfg.d if cfg.d is not None else 1
    cl = zprime_count(args.H, cfg.p, d, cfg.i_max, cap=cfg.cap,
                      method=cfg.method)
    report = {"h": args.H, "p": cfg.p, "d": d, "method": cfg.method,
              "coefficients": cl.to_json()}
    lines = [f"{i}\t{v}" for i, v in enumerate(cl.values)]
    return 0, report, lines


def _cmd_verify_meuser(cfg: RunConfig, args) -> tuple:
    if cfg.i_max is None:
        raise ParseError("verify-meuser needs --imax")
    h = parse_poly(args.H)
    grid = _parse_grid(args.grid, cfg.p, cfg.d)
    try:
        series = zmot_monomial(h)      # one closed form for the whole grid
    except UnsupportedH:
        series = None                  # coefficient valuation depends on p

    def one(pd):
        p, d = pd
        rs = series if series is not None else zmot_monomial(h, p=p)
        return verify_meuser(h, p, d, cfg.i_max, cap=cfg.cap,
                             series=rs, method=cfg.method)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            entries = list(pool.map(one, grid))
    else:
        entries = [one(pd) for pd in grid]
    all_match = all(e["all_match"] for e in entries)
    report = {"h": str(h), "i_max": cfg.i_max, "entries": entries,
              "all_match": all_match}
    lines = [f"H = {h}   i_max = {cfg.i_max}"]
    for e in entries:
        if e["all_match"]:
            lines.append(f"p={e['p']} d={e['d']} q={e['q']}: "
                         f"match ({len(e['rows'])} coefficients)")
        else:
            bad = next(r for r in e["rows"] if not r["match"])
            lines.append(f"p={e['p']} d={e['d']} q={e['q']}: MISMATCH at "
                         f"i={bad['i']}: motivic {bad['motivic']} vs "
                         f"counted {bad['counted']}")
    lines.append("all match: " + ("yes" if all_match else "NO"))
    return (0 if all_match else 2), report, lines


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file with defaults "
                        "for the shared numeric flags")
    common.add_argument("--json", action="store_const", const=True,
                        default=None, help="emit a key-sorted JSON report")
    common.add_argument("--p", type=int, help="residue characteristic")
    common.add_argument("--d", type=int, help="unramified extension degree")
    common.add_argument("--level", type=int, help="residue-ring level")
    common.add_argument("--imax", type=int, help="largest series index")
    common.add_argument("--cap", type=int,
                        help="enumeration cap (default MOTINT_CAP or 10^8)")
    common.add_argument("--threads", type=int, help="worker thread count")
    common.add_argument("--q", type=int, help="residue-field size for theta")
    common.add_argument("--method",
                        choices=("auto", "shells", "cylinder", "enumerate"),
                        help="counting method")

    top = _Parser(prog="motint",
                  description="exact motivic integration calculus with a "
                              "p-adic counting oracle")
    sub = top.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text,
                            description=help_text)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("parse", _cmd_parse, "parse and echo the canonical form of a "
             "formula, a coefficient-ring expression, or a polynomial")
    sp.add_argument("--formula", help="three-sorted formula text")
    sp.add_argument("--ratfunc", help="coefficient-ring expression in L")
    sp.add_argument("--poly", help="polynomial in named variables")
    sp.add_argument("--sorts", help="variable sorts, e.g. 'x=vf,i=vg,s=res:1'")
    sp.add_argument("--default-sort", help="sort for unannotated variables "
                    "(vf, vg, or res:N)")

    sp = add("sum", _cmd_sum, "sum a constructible function over its "
             "integer variables")
    sp.add_argument("--file", required=True,
                    help="JSON file holding a motint.pfun/1 object")
    sp.add_argument("--var", help="sum over this variable only")

    sp = add("count", _cmd_count, "count residue-ring solutions of a formula")
    sp.add_argument("--formula", required=True)
    sp.add_argument("--sorts", help="variable sorts, e.g. 'x=res:2'")

    sp = add("vol", _cmd_vol, "motivic volume of a valued-field condition")
    sp.add_argument("--cond", required=True, help="condition on VF variables")
    sp.add_argument("--order", required=True,
                    help="integration order, outermost first, e.g. 't,x'")
    sp.add_argument("--sorts", help="extra variable sorts")
    sp.add_argument("--lenient", action="store_true",
                    help="return a value even when some direction diverges")
    sp.add_argument("--count", action="store_true",
                    help="also apply the counting morphism at (p, d)")

    sp = add("eval", _cmd_eval, "evaluate a constructible function at an "
             "integer point")
    sp.add_argument("--file", required=True,
                    help="JSON file holding a motint.pfun/1 object")
    sp.add_argument("--point", required=True,
                    help="comma list name=integer")

    sp = add("integrate", _cmd_integrate, "integrate a weighted condition "
             "over valued-field variables")
    sp.add_argument("--cond", required=True)
    sp.add_argument("--order", required=True,
                    help="integration order, outermost first")
    sp.add_argument("--weight", action="append", metavar="MULT:VAR:CENTER",
                    help="multiply the integrand by L^(-MULT*ord(VAR-CENTER))"
                         "; repeatable")
    sp.add_argument("--sorts", help="extra variable sorts")
    sp.add_argument("--lenient", action="store_true",
                    help="return a value even when some direction diverges")
    sp.add_argument("--count", action="store_true",
                    help="also apply the counting morphism at (p, d)")

    sp = add("theta", _cmd_theta, "evaluate a coefficient-ring expression "
             "at L = q")
    sp.add_argument("--expr", required=True)

    sp = add("zeta-motivic", _cmd_zeta_motivic, "closed-form rational series "
             "of the valuation-level family of a monomial")
    sp.add_argument("--H", required=True, help="monomial, e.g. 'x^2*y^3'")

    sp = add("zeta-count", _cmd_zeta_count, "exact level-volume coefficients "
             "of the counting series")
    sp.add_argument("--H", required=True, help="polynomial, e.g. 'x^2 + y^2'")

    sp = add("verify-meuser", _cmd_verify_meuser, "check the counting series "
             "against the specialized closed form on a (p, d) grid")
    sp.add_argument("--H", required=True, help="monomial, e.g. 'x*y'")
    sp.add_argument("--grid", help="grid spec like 'p=2,3;d=1,2' "
                    "(defaults to --p/--d)")

    return top


# ---------------------------------------------------------------------------
# entry point


def _emit(report: dict, lines, json_out: bool) -> None:
    if json_out:
        print(json.dumps(report, sort_keys=True, indent=2, default=str))
    else:
        for line in lines:
            print(line)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    json_out = False
    try:
        _merge_config(args)
        cfg = _runconfig(args)
        json_out = cfg.json_out
        status, report, lines = args.fn(cfg, args)
        _emit(report, lines, json_out)
        return status
    except MotintError as exc:
        error = {"error": {"code": type(exc).__name__, "message": str(exc)}}
        if isinstance(exc, CapExceeded):
            error["error"]["needed"] = exc.needed
            error["error"]["cap"] = exc.cap
        if json_out:
            print(json.dumps(error, sort_keys=True, indent=2, default=str))
        else:
            print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

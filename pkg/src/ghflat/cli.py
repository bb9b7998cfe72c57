"""ghflat command line: gallery runs, bound reports, distances and hypothesis checks.

Exit codes: 0 all checks pass, 1 checks ran and some failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as _config
from . import manifold as _manifold

USAGE_ERROR = 2

# numeric flags of `bounds`, with the BoundInputs field each one fills
BOUND_FLAGS = (("m", "m"), ("eps", "eps"), ("du1", "D_U1"), ("du2", "D_U2"), ("lam", "lam"),
               ("v1", "V1"), ("v2", "V2"), ("a1", "A1"), ("a2", "A2"), ("x1", "X1"), ("x2", "X2"),
               ("h1", "H1"), ("h2", "H2"))
REQUIRED = {
    "squeeze": ("m", "eps", "du1", "du2", "v1", "v2", "a1", "a2"),
    "convex": ("m", "eps", "du1", "du2", "v1", "v2", "a1", "a2"),
    "subdiffeo": ("m", "eps", "du1", "du2", "lam", "v1", "v2", "a1", "a2"),
}


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    from .hypotheses import json_safe
    return json.dumps(json_safe(obj), sort_keys=True, indent=1)


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _window(args, cfg):
    w = dict(cfg["window"])
    for key in ("i_max", "j_max", "k_max"):
        v = getattr(args, key, None)
        if v is not None:
            w[key] = v
    if w["j_max"] > w["k_max"]:
        raise UsageError("--jmax must not exceed --kmax")
    return w


def _family(name: str):
    """Gallery name, or a path to a family JSON file."""
    from . import gallery
    from .hypotheses import family_from_obj
    if name in gallery.EXAMPLES:
        return gallery.get(name)
    if os.path.exists(name):
        try:
            with open(name) as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise UsageError(f"{name}: JSON error at line {e.lineno} column {e.colno}: {e.msg}") from None
        return family_from_obj(obj)
    raise UsageError(f"unknown example {name!r}; known: {', '.join(gallery.names())}")


# ---------------------------------------------------------------------------


def cmd_gallery(args, cfg) -> int:
    from . import gallery
    from .hypotheses import check_family
    if args.action == "list":
        for n in gallery.names():
            e = gallery.get(n)
            print(f"{n}\t{e.fidelity}\t{e.summary}")
        return 0
    if not args.name:
        raise UsageError("gallery run needs an example name")
    if args.name not in gallery.EXAMPLES:
        raise UsageError(f"unknown example {args.name!r}; known: {', '.join(gallery.names())}")
    spec = gallery.get(args.name)
    w = _window(args, cfg)
    results = [c.evaluate(cfg["check"]) for c in spec.expected]
    out = args.out or cfg["output"]["dir"]
    claims = {"family": spec.name, "claims": [r.to_obj() for r in results],
              "all_passed": all(r.passed for r in results)}
    _write(os.path.join(out, f"{spec.name}.claims.json"), _dump(claims))
    if not args.claims_only:
        rep = check_family(spec, None, w["i_max"], w["j_max"], w["k_max"], opts=cfg["check"])
        _write(os.path.join(out, f"{spec.name}.report.json"), rep.to_json())
        print(f"routes: {', '.join(rep.routes) or 'none'}")
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  value={_short(r.value)}  target={_short(r.target)}")
    return 0 if claims["all_passed"] else 1


def _short(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def cmd_bounds(args, cfg) -> int:
    from . import bounds, gallery
    formula = bounds.BOUNDS[args.formula]
    given = {flag: getattr(args, flag) for flag, _ in BOUND_FLAGS if getattr(args, flag) is not None}
    if args.from_family:
        if given:
            raise UsageError("give either numeric inputs or --from-family, not both")
        if args.i is None or args.j is None:
            raise UsageError("--from-family needs --i and --j")
        fam = _family(args.from_family)
        b, eps, lam, _, _ = bounds.family_inputs(fam, args.i, args.j, args.k, opts=cfg["check"])
        if b is None:
            print(_dump({"inputs": {"eps": eps, "lam": lam}, "finite": False}))
            return 1
    else:
        missing = [f"--{f}" for f in REQUIRED[args.formula] if f not in given]
        if missing:
            raise UsageError(f"bounds {args.formula} is missing {', '.join(missing)} (or use --from-family)")
        kw = {field: given[flag] for flag, field in BOUND_FLAGS if flag in given}
        kw["m"] = int(kw["m"])
        try:
            b = bounds.BoundInputs(**kw)
        except ValueError as e:
            raise UsageError(str(e)) from None
    rep = formula(b)
    print(_dump({"formula": args.formula, "inputs": b.to_obj(), "report": rep.to_obj()}))
    if args.trace:
        if not args.from_family:
            raise UsageError("--trace needs --from-family")
        fam = _family(args.from_family)
        w = _window(args, cfg)
        from .hypotheses import dyadic
        i_list = dyadic(max(getattr(fam, "i_min", 1), 2), min(w["i_max"], getattr(fam, "i_max", None) or w["i_max"]), 4)
        j_list = dyadic(2, w["j_max"], 2)
        tr = bounds.flat_convergence_trace(fam, i_list=i_list, j_list=j_list, opts=cfg["check"], k=w["k_max"])
        _write(args.trace, tr.to_csv())
    return 0


def _point(text: str):
    try:
        parts = [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"point {text!r} is not 'r' or 'r,phi'") from None
    if not 1 <= len(parts) <= 2:
        raise UsageError(f"point {text!r} is not 'r' or 'r,phi'")
    return tuple(parts) if len(parts) == 2 else (parts[0], 0.0)


def load_manifold(path: str):
    from .profiles import ProfileSyntaxError
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None
    try:
        return _manifold.RotSymManifold.from_json(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: JSON error at line {e.lineno} column {e.colno}: {e.msg}") from None
    except ProfileSyntaxError as e:
        raise UsageError(f"{path}: {e}") from None
    except (ValueError, TypeError) as e:
        raise UsageError(f"{path}: {e}") from None


def cmd_distance(args, cfg) -> int:
    from .geodesics import distance
    M = load_manifold(args.profile)
    p, q = _point(args.p), _point(args.q)
    try:
        d = distance(M, p, q, cfg["grid"])
    except ValueError as e:
        raise UsageError(str(e)) from None
    print(_dump({"p": p, "q": q, **d.to_obj()}))
    return 1 if d.degraded else 0


def cmd_check(args, cfg) -> int:
    from .hypotheses import check_family
    fam = _family(args.family)
    w = _window(args, cfg)
    try:
        rep = check_family(fam, None, w["i_max"], w["j_max"], w["k_max"], opts=cfg["check"])
    except ValueError as e:
        raise UsageError(str(e)) from None
    text = rep.to_json()
    if args.out:
        _write(args.out, text)
    if args.json:
        print(text)
    else:
        for name, v in rep.verdicts.items():
            print(f"{v.status:13s} {name}  {v.note}".rstrip())
        print(f"routes: {', '.join(rep.routes) or 'none'}")
        print("lambda table (i, j, k, value):")
        for r in rep.tables["lambda"]:
            print(f"  {r['i']:4d} {r['j']:4d} {r['k']:4d}  {r['value']:.6g}")
    failed = any(v.status == "fail" for v in rep.verdicts.values())
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghflat", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file merged over the defaults (flags win)")
    p.add_argument("--threads", type=int, help="cap worker threads (same as GHFLAT_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    def window(sp):
        sp.add_argument("--imax", "--i-max", dest="i_max", type=int)
        sp.add_argument("--jmax", "--j-max", dest="j_max", type=int)
        sp.add_argument("--kmax", "--k-max", dest="k_max", type=int)

    g = sub.add_parser("gallery", help="list or run the example gallery")
    g.add_argument("action", choices=("list", "run"))
    g.add_argument("name", nargs="?")
    window(g)
    g.add_argument("--out", help="output directory for the JSON files")
    g.add_argument("--claims-only", action="store_true", help="skip the hypothesis report")

    b = sub.add_parser("bounds", help="evaluate a distance-bound formula")
    b.add_argument("formula", choices=sorted(REQUIRED))
    for flag, _ in BOUND_FLAGS:
        b.add_argument(f"--{flag}", type=float)
    b.add_argument("--from-family", help="gallery example or family JSON")
    b.add_argument("--i", type=int)
    b.add_argument("--j", type=int)
    b.add_argument("--k", type=int)
    b.add_argument("--trace", help="write the convergence trace CSV here")
    window(b)

    d = sub.add_parser("distance", help="distance between two points of a profile manifold")
    d.add_argument("profile", help="manifold JSON file")
    d.add_argument("p", help="r or r,phi")
    d.add_argument("q", help="r or r,phi")
    d.add_argument("--nr", type=int)
    d.add_argument("--nphi", type=int)

    c = sub.add_parser("check", help="hypothesis report for a family")
    c.add_argument("family", help="gallery example or family JSON")
    window(c)
    c.add_argument("--out", help="write the JSON report here")
    c.add_argument("--json", action="store_true", help="print the JSON report")
    return p


COMMANDS = {"gallery": cmd_gallery, "bounds": cmd_bounds, "distance": cmd_distance, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.threads is not None:
        if args.threads < 1:
            print("ghflat: --threads must be positive", file=sys.stderr)
            return USAGE_ERROR
        os.environ["GHFLAT_THREADS"] = str(args.threads)
    over = {}
    if args.command == "distance":
        grid = {k: getattr(args, k) for k in ("nr", "nphi") if getattr(args, k) is not None}
        if grid:
            over["grid"] = grid
    try:
        cfg = _config.load(args.config, over)
    except _config.ConfigError as e:
        print(f"ghflat: {e}", file=sys.stderr)
        return USAGE_ERROR
    _manifold.QUAD_EPSABS = cfg["quadrature"]["epsabs"]
    _manifold.QUAD_EPSREL = cfg["quadrature"]["epsrel"]
    try:
        return COMMANDS[args.command](args, cfg)
    except UsageError as e:
        print(f"ghflat: {e}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())

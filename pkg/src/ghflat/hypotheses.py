"""Numerical hypothesis checks for families with an exhaustion.

Tables over (i, j, k) of restricted diameters, boundary areas, edge volumes,
lambda gaps, curvature minima and smooth-convergence gaps, with a verdict for
each hypothesis and the theorem routes whose checked hypotheses all pass.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import config as _config
from .bounds import decay_slope
from .gallery import ExampleSpec, SingularSet, SplineCluster
from .geodesics import diameter, flat_lambda, lambda_table
from .manifold import (FlatModelSpace, RegionSpec, RotSymManifold, curvature_profile, region_boundary_area,
                       volume)

GROWTH_SLOPE = 0.25     # log-log slope above which a finite window counts as unbounded
DECAY_EXPONENT = 0.5    # "V_j -> 0": fitted decay exponent and
DECAY_RATIO = 0.2       # last value below this fraction of the first
LAMBDA_TOL = 0.02       # lambda_j below this fraction of D_0 counts as zero
RICCI_DRIFT = 0.1       # allowed relative drop of the curvature minimum along i
RICCI_RATIO = 0.75      # or successive drops shrinking at least this fast
RICCI_TOL = 1e-6        # curvature comes from second derivatives of the profiles

HYPOTHESES = ("connected", "smooth-convergence", "codim-2", "m-diam", "m-area", "m-edge-volume",
              "well-embedded", "ricci-lower-bound", "diam-full", "contractibility")
ROUTES = {
    "codim-thm": ("connected", "smooth-convergence", "codim-2", "m-diam", "m-area", "m-edge-volume"),
    "flat-to-settled": ("connected", "smooth-convergence", "m-diam", "m-area", "m-edge-volume", "well-embedded"),
    "Ricci-codim-thm": ("connected", "smooth-convergence", "codim-2", "ricci-lower-bound", "diam-full", "m-area",
                        "m-edge-volume"),
    "c-codim-thm": ("connected", "smooth-convergence", "codim-2", "contractibility", "diam-full", "m-area",
                    "m-edge-volume"),
}


@dataclass
class Verdict:
    status: str  # pass | fail | inconclusive | unverified
    witness: dict = field(default_factory=dict)
    cells: list = field(default_factory=list)
    note: str = ""

    @property
    def passed(self):
        return self.status == "pass"


@dataclass
class HypothesisReport:
    family: str
    window: dict
    tables: dict
    verdicts: dict
    routes: list
    unverified: list = field(default_factory=lambda: ["contractibility"])

    def to_obj(self):
        return json_safe({"family": self.family, "window": self.window, "tables": self.tables,
                       "verdicts": {k: asdict(v) for k, v in self.verdicts.items()}, "routes": self.routes,
                       "unverified": self.unverified})

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True, indent=1)


def json_safe(x):
    """JSON-safe copy: numpy scalars to floats, non-finite numbers to strings."""
    if isinstance(x, dict):
        return {str(k): json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [json_safe(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return x


# ---------------------------------------------------------------------------


def codim_flag(singular) -> str:
    """codim >= 2 | codim 1 | point | none; codim 0 for full-dimensional sets."""
    if isinstance(singular, ExampleSpec):
        singular = singular.singular_set
    if isinstance(singular, dict):
        singular = SingularSet(singular.get("kind", "none"), tuple(singular.get("where", ())),
                               int(singular.get("ambient_dim", 3)))
    kind = singular.kind
    if kind == "none":
        return "none"
    if kind == "point":
        return "point"
    if kind in ("hypersurface", "circles"):
        return "codim 1"
    if kind == "ball":
        return "codim 0"
    if kind in ("submanifold", "codim2"):
        return "codim >= 2"
    raise ValueError(f"unknown singular-set kind {kind!r}")


def codim_at_least_2(flag: str, ambient_dim: int) -> bool:
    return flag == "codim >= 2" or (flag == "point" and ambient_dim >= 2)


def _sample_r(M: RotSymManifold, n=4001):
    lo, hi = M.domain
    x = np.linspace(lo, hi, n)[1:-1]
    return np.union1d(x, [b for b in M.breakpoints() if lo < b < hi])


def check_ricci(family, i_list, H: float | None = None, n: int = 4001) -> dict:
    """Per i: min over sampled r of min(Ric_rad, Ric_tan), with a verdict when H is given."""
    rows = []
    for i in i_list:
        M = family.generator(i)
        if isinstance(M, FlatModelSpace):
            rows.append({"i": int(i), "min_ricci": 0.0, "on_blend": False})
            continue
        if not isinstance(M, RotSymManifold):
            rows.append({"i": int(i), "min_ricci": None, "on_blend": False})
            continue
        c = curvature_profile(M, _sample_r(M, n))
        ric = np.minimum(c.Ric_rad, c.Ric_tan)
        k = int(np.nanargmin(ric))
        row = {"i": int(i), "min_ricci": float(ric[k]), "at_r": float(_sample_r(M, n)[k]),
               "on_blend": bool(c.on_blend[k])}
        if H is not None:
            row["passes"] = bool(ric[k] >= (M.m - 1) * H - RICCI_TOL)
        rows.append(row)
    return {"H": H, "rows": rows}


def dyadic(lo, hi, start=2):
    out, x = [], start
    while x <= hi:
        if x >= lo:
            out.append(x)
        x *= 2
    if hi >= lo and hi not in out:
        out.append(hi)
    return sorted(set(out))


def _smooth_gap(Mi, Minf, W: RegionSpec, n=2001):
    """sup over W of |f_i - f|, |h_i - h| and of their first derivatives."""
    lo, hi = Minf.domain
    gaps = [0.0, 0.0]
    for a, b in W.intervals:
        a, b = max(a, lo), min(b, hi)
        if b <= a:
            continue
        x = np.linspace(a, b, n)[1:-1]
        with np.errstate(all="ignore"):
            for order in (0, 1):
                d = max(np.nanmax(np.abs(Mi.f.d(x, order) - Minf.f.d(x, order))),
                        np.nanmax(np.abs(Mi.h.d(x, order) - Minf.h.d(x, order))))
                gaps[order] = max(gaps[order], float(d))
    return gaps


def _growth(values, index):
    v = np.asarray(values, float)
    x = np.asarray(index, float)
    if len(v) < 2 or np.any(~np.isfinite(v)):
        return math.inf if np.any(~np.isfinite(v)) else 0.0
    if np.all(v <= 0):
        return 0.0
    v = np.maximum(v, 1e-300)
    return float(np.polyfit(np.log(x), np.log(v), 1)[0])


def _bounded(values, index, cells, label):
    if any(not math.isfinite(x) for x in values):
        return Verdict("inconclusive", {label: list(values)}, cells, "non-finite cell: grid quality degraded")
    s = _growth(values, index)
    ok = s <= GROWTH_SLOPE
    return Verdict("pass" if ok else "fail", {label: float(np.max(values)) if len(values) else None,
                                              "growth_slope": s}, cells)


def _decays(values, index, cells, label):
    v = list(values)
    if len(v) < 2:
        return Verdict("inconclusive", {label: v}, cells, "needs two exhaustion levels")
    if all(x <= 1e-12 for x in v):
        return Verdict("pass", {label: v, "decay_exponent": math.inf}, cells)
    expo = -decay_slope(index, v)
    ok = expo > DECAY_EXPONENT and v[-1] < DECAY_RATIO * v[0]
    return Verdict("pass" if ok else "fail", {label: v, "decay_exponent": expo}, cells)


def check_family(family, exhaustion=None, i_max=None, j_max=None, k_max=None, opts: dict | None = None,
                 i_list=None, j_list=None, H: float | None = None) -> HypothesisReport:
    cfg = _config.DEFAULTS
    w = cfg["window"]
    i_max = int(i_max or w["i_max"])
    j_max = int(j_max or w["j_max"])
    k_max = int(k_max or w["k_max"])
    if j_max > k_max:
        raise ValueError("j_max must not exceed k_max")
    o = dict(cfg["check"])
    if opts:
        o.update(opts)
    i_min = getattr(family, "i_min", 1)
    i_max = min(i_max, getattr(family, "i_max", None) or i_max)
    exhaustion = exhaustion or family.default_exhaustion
    i_list = list(i_list) if i_list is not None else dyadic(max(i_min, 2), i_max, 4)
    j_list = list(j_list) if j_list is not None else dyadic(2, j_max, 2)
    k_list = dyadic(min(j_list), k_max, min(j_list))
    name = getattr(family, "name", "family")
    members = {i: family.generator(i) for i in i_list}
    limit = family.limit
    sample = members[i_list[0]]
    kind = ("quantity" if isinstance(sample, SplineCluster) else
            "flat" if isinstance(sample, FlatModelSpace) else "warped")
    W = {j: exhaustion(j) for j in sorted(set(j_list) | set(k_list))}
    pairs = [(i, j) for j in j_list for i in i_list if i >= j]
    if not pairs:
        raise ValueError("window has no pairs with i >= j")

    tables = {"diam": [], "diam_full": [], "area": [], "edge": [], "lambda": [], "ricci": [], "smooth": [],
              "volume": []}

    if kind == "quantity":
        for i in i_list:
            q = members[i]
            tables["diam_full"].append({"i": i, "value": q.diameter_bound(), "source": "closed form"})
            tables["volume"].append({"i": i, "value": q.volume_bound(), "source": "closed form"})
        for i, j in pairs:
            q = members[i]
            tables["diam"].append({"i": i, "j": j, "value": math.pi, "source": "closed form"})
            tables["area"].append({"i": i, "j": j, "value": q.area_bound(), "source": "closed form"})
            tables["edge"].append({"i": i, "j": j, "value": q.edge_bound(), "source": "closed form"})
            tables["smooth"].append({"i": i, "j": j, "order0": 0.0, "order1": 0.0, "source": "construction"})
    else:
        def cell(pair):
            i, j = pair
            M = members[i]
            Wj = W[j]
            out = {}
            if kind == "flat":
                d = diameter(M, Wj)
                out["diam"] = {"value": d.value, "error": 0.0}
                out["area"] = M.boundary_area(Wj)
                out["edge"] = M.volume() - M.volume(Wj)
                ks = [k for k in k_list if k >= j]
                out["lambda"] = [{"k": k, "value": flat_lambda(M, Wj, W.get(k) or exhaustion(k)), "error": 0.0}
                                 for k in ks]
                out["smooth"] = (0.0, 0.0)  # every member is the same flat metric on W_j
                return out
            d = diameter(M, Wj, opts=o)
            out["diam"] = {"value": d.value, "error": d.error}
            out["area"] = region_boundary_area(M, Wj)
            out["edge"] = _complement_volume(M, Wj)
            ks = [k for k in k_list if k >= j]
            Wks = [W.get(k) or exhaustion(k) for k in ks]
            lt = lambda_table(M, Wj, Wks, o)
            out["lambda"] = [{"k": k, "value": r.value, "error": r.error} for k, r in zip(ks, lt)]
            out["smooth"] = tuple(_smooth_gap(M, limit, Wj))
            return out

        cells = _config.parallel_map(cell, pairs)
        for (i, j), c in zip(pairs, cells):
            tables["diam"].append({"i": i, "j": j, **c["diam"]})
            tables["area"].append({"i": i, "j": j, "value": c["area"]})
            tables["edge"].append({"i": i, "j": j, "value": c["edge"]})
            for lk in c["lambda"]:
                tables["lambda"].append({"i": i, "j": j, **lk})
            tables["smooth"].append({"i": i, "j": j, "order0": c["smooth"][0], "order1": c["smooth"][1]})
        for i in i_list:
            M = members[i]
            if kind == "flat":
                tables["diam_full"].append({"i": i, "value": M.diameter(), "error": 0.0})
                tables["volume"].append({"i": i, "value": M.volume()})
            else:
                d = diameter(M, opts=o)
                tables["diam_full"].append({"i": i, "value": d.value, "error": d.error})
                tables["volume"].append({"i": i, "value": float(volume(M))})
    if kind != "quantity":
        tables["ricci"] = check_ricci(family, i_list, H)["rows"]

    verdicts = _verdicts(family, kind, tables, i_list, j_list, H)
    routes = routes_for(verdicts)
    return HypothesisReport(name, {"i_max": i_max, "j_max": j_max, "k_max": k_max, "i": i_list, "j": j_list,
                                   "k": k_list}, tables, verdicts, routes)


def routes_for(verdicts: dict) -> list:
    """Theorems whose every checked hypothesis passed."""
    return [r for r, need in ROUTES.items() if all(h in verdicts and verdicts[h].passed for h in need)]


def _complement_volume(M: RotSymManifold, R: RegionSpec) -> float:
    lo, hi = M.domain
    pieces, cur = [], lo
    for a, b in R.intervals:
        if a > cur:
            pieces.append((cur, a))
        cur = max(cur, b)
    if hi > cur:
        pieces.append((cur, hi))
    return float(volume(M, RegionSpec(pieces))) if pieces else 0.0


def _verdicts(family, kind, tables, i_list, j_list, H):
    v = {}
    # connectedness of M minus S, witnessed by the exhaustion itself
    conn = getattr(family, "connected", True)
    levels = [e for e in tables["area"]]
    comp = {}
    for j in j_list:
        R = family.default_exhaustion(j)
        comp[j] = len(R.intervals)
    ok = conn and all(c == 1 for c in comp.values())
    v["connected"] = Verdict("pass" if ok else "fail", {"components": comp}, [("exhaustion", j) for j in j_list])
    del levels

    # smooth convergence away from S: gaps at orders 0 and 1 shrink along i on every W_j
    bad, wit = [], {}
    for j in j_list:
        rows = sorted((r for r in tables["smooth"] if r["j"] == j), key=lambda r: r["i"])
        if not rows:
            continue
        for order in ("order0", "order1"):
            g = [r[order] for r in rows]
            ii = [r["i"] for r in rows]
            wit[f"j={j}:{order}"] = g
            if g[-1] > 1e-9 and (len(g) < 2 or decay_slope(ii, g) > -GROWTH_SLOPE):
                bad.append((j, order))
    v["smooth-convergence"] = Verdict("fail" if bad else "pass", wit, [("smooth", r["i"], r["j"])
                                                                        for r in tables["smooth"]],
                                      f"no decay at {bad}" if bad else "")

    flag = codim_flag(family.singular_set) if hasattr(family, "singular_set") else "none"
    dim = family.singular_set.ambient_dim if hasattr(family, "singular_set") else 3
    ok = codim_at_least_2(flag, dim) or flag == "none"
    v["codim-2"] = Verdict("pass" if ok else "fail", {"codim_flag": flag}, [("singular_set",)])

    # m-diam: D_j = max_{i >= j} diam_{M_i}(W_j)
    Dj = [max(r["value"] for r in tables["diam"] if r["j"] == j) for j in j_list]
    v["m-diam"] = _bounded(Dj, j_list, [("diam", r["i"], r["j"]) for r in tables["diam"]], "D0")
    Aj = [max(r["value"] for r in tables["area"] if r["j"] == j) for j in j_list]
    v["m-area"] = _bounded(Aj, j_list, [("area", r["i"], r["j"]) for r in tables["area"]], "A0")
    Vj = [max(r["value"] for r in tables["edge"] if r["j"] == j) for j in j_list]
    v["m-edge-volume"] = _decays(Vj, j_list, [("edge", r["i"], r["j"]) for r in tables["edge"]], "V_j")

    # diam(M_i) <= D0, needed for the Ricci route
    dv = [r["value"] for r in tables["diam_full"]]
    v["diam-full"] = _bounded(dv, [r["i"] for r in tables["diam_full"]],
                              [("diam_full", r["i"]) for r in tables["diam_full"]], "D0")

    # well embedded: lambda_0 over the table, lambda_j = value at the largest i and k
    if kind == "quantity" or not tables["lambda"]:
        v["well-embedded"] = Verdict("inconclusive", {}, [], "no lambda data at this fidelity")
    else:
        lam0 = max(r["value"] for r in tables["lambda"])
        D0 = max(Dj) if Dj else 1.0
        lj = {}
        for j in j_list:
            rows = [r for r in tables["lambda"] if r["j"] == j]
            if not rows:
                continue
            imax = max(r["i"] for r in rows)
            kmax = max(r["k"] for r in rows if r["i"] == imax)
            lj[j] = next(r["value"] for r in rows if r["i"] == imax and r["k"] == kmax)
        vals = [lj[j] for j in sorted(lj)]
        tol = LAMBDA_TOL * D0
        if not math.isfinite(lam0):
            status, note = "fail", "lambda_0 is infinite"
        elif all(x <= tol for x in vals):
            status, note = "pass", ""
        elif len(vals) >= 2 and vals[-1] < DECAY_RATIO * vals[0]:
            status, note = "pass", "lambda_j decreasing"
        else:
            status, note = "fail", "lambda_j does not tend to 0"
        v["well-embedded"] = Verdict(status, {"lambda_0": lam0, "lambda_j": lj, "tolerance": tol,
                                              "monotone_in_k": lambda_monotone(tables["lambda"])},
                                     [("lambda", r["i"], r["j"], r["k"]) for r in tables["lambda"]], note)

    # uniform lower Ricci bound
    if kind == "quantity" or not tables["ricci"]:
        v["ricci-lower-bound"] = Verdict("inconclusive", {}, [], "no curvature data at this fidelity")
    else:
        mins = [r["min_ricci"] for r in tables["ricci"]]
        m = getattr(family.generator(i_list[0]), "m", 3)
        if H is not None:
            ok = all(x >= (m - 1) * H - RICCI_TOL for x in mins)
        else:
            ok, floor = ricci_bounded(mins)
        v["ricci-lower-bound"] = Verdict("pass" if ok else "fail", {"min_ricci": mins, "H": H,
                                                                   "estimated_floor": floor if H is None else None},
                                         [("ricci", r["i"]) for r in tables["ricci"]])
    v["contractibility"] = Verdict("unverified", {}, [], "no numeric test for contractibility functions")
    return v


def ricci_bounded(mins) -> tuple:
    """Uniform floor along i: the minima hardly move, or their drops shrink geometrically.

    Returns (bounded, extrapolated floor).
    """
    mins = [float(x) for x in mins]
    if not mins or not all(math.isfinite(x) for x in mins):
        return False, -math.inf
    if mins[-1] >= mins[0] - RICCI_DRIFT * max(1.0, abs(mins[0])):
        return True, min(mins)
    drops = [max(a - b, 0.0) for a, b in zip(mins, mins[1:])]
    if len(drops) >= 2 and drops[-2] > 0 and drops[-1] <= RICCI_RATIO * drops[-2]:
        q = drops[-1] / drops[-2]
        return True, mins[-1] - drops[-1] * q / (1.0 - q)
    return False, -math.inf


def lambda_monotone(rows, slack: float = 1.0) -> dict:
    """lambda_{i,j,k} nonincreasing in k up to the reported error bars."""
    worst = 0.0
    keys = sorted({(r["i"], r["j"]) for r in rows})
    for i, j in keys:
        seq = sorted((r for r in rows if r["i"] == i and r["j"] == j), key=lambda r: r["k"])
        for a, b in zip(seq, seq[1:]):
            if math.isfinite(a["value"]) and math.isfinite(b["value"]):
                excess = b["value"] - a["value"] - slack * (a["error"] + b["error"])
                worst = max(worst, excess)
    return {"holds": worst <= 0.0, "worst_increase": worst}


def run_claims(family, opts: dict | None = None) -> list:
    return [c.evaluate(opts) for c in getattr(family, "expected", [])]


# ---------------------------------------------------------------------------
# User families from JSON


@dataclass
class UserFamily:
    name: str
    members: dict
    limit_space: RotSymManifold
    lo: float
    hi: float
    offset: float
    singular_set: SingularSet
    connected: bool = True
    i_min: int = 1
    expected: list = field(default_factory=list)

    def generator(self, i):
        try:
            return self.members[int(i)]
        except KeyError:
            raise ValueError(f"family {self.name!r} has no member {i}; known: {sorted(self.members)}") from None

    @property
    def limit(self):
        return self.limit_space

    def default_exhaustion(self, j):
        return RegionSpec.interval(self.lo, self.hi - self.offset / j)


def family_from_obj(obj: dict) -> UserFamily:
    """{"name", "members": {i: manifold}, "limit": manifold,
    "exhaustion": {"lo", "hi", "offset"} (W_j = [lo, hi - offset/j]), "singular_set": {...}}."""
    try:
        members = {int(k): RotSymManifold.from_obj(v) for k, v in obj["members"].items()}
        limit = RotSymManifold.from_obj(obj["limit"])
    except KeyError as e:
        raise ValueError(f"family JSON missing key {e}") from None
    ex = obj.get("exhaustion", {})
    lo, hi = limit.domain
    sing = obj.get("singular_set", {"kind": "point", "where": [hi]})
    return UserFamily(obj.get("name", "user family"), members, limit, float(ex.get("lo", lo)),
                      float(ex.get("hi", hi)), float(ex.get("offset", 1.0)),
                      SingularSet(sing.get("kind", "point"), tuple(sing.get("where", ())),
                                  int(sing.get("ambient_dim", limit.m))),
                      bool(obj.get("connected", True)), min(members))

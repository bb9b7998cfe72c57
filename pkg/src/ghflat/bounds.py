"""Explicit upper bounds on GH, intrinsic flat and scalable flat distances.

Three families of formulas: the squeeze lemma (U_i = M_i), the subdomain
theorem (non-convex U_i, heights h and hbar), and its totally convex special
case.  A convergence trace composes them along a family and an exhaustion.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import config as _config
from .geodesics import diameter, distance_gap, hausdorff_gap, lambda_table
from .manifold import (NotBiLipschitz, RegionSpec, RotSymManifold, metric_ratio_epsilon,
                       region_boundary_area, volume)

DELTA_A = 1e-6  # strict "a >" realized as a = (1 + DELTA_A) * infimum
SCHEMA_VERSION = 1
TRACE_COLUMNS = ("i", "j", "epsilon", "lambda", "a", "h", "hbar", "V_excess",
                 "d_GH_bound", "d_F_bound", "d_sF_bound")


@dataclass(frozen=True)
class BoundInputs:
    m: int
    eps: float = 0.0
    D_U1: float = 0.0
    D_U2: float = 0.0
    lam: float = 0.0
    V1: float = 0.0
    V2: float = 0.0
    A1: float = 0.0
    A2: float = 0.0
    X1: float = 0.0
    X2: float = 0.0
    H1: float = 0.0
    H2: float = 0.0

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValueError("dimension m must be positive")
        for name in ("eps", "D_U1", "D_U2", "lam", "V1", "V2", "A1", "A2", "X1", "X2", "H1", "H2"):
            v = getattr(self, name)
            if not (v >= 0) or math.isnan(v):
                raise ValueError(f"{name} must be nonnegative")
        if not math.isfinite(self.eps) or not math.isfinite(self.lam):
            raise ValueError("eps and lambda must be finite")

    def scaled(self, c: float) -> "BoundInputs":
        """Same inputs for the metric c^2 g: lengths times c, m-volumes times c^m."""
        m = self.m
        return BoundInputs(m, self.eps, c * self.D_U1, c * self.D_U2, c * self.lam,
                           c ** m * self.V1, c ** m * self.V2, c ** (m - 1) * self.A1,
                           c ** (m - 1) * self.A2, c ** m * self.X1, c ** m * self.X2,
                           c * self.H1, c * self.H2)

    def to_obj(self):
        return asdict(self)


@dataclass
class BoundReport:
    a: float
    h: float
    hbar: float
    d_GH_bound: float
    d_F_bound: float
    d_sF_bound: float
    a_inf: float = 0.0  # infimum of admissible widths
    provenance: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)

    def to_obj(self):
        return asdict(self)


def width(eps: float, D: float, delta: float = DELTA_A) -> tuple:
    """(infimum, realized) of a > arccos(1/(1+eps)) D / pi."""
    a_inf = math.acos(1.0 / (1.0 + eps)) / math.pi * D
    return a_inf, (1.0 + delta) * a_inf


def _root(x: float, p: int) -> float:
    return x ** (1.0 / p) if x > 0 else 0.0


def squeeze_bounds(b: BoundInputs, delta: float = DELTA_A) -> BoundReport:
    """Global bi-Lipschitz comparison; D_U1, D_U2 are diam(M_1), diam(M_2)."""
    a1_inf, a1 = width(b.eps, b.D_U2, delta)
    a2_inf, a2 = width(b.eps, b.D_U1, delta)
    a, a_inf = max(a1, a2), max(a1_inf, a2_inf)
    m = b.m
    vol = a * (b.V1 + b.V2)
    area = a * (b.A1 + b.A2)
    dF = vol + area
    dsF = _root(vol, m + 1) + _root(area, m)
    src = "squeeze lemma"
    return BoundReport(a, 0.0, 0.0, a, dF, dsF, a_inf,
                       {k: src for k in ("a", "d_GH_bound", "d_F_bound", "d_sF_bound")},
                       {"d_F_volume": vol, "d_F_area": area, "d_F_excess": 0.0})


def heights(b: BoundInputs) -> tuple:
    D = max(b.D_U1, b.D_U2)
    h = math.sqrt(b.lam * (D + b.lam / 4.0))
    s = math.sqrt(b.eps ** 2 + 2.0 * b.eps)
    hbar = max(h, s * b.D_U1, s * b.D_U2)
    return h, hbar


def subdiffeo_bounds(b: BoundInputs, delta: float = DELTA_A) -> BoundReport:
    a_inf, a = width(b.eps, max(b.D_U1, b.D_U2), delta)
    h, hbar = heights(b)
    m = b.m
    dGH = a + 2.0 * hbar + max(b.H1, b.H2)
    V, A, X = b.V1 + b.V2, b.A1 + b.A2, b.X1 + b.X2
    vol = (2.0 * hbar + a) * V
    area = (2.0 * hbar + a) * A
    dF = vol + area + X
    # (hbar + a) inside the first root, (2 hbar + a) inside the second, as stated
    dsF = _root(V * (hbar + a), m + 1) + _root(area + X, m)
    src = "subdomain theorem"
    return BoundReport(a, h, hbar, dGH, dF, dsF, a_inf,
                       {k: src for k in ("a", "h", "hbar", "d_GH_bound", "d_F_bound", "d_sF_bound")},
                       {"d_F_volume": vol, "d_F_area": area, "d_F_excess": X})


def convex_bounds(b: BoundInputs, delta: float = DELTA_A) -> BoundReport:
    """Totally convex U_i (asserted by the caller); D_U are intrinsic diameters."""
    a1_inf, a1 = width(b.eps, b.D_U2, delta)
    a2_inf, a2 = width(b.eps, b.D_U1, delta)
    a, a_inf = max(a1, a2), max(a1_inf, a2_inf)
    m = b.m
    V, A, X = b.V1 + b.V2, b.A1 + b.A2, b.X1 + b.X2
    dGH = a + max(b.H1, b.H2)
    vol, area = a * V, a * A
    dF = vol + area + X
    dsF = _root(vol, m + 1) + _root(area + X, m)
    src = "convex theorem"
    return BoundReport(a, 0.0, 0.0, dGH, dF, dsF, a_inf,
                       {k: src for k in ("a", "d_GH_bound", "d_F_bound", "d_sF_bound")},
                       {"d_F_volume": vol, "d_F_area": area, "d_F_excess": X})


BOUNDS = {"squeeze": squeeze_bounds, "subdiffeo": subdiffeo_bounds, "convex": convex_bounds}


# ---------------------------------------------------------------------------
# Convergence trace


@dataclass
class TraceRow:
    i: int
    j: int
    epsilon: float
    lam: float
    a: float
    h: float
    hbar: float
    V_excess: float
    d_GH_bound: float
    d_F_bound: float
    d_sF_bound: float
    details: dict = field(default_factory=dict)

    def values(self):
        return (self.i, self.j, self.epsilon, self.lam, self.a, self.h, self.hbar, self.V_excess,
                self.d_GH_bound, self.d_F_bound, self.d_sF_bound)


@dataclass
class Trace:
    rows: list
    V0: float
    A0: float
    k: int
    divergent: bool
    limit_estimate: float
    notes: list = field(default_factory=list)

    def row(self, i, j) -> TraceRow:
        for r in self.rows:
            if r.i == i and r.j == j:
                return r
        raise KeyError((i, j))

    def diagonal(self, ratio: int) -> list:
        return [r for r in sorted(self.rows, key=lambda r: r.j) if r.i == ratio * r.j]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([v if isinstance(v, int) else repr(float(v)) for v in r.values()])
        return buf.getvalue()

    def to_obj(self):
        return {"schema_version": SCHEMA_VERSION, "columns": list(TRACE_COLUMNS),
                "rows": [list(r.values()) for r in self.rows], "V0": self.V0, "A0": self.A0,
                "k": self.k, "divergent": self.divergent, "limit_estimate": self.limit_estimate,
                "notes": self.notes}


def _region_minus(domain, R: RegionSpec) -> list:
    """Closure pieces of domain minus R as intervals (possibly degenerate)."""
    lo, hi = domain
    out, cur = [], lo
    for a, b in R.intervals:
        if a > cur:
            out.append((cur, a))
        cur = max(cur, b)
    if hi > cur:
        out.append((cur, hi))
    return out


def _vol_outside(M: RotSymManifold, R: RegionSpec, within=None) -> float:
    """Vol of (within or M) minus R."""
    if within is None:
        pieces = _region_minus(M.domain, R)
    else:
        pieces = []
        for a, b in within.intervals:
            sub = RegionSpec([iv for iv in ((max(a, c), min(b, d)) for c, d in R.intervals) if iv[1] > iv[0]]
                             or [(a, a)])
            pieces += _region_minus((a, b), sub)
    pieces = [(a, b) for a, b in pieces if b > a]
    if not pieces:
        return 0.0
    return float(volume(M, RegionSpec(pieces)))


def decay_slope(x, y) -> float:
    """Least-squares slope of log y against log x; -inf once y reaches 0."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if np.any(y <= 0):
        return -math.inf
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def pair_inputs(Mi: RotSymManifold, ginf: RotSymManifold, Wj: RegionSpec, Wk: RegionSpec, o: dict):
    """Subdomain-theorem inputs for M_1 = (W_k, g_inf), M_2 = (M, g_i), U = W_j.

    Returns (BoundInputs or None when eps or lambda is infinite, eps, lambda, D_U1, D_U2).
    """
    try:
        eps = metric_ratio_epsilon(Mi, ginf, Wj)
    except NotBiLipschitz:
        eps = math.inf
    DU1 = diameter(ginf, Wj, opts=o, ambient=Wk).value
    DU2 = diameter(Mi, Wj, opts=o).value
    lam = distance_gap(Mi, ginf, Wj, None, Wk, o).value
    if not math.isfinite(eps) or not math.isfinite(lam):
        return None, eps, lam, DU1, DU2
    V1, V2 = float(volume(ginf, Wj)), float(volume(Mi, Wj))
    A1, A2 = region_boundary_area(ginf, Wj), region_boundary_area(Mi, Wj)
    X1, X2 = _vol_outside(ginf, Wj, within=Wk), _vol_outside(Mi, Wj)
    H1 = hausdorff_gap(ginf, Wj, o, ambient=Wk).value
    H2 = hausdorff_gap(Mi, Wj, o).value
    return BoundInputs(ginf.m, eps, DU1, DU2, lam, V1, V2, A1, A2, X1, X2, H1, H2), eps, lam, DU1, DU2


def family_inputs(family, i: int, j: int, k: int | None = None, exhaustion=None, opts: dict | None = None):
    """pair_inputs for member i of a gallery family on W_j, with W_k (default k_max) as M_1."""
    o = dict(_config.DEFAULTS["check"])
    if opts:
        o.update(opts)
    exhaustion = exhaustion or family.default_exhaustion
    k = max(int(k if k is not None else _config.DEFAULTS["window"]["k_max"]), int(j))
    lim = family.limit
    ginf = lim if isinstance(lim, RotSymManifold) else lim()
    Mi = family.generator(i)
    if not isinstance(Mi, RotSymManifold):
        raise ValueError("bounds from a family need warped-product members")
    return pair_inputs(Mi, ginf, exhaustion(j), exhaustion(k), o)


def flat_convergence_trace(family, exhaustion=None, i_list=None, j_list=None, pairs=None,
                           opts: dict | None = None, k: int | None = None,
                           regular: RegionSpec | None = None) -> Trace:
    """Flat-distance bounds B(i, j) between (M, g_i) and the settled limit.

    ``family`` exposes generator(i) and limit (a RotSymManifold in the same
    chart), or is an ExampleSpec.  For every (i, j) the subdomain theorem is
    applied to M_1 = (W_k, g_inf), M_2 = (M, g_i), U = W_j with k fixed, and

        B = (hbar + a)(2 V0 + 2 A0) + 2 V_j + F_j

    where V0, A0 are the largest volumes and boundary areas over the window,
    V_j = max_i Vol_{g_i}(M minus W_j) and F_j bounds the flat distance from
    (W_k, g_inf) to the limit through the same theorem with eps = 0.
    """
    cfg = _config.DEFAULTS
    gen = family.generator
    lim = family.limit
    exhaustion = exhaustion or family.default_exhaustion
    regular = regular if regular is not None else getattr(family, "regular_region", None)
    if pairs is None:
        pairs = [(i, j) for j in j_list for i in i_list if i >= j]
    pairs = sorted(set((int(i), int(j)) for i, j in pairs), key=lambda t: (t[1], t[0]))
    k = int(k if k is not None else cfg["window"]["k_max"])
    k = max(k, max(j for _, j in pairs))
    o = dict(cfg["check"])
    if opts:
        o.update(opts)
    ginf = lim if isinstance(lim, RotSymManifold) else lim()
    if ginf.m != gen(pairs[0][0]).m:
        raise ValueError("family and limit dimensions differ")
    m = ginf.m
    Wk = exhaustion(k)
    N = regular  # None: the limit's whole chart
    notes = []

    members = {i: gen(i) for i in sorted({i for i, _ in pairs})}
    js = sorted({j for _, j in pairs})
    W = {j: exhaustion(j) for j in js}

    # window constants
    vols = [float(volume(Mi)) for Mi in members.values()] + [float(volume(ginf, Wk))]
    areas = [region_boundary_area(Mi, W[j]) for Mi in members.values() for j in js]
    areas += [region_boundary_area(ginf, W[j]) for j in js]
    V0, A0 = max(vols), max(areas)
    Vj = {j: max(_vol_outside(Mi, W[j]) for Mi in members.values()) for j in js}

    # F_j: (W_k, g_inf) against the limit itself, eps = 0
    Fj = {}
    for j in js:
        lamF = lambda_table(ginf, W[j], [Wk], o, ambient=N)[0].value
        D1 = diameter(ginf, W[j], opts=o, ambient=Wk).value
        D2 = diameter(ginf, W[j], opts=o, ambient=N).value
        vj = float(volume(ginf, W[j]))
        aj = region_boundary_area(ginf, W[j])
        binF = BoundInputs(m, 0.0, D1, D2, lamF, vj, vj, aj, aj,
                           _vol_outside(ginf, W[j], within=Wk),
                           _vol_outside(ginf, W[j], within=N))
        Fj[j] = subdiffeo_bounds(binF).d_F_bound

    def run(pair):
        i, j = pair
        b, eps, lam, DU1, DU2 = pair_inputs(members[i], ginf, W[j], Wk, o)
        if b is None:
            inf = math.inf
            return TraceRow(i, j, eps, lam, inf, inf, inf, Vj[j], inf, inf, inf,
                            {"F": Fj[j], "D_U1": DU1, "D_U2": DU2})
        rep = subdiffeo_bounds(b)
        B = (rep.hbar + rep.a) * (2 * V0 + 2 * A0) + 2 * Vj[j] + Fj[j]
        return TraceRow(i, j, eps, lam, rep.a, rep.h, rep.hbar, Vj[j], rep.d_GH_bound, B,
                        rep.d_sF_bound, {"F": Fj[j], "D_U1": DU1, "D_U2": DU2,
                                         "theorem_d_F": rep.d_F_bound})

    rows = _config.parallel_map(run, pairs)
    # smooth convergence witness: eps must shrink along i for every j
    divergent = False
    for j in js:
        sel = sorted((r.i, r.epsilon) for r in rows if r.j == j)
        ii, e = [t[0] for t in sel], [t[1] for t in sel]
        if not all(math.isfinite(x) for x in e):
            divergent = True
        elif len(e) > 1 and e[-1] > 1e-9 and decay_slope(ii, e) > -0.25:
            divergent = True
    if divergent:
        notes.append("eps_{i,j} does not tend to 0 on some W_j: trace flagged divergent")
    last = max(rows, key=lambda r: (r.j, r.i))
    return Trace(rows, V0, A0, k, divergent, last.d_F_bound, notes)

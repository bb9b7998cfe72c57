"""Filling bridges g' = dt^2 + G(t) on M x [t1, t2] joining two metrics.

The base metrics are rotationally symmetric, g_i = h_i^2 dr^2 + f_i^2 g_S,
and G(t) is built componentwise:

    F'^2 = min(max(psi_1^2 f_1^2, psi_2^2 f_2^2), f_1^2 + f_2^2)

with psi_i(t) = cos((t - t_i) pi / D_i) on |t - t_i| < D_i/2 and zero
elsewhere (H'^2 likewise).  A bridge with no second metric is the
single-ended hemispherical suspension G = psi_1^2 g_1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from . import config as _config
from ._kernels import PHI_MIRROR, LatticeGraph
from .geodesics import POLE_F, distance as _distance, fold_angle, _as_point
from .manifold import RegionSpec, RotSymManifold, quad, sphere_area, volume, region_boundary_area


class BridgeError(ValueError):
    pass


def psi(t, ti: float, D: float):
    """Hemispherical factor, extended by zero outside |t - t_i| < D/2."""
    t = np.asarray(t, dtype=float)
    u = (t - ti) * math.pi / D
    return np.where(np.abs(t - ti) < D / 2, np.cos(u), 0.0)


def min_separation(eps: float, diam1: float, diam2: float):
    """(a1, a2, a) with a_1 = arccos(1/(1+eps)) diam_2 / pi and a = max."""
    if eps < 0 or diam1 < 0 or diam2 < 0:
        raise ValueError("eps and diameters must be nonnegative")
    c = math.acos(1.0 / (1.0 + eps))
    a1 = c / math.pi * diam2
    a2 = c / math.pi * diam1
    return a1, a2, max(a1, a2)


@dataclass(frozen=True)
class Violation:
    r: float
    t: float
    kind: str        # "admissibility" | "end" | "cap"
    component: str   # "f" | "h"
    amount: float

    def to_obj(self):
        return {"r": self.r, "t": self.t, "kind": self.kind,
                "component": self.component, "amount": self.amount}


@dataclass(frozen=True)
class FillingBridge:
    M1: RotSymManifold
    M2: RotSymManifold | None
    D1: float
    D2: float
    t1: float
    t2: float
    region: RegionSpec | None = None
    scale: float = 1.0  # multiplies G; anything but 1 breaks the construction on purpose

    @property
    def m(self):
        return self.M1.m

    @property
    def single(self) -> bool:
        return self.M2 is None

    @property
    def length(self) -> float:
        return abs(self.t2 - self.t1)

    @property
    def base_interval(self):
        if self.region is not None:
            return self.region.lo, self.region.hi
        return self.M1.domain

    @property
    def degenerate(self) -> bool:
        lo, hi = self.base_interval
        return hi <= lo

    def psis(self, t):
        p1 = psi(t, self.t1, self.D1)
        p2 = None if self.single else psi(t, self.t2, self.D2)
        return p1, p2

    def components(self, r, t):
        """(H'^2, F'^2) broadcast over r and t."""
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        p1, p2 = self.psis(t)
        with np.errstate(all="ignore"):
            f1, h1 = np.abs(self.M1.f(r)) ** 2, np.asarray(self.M1.h(r)) ** 2
            if self.single:
                F = p1 ** 2 * f1
                H = p1 ** 2 * h1
            else:
                f2, h2 = np.abs(self.M2.f(r)) ** 2, np.asarray(self.M2.h(r)) ** 2
                F = np.minimum(np.maximum(p1 ** 2 * f1, p2 ** 2 * f2), f1 + f2)
                H = np.minimum(np.maximum(p1 ** 2 * h1, p2 ** 2 * h2), h1 + h2)
        return self.scale * H, self.scale * F

    def fprime(self, r, t):
        return np.sqrt(self.components(r, t)[1])

    def hprime(self, r, t):
        return np.sqrt(self.components(r, t)[0])

    # -- checks -----------------------------------------------------------
    def _sample_r(self, n):
        lo, hi = self.base_interval
        if hi <= lo:
            return np.array([lo])
        # open ends may be singular, so stay a hair inside
        r = np.linspace(lo, hi, n)
        eps = 1e-9 * (hi - lo)
        r[0] += eps
        r[-1] -= eps
        if self.region is not None:
            r = r[self.region.contains(r, tol=2 * eps)]
        return r

    def admissibility(self, nr: int = 65, nt: int = 65, tol: float = 1e-9) -> list:
        """All sampled violations of the three bridge conditions."""
        r = self._sample_r(nr)
        t = np.unique(np.concatenate([np.linspace(self.t1, self.t2, nt), [self.t1, self.t2]]))
        R, T = np.meshgrid(r, t, indexing="ij")
        H, F = self.components(R, T)
        out = []
        sides = [(self.M1, self.t1, self.D1)]
        if not self.single:
            sides.append((self.M2, self.t2, self.D2))
        mets = []
        with np.errstate(all="ignore"):
            for M, ti, D in sides:
                mets.append((np.asarray(M.h(R)) ** 2 * np.ones_like(R),
                             np.abs(M.f(R)) ** 2 * np.ones_like(R), ti, D))

        def record(mask, kind, comp, amount):
            for a, b in zip(*np.nonzero(mask)):
                out.append(Violation(float(R[a, b]), float(T[a, b]), kind, comp, float(amount[a, b])))

        for h2, f2, ti, D in mets:
            p2 = psi(T, ti, D) ** 2
            near = np.abs(T - ti) < D / 2
            for comp, G, g in (("h", H, h2), ("f", F, f2)):
                with np.errstate(invalid="ignore"):
                    short = p2 * g - G
                    bad = near & np.isfinite(short) & (short > tol * np.maximum(1.0, g))
                    record(bad, "admissibility", comp, short)
                    at = np.isclose(T, ti, rtol=0, atol=1e-12)
                    gap = np.abs(G - g)
                    bad = at & np.isfinite(gap) & (gap > tol * np.maximum(1.0, g))
                    record(bad, "end", comp, gap)
        if not self.single:
            (h1, f1, _, _), (h2, f2, _, _) = mets
            for comp, G, cap in (("h", H, h1 + h2), ("f", F, f1 + f2)):
                with np.errstate(invalid="ignore"):
                    over = G - cap
                    bad = np.isfinite(over) & (over > tol * np.maximum(1.0, cap))
                record(bad, "cap", comp, over)
        return out

    # -- export -----------------------------------------------------------
    def to_obj(self, nr: int = 33, nt: int = 33) -> dict:
        r = self._sample_r(nr)
        t = np.linspace(self.t1, self.t2, nt)
        H, F = self.components(r[:, None], t[None, :])
        return {
            "m": self.m, "t1": self.t1, "t2": self.t2, "D1": self.D1, "D2": self.D2,
            "single_ended": self.single, "scale": self.scale,
            "r": r.tolist(), "t": t.tolist(),
            "f_prime": np.sqrt(F).tolist(), "h_prime": np.sqrt(H).tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_obj(**kw))


def build_bridge(M1: RotSymManifold, M2: RotSymManifold | None, D1: float, D2: float | None,
                 t1: float, t2: float, region: RegionSpec | None = None,
                 check: tuple = (65, 65)) -> FillingBridge:
    """Canonical bridge; raises BridgeError unless every sampled condition holds."""
    if D1 <= 0 or (M2 is not None and (D2 is None or D2 <= 0)):
        raise ValueError("embedding depths must be positive")
    if M2 is not None and M2.m != M1.m:
        raise ValueError("metrics must share the dimension")
    if t2 == t1 and M2 is not None:
        if metric_gap(M1, M2, region) > 1e-12:
            raise BridgeError("end condition unreachable: increase |t2 - t1|")
    B = FillingBridge(M1, M2, float(D1), float(D2 if D2 is not None else D1), float(t1),
                      float(t2), region)
    bad = B.admissibility(*check)
    if any(v.kind == "end" for v in bad):
        raise BridgeError("end condition unreachable: increase |t2 - t1|")
    if bad:
        raise BridgeError(f"bridge inadmissible at {len(bad)} sample points")
    return B


def metric_gap(M1, M2, region=None, n: int = 257) -> float:
    lo, hi = (region.lo, region.hi) if region else M1.domain
    r = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        d = np.concatenate([np.abs(np.abs(M1.f(r)) - np.abs(M2.f(r))),
                            np.abs(np.asarray(M1.h(r)) - np.asarray(M2.h(r)))])
    d = d[np.isfinite(d)]
    return float(d.max()) if d.size else 0.0


def hemisphere(M: RotSymManifold, D: float | None = None) -> FillingBridge:
    """Single-ended bridge over [0, D/2]: the sphere suspension truncated at the top."""
    D = math.pi if D is None else float(D)
    return build_bridge(M, None, D, None, 0.0, D / 2)


def equator_circle(radius: float = 1.0) -> RotSymManifold:
    """S^1 of circumference 2 pi radius as a warped space with a one-point r-range."""
    return RotSymManifold(2, (0.0, 0.0), float(radius), 1.0, name="S^1")


# ---------------------------------------------------------------------------
# Three dimensional lattice on (r, phi, t)


def stencil_3d(order: int = 98):
    """Primitive offsets: 26 (unit cube) or 98 (all of {-2..2}^3 with gcd 1)."""
    if order == 26:
        span = (-1, 0, 1)
    elif order == 98:
        span = (-2, -1, 0, 1, 2)
    else:
        raise ValueError("bridge stencil must be 26 or 98")
    out = []
    for a in span:
        for b in span:
            for c in span:
                if (a, b, c) != (0, 0, 0) and math.gcd(math.gcd(abs(a), abs(b)), abs(c)) == 1:
                    out.append((a, b, c))
    return tuple(out)


def stencil_excess(offsets) -> float:
    """Worst relative excess of a straight path on an isotropic lattice.

    Cheapest combination of unit stencil directions reaching u costs the
    gauge of their convex hull, so the excess is 1/inradius - 1.
    """
    v = np.asarray(offsets, dtype=float)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    hull = ConvexHull(v)
    return float(1.0 / np.min(-hull.equations[:, -1]) - 1.0)


class BridgeGrid:
    """Dijkstra lattice over the half strip in (r, phi) times [t1, t2]."""

    def __init__(self, bridge: FillingBridge, nr: int = 128, nphi: int = 128, nt: int = 64,
                 stencil_order: int = 98):
        self.bridge = B = bridge
        lo, hi = B.base_interval
        self.nr = 1 if B.degenerate else int(nr)
        self.nphi, self.nt = int(nphi), int(nt)
        if self.nphi < 2 or self.nt < 2 or (self.nr < 2 and not B.degenerate):
            raise ValueError("bridge lattice too small")
        self.r = np.linspace(lo, hi, self.nr) if self.nr > 1 else np.array([lo])
        self.phi = np.linspace(0.0, math.pi, self.nphi)
        self.t = np.linspace(B.t1, B.t2, self.nt)
        self.dr = (hi - lo) / (self.nr - 1) if self.nr > 1 else 0.0
        self.dphi = math.pi / (self.nphi - 1)
        self.dt = (B.t2 - B.t1) / (self.nt - 1)
        offsets = stencil_3d(stencil_order)
        if self.nr == 1:
            offsets = tuple(o for o in offsets if o[0] == 0)
        self.offsets = offsets
        self.excess = stencil_excess([(a, b, c) for a, b, c in offsets] if self.nr > 1
                                     else [(b, c) for _, b, c in offsets])

        # metric coefficients on the half-step lattice
        rh = np.linspace(lo, hi, 2 * self.nr - 1) if self.nr > 1 else np.array([lo])
        if self.nr > 1:
            eps = 1e-9 * (hi - lo)
            rh[0] += eps
            rh[-1] -= eps
        th = np.linspace(B.t1, B.t2, 2 * self.nt - 1)
        H2, F2 = B.components(rh[:, None], th[None, :])
        self.H = np.sqrt(np.where(np.isfinite(H2), H2, np.inf))
        self.F = np.sqrt(np.where(np.isfinite(F2), F2, np.inf))
        self.weights = self._weights()
        pole = self.F[::2, ::2] < POLE_F
        if self.nr > 1:
            rows = np.ones(self.nr, bool) if B.region is None else \
                B.region.contains(self.r, tol=1e-9 * max(1.0, self.dr))
        else:
            rows = np.ones(1, bool)
        self.rows = rows
        active = np.repeat(rows, self.nphi * self.nt)
        self.graph = LatticeGraph(self.nr, self.nphi, self.nt, np.array(offsets), self.weights,
                                  active, pole, PHI_MIRROR)
        step = np.nanmax(np.where(np.isfinite(self.H[::2, ::2]), self.H[::2, ::2] * self.dr, 0))
        step = max(step, float(np.nanmax(np.where(np.isfinite(self.F), self.F, 0))) * self.dphi,
                   abs(self.dt))
        self.tol = 2.0 * step

    def _weights(self):
        nr2, nt2 = self.H.shape
        out = np.full((self.nr, self.nt, len(self.offsets)), np.inf)
        bi = 2 * np.arange(self.nr)[:, None]
        bk = 2 * np.arange(self.nt)[None, :]
        for s, (di, dj, dk) in enumerate(self.offsets):
            ei, ek = bi + 2 * di, bk + 2 * dk
            ok = (ei >= 0) & (ei < nr2) & (ek >= 0) & (ek < nt2)
            ok = np.broadcast_to(ok, (self.nr, self.nt))
            I0 = np.broadcast_to(bi, ok.shape)[ok]
            K0 = np.broadcast_to(bk, ok.shape)[ok]

            def L(a, b):
                return np.sqrt((self.H[a, b] * di * self.dr) ** 2
                               + (self.F[a, b] * dj * self.dphi) ** 2 + (dk * self.dt) ** 2)
            with np.errstate(invalid="ignore"):
                w = (L(I0, K0) + 4 * L(I0 + di, K0 + dk) + L(I0 + 2 * di, K0 + 2 * dk)) / 6.0
            w[~np.isfinite(w)] = np.inf
            out[ok, s] = w
        return out

    def node(self, i, j, k):
        return self.graph.index(i, j, k)

    def layer(self, side: int) -> int:
        return 0 if side == 1 else self.nt - 1

    def _cell(self, r, phi):
        if self.nr == 1:
            ii = [0]
        else:
            x = (r - self.r[0]) / self.dr
            i0 = int(min(max(math.floor(x + 1e-9), 0), self.nr - 1))
            ii = [i for i in (i0, i0 + 1) if i < self.nr and self.rows[i]]
        y = phi / self.dphi
        j0 = int(min(max(math.floor(y + 1e-9), 0), self.nphi - 1))
        jj = [j for j in (j0, j0 + 1) if j < self.nphi]
        return [(i, j) for i in ii for j in jj]

    def _local(self, M, i, j, r, phi):
        ri = self.r[i]
        rm = 0.5 * (ri + r)
        with np.errstate(all="ignore"):
            hm, fm = float(M.h(rm)), abs(float(M.f(rm)))
        if not np.isfinite(hm):
            hm = 0.0
        if not np.isfinite(fm) or fm < POLE_F:
            return hm * abs(r - ri)
        return math.hypot(hm * (r - ri), fm * (phi - self.phi[j]))

    def _side_metric(self, side):
        B = self.bridge
        M = B.M1 if side == 1 or B.single else B.M2
        return M

    def seed(self, p, side: int):
        r, phi = p
        k = self.layer(side)
        M = self._side_metric(side)
        cand = self._cell(r, phi)
        nodes = np.array([self.node(i, j, k) for i, j in cand], dtype=np.int64)
        d = np.array([self.bridge.scale ** 0.5 * self._local(M, i, j, r, phi) for i, j in cand])
        return nodes, d

    def solve(self, p, side: int, stop=None):
        nodes, d = self.seed(p, side)
        return self.graph.solve(nodes, d, () if stop is None else stop)

    def read(self, dist, q, side: int) -> float:
        r, phi = q
        k = self.layer(side)
        M = self._side_metric(side)
        best = math.inf
        for i, j in self._cell(r, phi):
            v = dist[self.node(i, j, k)]
            if np.isfinite(v):
                best = min(best, v + self.bridge.scale ** 0.5 * self._local(M, i, j, r, phi))
        return best

    def distance(self, p, side_p: int, q, side_q: int) -> float:
        stop, _ = self.seed(q, side_q)
        dist = self.solve(p, side_p, stop)
        return self.read(dist, q, side_q)

    def error(self, value: float) -> float:
        return self.tol + self.excess * value


def bridge_grid(bridge: FillingBridge, opts: dict | None = None, stencil_order: int = 98):
    o = dict(_config.DEFAULTS["bridge"])
    if opts:
        o.update({k: v for k, v in opts.items() if k in o})
    return BridgeGrid(bridge, o["nr"], o["nphi"], o["nt"], stencil_order)


# ---------------------------------------------------------------------------
# Checks


def base_distance(M: RotSymManifold, p, q, opts: dict | None = None) -> float:
    r1, a1 = _as_point(p)
    r2, a2 = _as_point(q)
    lo, hi = M.domain
    if hi <= lo:
        return abs(float(M.f(lo))) * fold_angle(a2 - a1)
    return float(_distance(M, (r1, a1), (r2, a2), opts))


@dataclass
class EmbeddingCheck:
    max_violation: float
    relative: float
    tol: float
    samples: list = field(default_factory=list)

    def passes(self, rel_tol: float = 0.05) -> bool:
        return self.relative <= rel_tol

    def to_obj(self):
        return {"max_violation": self.max_violation, "relative": self.relative, "tol": self.tol,
                "samples": self.samples}


def verify_geodesic_embedding(bridge: FillingBridge, side: int, samples, grid: BridgeGrid | None = None,
                              opts: dict | None = None) -> EmbeddingCheck:
    """max over sample pairs of L(gamma) - d_{M'}(phi_i(p), phi_i(q))."""
    if side not in (1, 2) or (side == 2 and bridge.single):
        raise ValueError("side must be 1, or 2 for a two-ended bridge")
    grid = grid or bridge_grid(bridge, opts)
    M = bridge.M1 if side == 1 else bridge.M2
    D = bridge.D1 if side == 1 else bridge.D2
    pairs = [(_as_point(p), _as_point(q)) for p, q in samples]

    def run(pq):
        p, q = pq
        L = base_distance(M, p, q, opts)
        if L > D * (1 + 1e-9):
            raise ValueError("sample pair farther apart than the embedding depth")
        if L == 0.0:
            return L, 0.0
        dq = grid.distance(p, side, q, side)
        return L, dq

    res = _config.parallel_map(run, pairs)
    viol = [L - d for L, d in res]
    worst = max(viol) if viol else 0.0
    rows = [{"p": list(p), "q": list(q), "L": L, "d_bridge": d} for (p, q), (L, d) in zip(pairs, res)]
    return EmbeddingCheck(float(worst), float(worst / D), float(grid.tol), rows)


@dataclass
class CrossCheck:
    measured: float
    d_base: float
    law_of_cosines: float
    vertical: float
    error: float

    @property
    def lower_bound(self) -> float:
        return max(self.d_base, self.law_of_cosines, self.vertical)

    def passes(self) -> bool:
        return self.measured >= self.lower_bound - self.error

    def to_obj(self):
        return {"measured": self.measured, "d_base": self.d_base, "law_of_cosines": self.law_of_cosines,
                "vertical": self.vertical, "error": self.error}


def law_of_cosines(d: float, dt: float, D: float) -> float:
    """Rescaled spherical law of cosines; inputs clipped to the hemisphere."""
    x = math.pi * min(d, D) / D
    y = math.pi * min(abs(dt), D / 2) / D
    return D / math.pi * math.acos(max(-1.0, min(1.0, math.cos(x) * math.cos(y))))


def cross_distance_check(bridge: FillingBridge, q1, q2, grid: BridgeGrid | None = None,
                         opts: dict | None = None) -> CrossCheck:
    grid = grid or bridge_grid(bridge, opts)
    p, q = _as_point(q1), _as_point(q2)
    side_q = 1 if bridge.single else 2
    measured = grid.distance(p, 1, q, side_q)
    d1 = base_distance(bridge.M1, p, q, opts)
    dt = bridge.length
    loc = law_of_cosines(d1, dt, bridge.D1)
    dbase = d1
    if not bridge.single:
        d2 = base_distance(bridge.M2, p, q, opts)
        dbase = max(d1, d2)
        loc = max(loc, law_of_cosines(d2, dt, bridge.D2))
    return CrossCheck(float(measured), float(dbase), float(loc), float(dt), grid.error(measured))


# ---------------------------------------------------------------------------
# Volumes


@dataclass
class BridgeVolumes:
    volume: float
    lateral: float
    volume_cap: float
    lateral_cap: float

    def within_caps(self, tol: float = 1e-7) -> bool:
        return (self.volume <= self.volume_cap * (1 + tol) + tol
                and self.lateral <= self.lateral_cap * (1 + tol) + tol)

    def to_obj(self):
        return {"volume": self.volume, "lateral": self.lateral,
                "volume_cap": self.volume_cap, "lateral_cap": self.lateral_cap}


def _t_breaks(B: FillingBridge):
    lo, hi = sorted((B.t1, B.t2))
    pts = [B.t1 + B.D1 / 2, B.t1 - B.D1 / 2]
    if not B.single:
        pts += [B.t2 + B.D2 / 2, B.t2 - B.D2 / 2]
    return tuple(p for p in pts if lo < p < hi)


def bridge_volumes(bridge: FillingBridge) -> BridgeVolumes:
    """(Vol_{m+1}(M'), Vol_m of the lateral boundary) by nested quadrature.

    A one-point base (the circle) is treated as the (m-1)-dimensional fibre.
    """
    B = bridge
    m = B.m
    w = sphere_area(m)
    lo_t, hi_t = sorted((B.t1, B.t2))
    caps_v = sum(_base_volume(M, B) for M in (B.M1, B.M2) if M is not None)
    caps_a = sum(_base_area(M, B) for M in (B.M1, B.M2) if M is not None)
    if hi_t == lo_t:
        return BridgeVolumes(0.0, 0.0, 0.0, 0.0)
    tb = _t_breaks(B)
    if B.degenerate:
        r0 = B.base_interval[0]
        dens = lambda t: w * float(B.fprime(r0, t)) ** (m - 1)
        vol = quad(dens, lo_t, hi_t, tb)
        return BridgeVolumes(vol, 0.0, B.length * caps_v, 0.0)
    R = B.region or B.M1.full
    rb = tuple(sorted(set(B.M1.breakpoints()) | (set(B.M2.breakpoints()) if B.M2 else set())))

    def slab(t):
        def dens(r):
            H, F = B.components(r, t)
            return w * math.sqrt(float(H)) * math.sqrt(float(F)) ** (m - 1)
        return sum(quad(dens, a, b, rb) for a, b in R.intervals if b > a)

    vol = quad(slab, lo_t, hi_t, tb)
    lateral = 0.0
    for a, b in R.intervals:
        for c in (a, b):
            lateral += quad(lambda t: w * float(B.fprime(c, t)) ** (m - 1), lo_t, hi_t, tb)
    return BridgeVolumes(float(vol), float(lateral), B.length * caps_v, B.length * caps_a)


def _base_volume(M: RotSymManifold, B: FillingBridge) -> float:
    if B.degenerate:
        return sphere_area(M.m) * abs(float(M.f(B.base_interval[0]))) ** (M.m - 1)
    return volume(M, B.region)


def _base_area(M: RotSymManifold, B: FillingBridge) -> float:
    if B.degenerate:
        return 0.0
    return region_boundary_area(M, B.region or M.full)

"""Geodesic distances on rotationally symmetric manifolds and flat models.

Distances between (r1, .) and (r2, .) at angular separation dphi depend
only on (r1, r2, dphi), so everything is computed on the half strip
[r_min, r_max] x [0, pi] with metric h^2 dr^2 + f^2 dphi^2.  A Dijkstra
solve on a 16-neighbour lattice gives a robust first answer; Clairaut
shooting (f^2 phi' is constant along geodesics) then supplies exact
geodesic lengths, each an upper bound for the distance.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from threading import Lock

import numpy as np
from scipy.optimize import brentq

from . import config as _config
from ._kernels import PHI_MIRROR, LatticeGraph
from .manifold import FlatModelSpace, RegionSpec, RotSymManifold, radial_length

STENCIL_8 = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))
STENCIL_16 = STENCIL_8 + ((1, 2), (1, -2), (-1, 2), (-1, -2), (2, 1), (2, -1), (-2, 1), (-2, -1))

POLE_F = 1e-12
# worst relative excess of a straight path on the 16- and 8-neighbour stencils
STENCIL_EXCESS = {16: 1.0 / math.cos(math.atan(0.5) / 2) - 1.0, 8: 1.0 / math.cos(math.pi / 8) - 1.0}


def stencil(order: int):
    if order == 16:
        return STENCIL_16
    if order == 8:
        return STENCIL_8
    raise ValueError("stencil must be 8 or 16")


def simpson_weights(H2, F2, dr, dphi, offsets):
    """Edge lengths of straight coordinate segments, Simpson's rule.

    H2, F2 hold h and f on the half-step grid (length 2*nr - 1); the result
    has shape (nr, n_offsets) with inf for edges leaving the lattice.
    """
    nr = (len(H2) + 1) // 2
    out = np.full((nr, len(offsets)), np.inf)
    base = 2 * np.arange(nr)
    for s, (di, dj) in enumerate(offsets):
        end = base + 2 * di
        ok = (end >= 0) & (end < len(H2))
        i0, im, i1 = base[ok], base[ok] + di, end[ok]

        def L(k):
            return np.hypot(H2[k] * di * dr, F2[k] * dj * dphi)
        with np.errstate(invalid="ignore"):
            w = (L(i0) + 4 * L(im) + L(i1)) / 6.0
        w[~np.isfinite(w)] = np.inf
        out[ok, s] = w
    return out


def _half_grid_values(M: RotSymManifold, lo, hi, n):
    rh = np.linspace(lo, hi, n)
    with np.errstate(all="ignore"):
        H = np.asarray(M.h(rh), dtype=float)
        F = np.asarray(M.f(rh), dtype=float)
    # endpoint singularities (e.g. an open end) are evaluated just inside
    for arr, prof in ((H, M.h), (F, M.f)):
        for k, x in ((0, lo + 1e-9 * (hi - lo)), (n - 1, hi - 1e-9 * (hi - lo))):
            if not np.isfinite(arr[k]):
                arr[k] = float(prof(x))
    return rh, H, np.abs(F)


class MetricGrid:
    """Lattice over the half strip with per-edge metric lengths."""

    def __init__(self, M: RotSymManifold, nr: int = 512, nphi: int = 512, stencil_order: int = 16,
                 region: RegionSpec | None = None, _base: "MetricGrid | None" = None,
                 extent: tuple | None = None):
        self.M = M
        self.region = region
        if _base is not None:
            for name in ("nr", "nphi", "r", "phi", "dr", "dphi", "H2", "F2", "offsets",
                         "stencil_order", "weights", "pole_rows", "tol", "_rh"):
                setattr(self, name, getattr(_base, name))
        else:
            # extent lets two metrics in one chart share a lattice
            lo, hi = map(float, extent) if extent is not None else M.domain
            if hi <= lo:
                raise ValueError("grid needs a nondegenerate domain")
            self.nr, self.nphi = int(nr), int(nphi)
            self.stencil_order = int(stencil_order)
            self.r = np.linspace(lo, hi, self.nr)
            self.phi = np.linspace(0.0, math.pi, self.nphi)
            self.dr = (hi - lo) / (self.nr - 1)
            self.dphi = math.pi / (self.nphi - 1)
            self._rh, self.H2, self.F2 = _half_grid_values(M, lo, hi, 2 * self.nr - 1)
            self.offsets = stencil(self.stencil_order)
            self.weights = simpson_weights(self.H2, self.F2, self.dr, self.dphi, self.offsets)
            self.pole_rows = self.F2[::2] < POLE_F
            step = np.maximum(self.H2[::2] * self.dr, self.F2[::2] * self.dphi)
            # sub-cell interpolation error scale
            self.tol = 2.0 * float(np.max(step[np.isfinite(step)]))
        if region is None:
            rows = np.ones(self.nr, bool)
        else:
            rows = region.contains(self.r, tol=1e-9 * max(1.0, self.dr))
            if not rows.any():
                raise ValueError("region contains no lattice rows")
        self.rows = rows
        active = np.repeat(rows, self.nphi)
        off3 = np.array([(di, dj, 0) for di, dj in self.offsets])
        self.graph = LatticeGraph(self.nr, self.nphi, 1, off3, self.weights[:, None, :], active,
                                  self.pole_rows, PHI_MIRROR)

    def masked(self, region: RegionSpec | None) -> "MetricGrid":
        """Same lattice restricted to the rows of ``region`` (induced metric)."""
        return MetricGrid(self.M, region=region, _base=self)

    @property
    def excess(self) -> float:
        return STENCIL_EXCESS[self.stencil_order]

    def node(self, i, j):
        return np.asarray(i) * self.nphi + np.asarray(j)

    # -- sub-cell points ------------------------------------------------
    def _cell(self, r, phi):
        lo = self.r[0]
        x = (r - lo) / self.dr
        y = phi / self.dphi
        i0 = int(min(max(math.floor(x + 1e-9), 0), self.nr - 1))
        j0 = int(min(max(math.floor(y + 1e-9), 0), self.nphi - 1))
        cand = []
        for i in (i0, i0 + 1):
            for j in (j0, j0 + 1):
                if 0 <= i < self.nr and 0 <= j < self.nphi and self.rows[i]:
                    cand.append((i, j))
        return cand

    def _local(self, i, j, r, phi):
        ri, pj = self.r[i], self.phi[j]
        rm = 0.5 * (ri + r)
        with np.errstate(all="ignore"):
            hm, fm = float(self.M.h(rm)), abs(float(self.M.f(rm)))
        if not np.isfinite(hm):
            hm = float(self.H2[2 * i])
        if not np.isfinite(fm):
            fm = float(self.F2[2 * i])
        if self.pole_rows[i]:
            return hm * abs(r - ri)
        return math.hypot(hm * (r - ri), fm * (phi - pj))

    def seed(self, r, phi):
        """Lattice nodes around (r, phi) and their local distances."""
        cand = self._cell(r, phi)
        nodes = [self.node(i, j) for i, j in cand]
        d = [self._local(i, j, r, phi) for i, j in cand]
        return np.array(nodes, dtype=np.int64), np.array(d)

    def read(self, dist, r, phi) -> float:
        cand = self._cell(r, phi)
        best = math.inf
        for i, j in cand:
            v = dist[self.node(i, j)]
            if np.isfinite(v):
                best = min(best, v + self._local(i, j, r, phi))
        return best

    def solve(self, r, phi, stop=None) -> "DistanceField":
        nodes, d = self.seed(r, phi)
        stop_nodes = np.array([], dtype=np.int64) if stop is None else stop
        dist = self.graph.solve(nodes, d, stop_nodes)
        return DistanceField((r, phi), dist, self)

    def solve_nodes(self, nodes, d=None) -> np.ndarray:
        return self.graph.solve(np.asarray(nodes, dtype=np.int64), d)


@dataclass
class DistanceField:
    source: tuple
    dist: np.ndarray
    grid: MetricGrid

    @property
    def resolution(self):
        return (self.grid.nr, self.grid.nphi)

    @property
    def error(self) -> float:
        finite = self.dist[np.isfinite(self.dist)]
        return self.grid.tol + self.grid.excess * (float(finite.max()) if finite.size else 0.0)

    def at(self, r, phi) -> float:
        return self.grid.read(self.dist, r, phi)

    def table(self):
        return self.dist.reshape(self.grid.nr, self.grid.nphi)

    def lipschitz_violation(self) -> float:
        """Largest d(v) - d(u) - w(u, v) over lattice edges (<= 0 when sound)."""
        g = self.grid
        D = self.table()
        worst = -np.inf
        for s, (di, dj) in enumerate(g.offsets):
            if di < 0 or (di == 0 and dj < 0):
                continue
            w = g.weights[:, s]
            i = np.arange(g.nr)
            ok = (i + di < g.nr) & np.isfinite(w)
            if not ok.any():
                continue
            jlo, jhi = max(0, -dj), min(g.nphi, g.nphi - dj)
            a = D[i[ok]][:, jlo:jhi]
            b = D[i[ok] + di][:, jlo + dj:jhi + dj]
            pole = g.pole_rows[i[ok]] | g.pole_rows[i[ok] + di]
            fin = np.isfinite(a) & np.isfinite(b)
            gap = np.where(fin, np.abs(a - b) - w[ok][:, None], -np.inf)
            gap[pole] = -np.inf
            if gap.size:
                worst = max(worst, float(gap.max()))
        return worst


@dataclass
class Distance:
    value: float
    error: float
    degraded: bool = False
    grid_value: float = math.nan
    method: str = "grid"

    def __float__(self):
        return float(self.value)

    def to_obj(self):
        return {"value": self.value, "error": self.error, "degraded": self.degraded,
                "method": self.method}


# ---------------------------------------------------------------------------
# Grid cache


_CACHE: "OrderedDict[tuple, MetricGrid]" = OrderedDict()
_CACHE_LOCK = Lock()


def get_grid(M: RotSymManifold, nr=512, nphi=512, stencil_order=16, region=None,
             extent=None) -> MetricGrid:
    extent = None if extent is None or tuple(map(float, extent)) == M.domain else tuple(map(float, extent))
    key = (id(M), nr, nphi, stencil_order, extent)
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
        if hit is not None and hit.M is M:
            _CACHE.move_to_end(key)
            base = hit
        else:
            base = None
    if base is None:
        base = MetricGrid(M, nr, nphi, stencil_order, extent=extent)
        with _CACHE_LOCK:
            _CACHE[key] = base
            while len(_CACHE) > 24:
                _CACHE.popitem(last=False)
    return base if region is None else base.masked(region)


def grid_opts(opts: dict | None):
    o = dict(_config.DEFAULTS["grid"])
    if opts:
        o.update({k: v for k, v in opts.items() if v is not None})
    return o


# ---------------------------------------------------------------------------
# Clairaut shooting


def graded_rule(nodes: int = 12, q: float = 0.2, levels: int = 14):
    """Quadrature on [0, 1] graded geometrically toward both ends.

    The end panels use t = e*tau^2, so inverse square-root singularities at
    turning points integrate smoothly; the grading resolves the narrow
    boundary layers that appear when the Clairaut constant is tiny.
    """
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    tau, wt = 0.5 * (gx + 1), 0.5 * gw
    cuts = [0.0] + [0.5 * q ** k for k in range(levels, 0, -1)] + [0.5]
    ts, ws = [], []
    for k, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        if k == 0:
            ts.append(b * tau ** 2)
            ws.append(b * 2 * tau * wt)
        else:
            ts.append(a + (b - a) * tau)
            ws.append((b - a) * wt)
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    return np.concatenate([t, 1 - t[::-1]]), np.concatenate([w, w[::-1]])


class Clairaut:
    """Exact geodesic lengths on a surface of revolution confined to [lo, hi].

    A geodesic with Clairaut constant c satisfies f^2 phi' = c (per unit
    speed), so over a stretch on which r is monotone
        dphi = c h / (f sqrt(f^2 - c^2)) dr,   ds = h f / sqrt(f^2 - c^2) dr.
    Turning points sit where f = c.  The branches tried between r1 <= r2
    are: monotone (A), one turning point below r1 (B), one above r2 (C),
    and passage through a pole.
    """

    def __init__(self, M: RotSymManifold, lo=None, hi=None, nodes: int = 12, n_c: int = 32,
                 iters: int = 40):
        self.M = M
        self.lo = M.domain[0] if lo is None else float(lo)
        self.hi = M.domain[1] if hi is None else float(hi)
        self.bps = tuple(p for p in M.breakpoints() if self.lo < p < self.hi)
        self.t, self.tw = graded_rule(nodes)
        self.n_c, self.iters = n_c, iters
        self.rt = np.linspace(self.lo, self.hi, 4097)
        with np.errstate(all="ignore"):
            self.ft = np.abs(np.asarray(M.f(self.rt), dtype=float))
        self.pole_lo = M.pole_min and self.lo == M.domain[0] and self.ft[0] < 1e-8
        self.pole_hi = M.pole_max and self.hi == M.domain[1] and self.ft[-1] < 1e-8

    def S(self, a, b):
        return radial_length(self.M, a, b)

    def _seg(self, c, a, b):
        if b <= a:
            return 0.0, 0.0
        edges = [a] + [p for p in self.bps if a < p < b] + [b]
        phi = length = 0.0
        for x0, x1 in zip(edges[:-1], edges[1:]):
            r = x0 + (x1 - x0) * self.t
            J = (x1 - x0) * self.tw
            with np.errstate(all="ignore"):
                f = np.abs(np.asarray(self.M.f(r), dtype=float))
                h = np.asarray(self.M.h(r), dtype=float)
                dq = f * f - c * c
                bad = dq <= 64 * np.finfo(float).eps * np.maximum(f * f, c * c)
                if bad.any():
                    # roundoff-dominated next to a turning point: first-order Taylor
                    rb = r[bad]
                    tb = self.t[bad]
                    gap = (x1 - x0) * np.minimum(tb, 1 - tb)
                    dq[bad] = 2 * c * np.abs(np.asarray(self.M.f.d(rb, 1), dtype=float)) * gap
                q = np.sqrt(np.maximum(dq, 1e-300))
                phi += float(np.sum(J * c * h / (f * q)))
                length += float(np.sum(J * h * f / q))
        return phi, length

    def _turn(self, c, a, b, below: bool):
        """Nearest r in [a, b] with f(r) = c, searching away from the segment."""
        rt, ft = self.rt, self.ft
        m = (rt >= a) & (rt <= b)
        idx = np.nonzero(m)[0]
        if idx.size == 0:
            return None
        sel = ft[idx] <= c
        if not sel.any():
            return None
        if below:
            k = idx[np.nonzero(sel)[0][-1]]
            x0, x1 = rt[k], min(rt[k + 1] if k + 1 < len(rt) else b, b)
        else:
            k = idx[np.nonzero(sel)[0][0]]
            x0, x1 = max(rt[k - 1] if k > 0 else a, a), rt[k]
        return self._polish(c, x0, x1, keep_right=below)

    def _polish(self, c, x0, x1, keep_right=True):
        f0, f1 = abs(float(self.M.f(x0))) - c, abs(float(self.M.f(x1))) - c
        if f0 == 0:
            return x0
        if f1 == 0:
            return x1
        if f0 * f1 > 0:
            return x0 if abs(f0) < abs(f1) else x1
        # Illinois regula falsi: keeps the bracket, converges superlinearly
        side = 0
        for _ in range(100):
            xm = x1 - f1 * (x1 - x0) / (f1 - f0)
            if not x0 < xm < x1:
                xm = 0.5 * (x0 + x1)
            fm = abs(float(self.M.f(xm))) - c
            if fm == 0:
                return xm
            if f0 * fm < 0:
                x1, f1 = xm, fm
                if side == 1:
                    f0 *= 0.5
                side = 1
            else:
                x0, f0 = xm, fm
                if side == -1:
                    f1 *= 0.5
                side = -1
            if x1 - x0 < 1e-15 * max(1.0, abs(xm)):
                break
        # return the end where f >= c so the segment integrand stays real
        if keep_right:
            return x1 if f1 >= 0 else x0
        return x0 if f0 >= 0 else x1

    def _branch(self, kind, c, r1, r2):
        p, L = self._seg(c, r1, r2)
        if kind == "A":
            return p, L
        if kind == "B":
            rtp = self._turn(c, self.lo, r1, below=True)
            if rtp is None:
                return math.nan, math.nan
            p2, L2 = self._seg(c, rtp, r1)
            return p + 2 * p2, L + 2 * L2
        rtp = self._turn(c, r2, self.hi, below=False)
        if rtp is None:
            return math.nan, math.nan
        p2, L2 = self._seg(c, r2, rtp)
        return p + 2 * p2, L + 2 * L2

    def candidates(self, r1, r2, dphi):
        """Lengths of geodesics joining (r1, 0) and (r2, dphi) in [lo, hi]."""
        r1, r2 = sorted((float(r1), float(r2)))
        dphi = float(dphi)
        out = []
        if dphi < 1e-12:
            out.append((self.S(r1, r2), "radial"))
        if self.pole_lo:
            out.append((self.S(self.lo, r1) + self.S(self.lo, r2), "pole"))
        if self.pole_hi:
            out.append((self.S(r1, self.hi) + self.S(r2, self.hi), "pole"))
        xs = np.linspace(r1, r2, 513)
        with np.errstate(all="ignore"):
            cmax = float(np.min(np.abs(np.asarray(self.M.f(xs), dtype=float))))
        if not cmax > 1e-14 or dphi < 1e-12:
            return out
        u = np.concatenate([np.logspace(-8, -1.3, 8),
                            np.sin(0.5 * math.pi * np.arange(1, 24) / 24),
                            1 - np.logspace(-1.6, -10, 7)])
        cs = cmax * np.unique(np.clip(u, 0, 1 - 1e-10))
        for kind in ("A", "B", "C"):
            if kind == "A" and r1 == r2:
                continue
            g = np.array([self._branch(kind, c, r1, r2)[0] - dphi for c in cs])
            for a in range(len(cs) - 1):
                ga, gb = g[a], g[a + 1]
                if not (np.isfinite(ga) and np.isfinite(gb)) or ga * gb > 0:
                    continue
                c0, c1 = cs[a], cs[a + 1]
                for _ in range(self.iters):
                    cm = 0.5 * (c0 + c1)
                    gm = self._branch(kind, cm, r1, r2)[0] - dphi
                    if not np.isfinite(gm):
                        break
                    if (gm < 0) == (ga < 0):
                        c0, ga = cm, gm
                    else:
                        c1 = cm
                cm = 0.5 * (c0 + c1)
                p, L = self._branch(kind, cm, r1, r2)
                if np.isfinite(L) and abs(p - dphi) < 1e-6:
                    out.append((L, kind))
        return out


_CLAIRAUT: "OrderedDict[tuple, Clairaut]" = OrderedDict()


def clairaut_for(M: RotSymManifold, lo=None, hi=None) -> Clairaut:
    key = (id(M), lo, hi)
    with _CACHE_LOCK:
        hit = _CLAIRAUT.get(key)
        if hit is not None and hit.M is M:
            return hit
    solver = Clairaut(M, lo, hi)
    with _CACHE_LOCK:
        _CLAIRAUT[key] = solver
        while len(_CLAIRAUT) > 64:
            _CLAIRAUT.popitem(last=False)
    return solver


def fold_angle(dphi: float) -> float:
    d = abs(float(dphi)) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def _as_point(p):
    if np.ndim(p) == 0:
        return float(p), 0.0
    p = tuple(p)
    return float(p[0]), float(p[1]) if len(p) > 1 else 0.0


def refined_value(M: RotSymManifold, r1, r2, dphi, region: RegionSpec | None = None):
    """Shortest Clairaut candidate (upper bound), confined to region's component."""
    lo, hi = M.domain
    if region is not None:
        comp = region.component(r1)
        if comp is None or region.component(r2) != comp:
            return math.inf, ""
        lo, hi = comp
    if abs(float(M.f(r1))) < POLE_F or abs(float(M.f(r2))) < POLE_F:
        return radial_length(M, r1, r2), "radial"
    cands = clairaut_for(M, lo, hi).candidates(r1, r2, dphi)
    if not cands:
        return math.inf, ""
    L, kind = min(cands)
    return L, kind


def distance(space, p, q, opts: dict | None = None, *, refine: bool = True,
             region: RegionSpec | None = None) -> Distance:
    """Distance between p and q.

    On a RotSymManifold a point is (r, phi); only |phi_p - phi_q| matters.
    With ``region`` the induced (intrinsic) distance of that region is used.
    """
    if isinstance(space, FlatModelSpace):
        v = float(space.distance(np.asarray(p, float), np.asarray(q, float)))
        return Distance(v, 0.0, False, v, "closed-form")
    M = space
    o = grid_opts(opts)
    r1, a1 = _as_point(p)
    r2, a2 = _as_point(q)
    dphi = fold_angle(a2 - a1)
    for r in (r1, r2):
        if not M.domain[0] - 1e-12 <= r <= M.domain[1] + 1e-12:
            raise ValueError(f"point r={r} outside the domain")
    if r1 == r2 and dphi == 0:
        return Distance(0.0, 0.0, False, 0.0, "trivial")
    grid = get_grid(M, o["nr"], o["nphi"], o["stencil"], region)
    stop_nodes, _ = grid.seed(r2, dphi)
    field_ = grid.solve(r1, 0.0, stop=stop_nodes)
    gv = field_.at(r2, dphi)
    degraded = not np.isfinite(gv)
    err = grid.tol + grid.excess * (gv if np.isfinite(gv) else 0.0)
    value, method = gv, "grid"
    if refine:
        rv, kind = refined_value(M, r1, r2, dphi, region)
        if rv < gv:
            value, method, err = rv, f"clairaut-{kind}", 1e-7 * max(1.0, rv)
            degraded = False
    return Distance(float(value), float(err), bool(degraded), float(gv), method)


# ---------------------------------------------------------------------------
# Sup quantities


def _source_rows(grid: MetricGrid, R: RegionSpec, n: int):
    rows = np.nonzero(grid.rows & R.contains(grid.r, tol=1e-9))[0]
    if rows.size == 0:
        raise ValueError("region contains no lattice rows")
    if rows.size <= n:
        return rows
    pick = np.unique(np.round(np.linspace(0, rows.size - 1, n)).astype(int))
    return rows[pick]


def _target_mask(grid: MetricGrid, R: RegionSpec):
    return np.repeat(R.contains(grid.r, tol=1e-9), grid.nphi)


def _snaps(r, R: RegionSpec, dr):
    """r itself plus any endpoint of R within one lattice step of it."""
    out = [float(r)]
    for a, b in R.intervals:
        for e in (a, b):
            if 0 < abs(e - r) <= dr and e not in out:
                out.append(float(e))
    return out


def _refine_rows(rows_all, top_rows):
    """All lattice rows between the neighbours of each top-ranked source."""
    extra = set()
    pos = {r: k for k, r in enumerate(rows_all)}
    for r in top_rows:
        k = pos[r]
        lo = rows_all[max(k - 1, 0)]
        hi = rows_all[min(k + 1, len(rows_all) - 1)]
        extra.update(range(lo, hi + 1))
    return sorted(extra)


@dataclass
class SupResult:
    value: float
    error: float
    argmax: tuple = ()
    grid_value: float = math.nan
    details: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def to_obj(self):
        return {"value": self.value, "error": self.error, "argmax": list(self.argmax)}


def _flat_box(R: RegionSpec):
    if not R.connected:
        raise ValueError("flat-model regions must be a single box")
    return R.intervals[0]


def diameter(space, R: RegionSpec | None = None, mode: str = "restricted_in_M",
             opts: dict | None = None, ambient: RegionSpec | None = None) -> SupResult:
    """sup of d(x, y) over x, y in R.

    restricted_in_M measures with the distance of the whole space, or of
    ``ambient`` when given; induced_in_R with R's own length metric.
    """
    if mode not in ("restricted_in_M", "induced_in_R"):
        raise ValueError("mode must be restricted_in_M or induced_in_R")
    if isinstance(space, FlatModelSpace):
        return SupResult(_flat_diameter(space, R, mode), 0.0)
    M = space
    R = R or M.full
    if mode == "induced_in_R" and not R.connected:
        raise ValueError("induced diameter needs a connected region")
    o = grid_opts(opts)
    base = get_grid(M, o["nr"], o["nphi"], o["stencil"])
    if mode == "induced_in_R":
        ambient = R
    grid = base.masked(ambient) if ambient is not None else base
    tmask = _target_mask(grid, R)
    rows_all = np.nonzero(grid.rows & R.contains(grid.r, tol=1e-9))[0]
    src = _source_rows(grid, R, o["sources"])

    def run(i):
        d = grid.solve_nodes([grid.node(i, 0)])
        d = np.where(tmask & np.isfinite(d), d, -np.inf)
        k = int(np.argmax(d))
        return float(d[k]), i, k

    res = _config.parallel_map(run, src)
    res.sort(key=lambda t: -t[0])
    top = [t[1] for t in res[:o["top"]]]
    more = [i for i in _refine_rows(list(rows_all), top) if i not in set(src)]
    res += _config.parallel_map(run, more)
    res.sort(key=lambda t: (-t[0], t[1], t[2]))
    gval = res[0][0]
    # exact refinement of the leading pairs
    best, arg = -math.inf, ()
    region = ambient
    for val, i, k in res[:o["top"]]:
        ti, tj = divmod(k, grid.nphi)
        rv, _ = refined_value(M, grid.r[i], grid.r[ti], grid.phi[tj], region)
        v = min(val, rv)
        if v > best:
            best, arg = v, (float(grid.r[i]), 0.0, float(grid.r[ti]), float(grid.phi[tj]))
        # lattice rows miss the region's ends; snap near-boundary pairs onto them,
        # capped by the triangle inequality through the lattice pair
        for r1 in _snaps(grid.r[i], R, grid.dr):
            for r2 in _snaps(grid.r[ti], R, grid.dr):
                if (r1, r2) == (grid.r[i], grid.r[ti]):
                    continue
                rv, _ = refined_value(M, r1, r2, grid.phi[tj], region)
                cap = val + radial_length(M, *sorted((r1, grid.r[i]))) + radial_length(M, *sorted((r2, grid.r[ti])))
                v = min(rv, cap)
                if math.isfinite(v) and v > best:
                    best, arg = v, (float(r1), 0.0, float(r2), float(grid.phi[tj]))
    # two points on one meridian are exactly their radial length apart
    for a, b in (ambient or M.full).intervals:
        ends = [x for iv in R.intervals for x in iv if a - 1e-12 <= x <= b + 1e-12]
        if len(ends) >= 2:
            exact = radial_length(M, min(ends), max(ends))
            if exact > best:
                best, arg = exact, (min(ends), 0.0, max(ends), 0.0)
    err = grid.tol + grid.excess * gval
    return SupResult(float(best), float(err), arg, float(gval))


def _flat_diameter(space: FlatModelSpace, R, mode):
    if R is None:
        return space.diameter()
    a, b = _flat_box(R)
    s = b - a
    if space.kind == "flat_torus" and mode == "restricted_in_M":
        return math.sqrt(2) * min(s, space.L / 2)
    return math.sqrt(2) * s


def lambda_gap(space, Wj: RegionSpec, Wk: RegionSpec, opts: dict | None = None) -> SupResult:
    """sup over x, y in W_j of |d_{W_k}(x, y) - d_M(x, y)|."""
    if isinstance(space, FlatModelSpace):
        return SupResult(flat_lambda(space, Wj, Wk), 0.0)
    return lambda_table(space, Wj, [Wk], opts)[0]


def lambda_table(M: RotSymManifold, Wj: RegionSpec, Wks, opts: dict | None = None,
                 ambient: RegionSpec | None = None) -> list:
    """lambda for several W_k sharing the source set, so monotonicity in k is exact.

    The reference distance is that of M, or of ``ambient`` when given.
    """
    o = grid_opts(opts)
    base = get_grid(M, o["nr"], o["nphi"], o["stencil"], ambient)
    for Wk in Wks:
        for a, b in Wj.intervals:
            if not (Wk.contains(a) and Wk.contains(b)):
                raise ValueError("W_j must lie inside W_k")
    tmask = _target_mask(base, Wj)
    rows_all = np.nonzero(Wj.contains(base.r, tol=1e-9))[0]
    src = list(_source_rows(base, Wj, o["sources"]))
    grids = [base.masked(Wk) for Wk in Wks]

    def run(i):
        n = [base.node(i, 0)]
        dm = base.solve_nodes(n)
        out = []
        for g in grids:
            dk = g.solve_nodes(n)
            diff = np.where(tmask & np.isfinite(dm), dk - dm, -np.inf)
            diff[np.isnan(diff)] = -np.inf
            k = int(np.argmax(diff))
            out.append((float(diff[k]), k, float(dk[k]), float(dm[k])))
        return i, out

    res = _config.parallel_map(run, src)
    # refine around the sources ranking highest for the smallest W_k
    order = sorted(res, key=lambda t: -t[1][0][0])
    top = [t[0] for t in order[:o["top"]]]
    more = [i for i in _refine_rows(list(rows_all), top) if i not in set(src)]
    res += _config.parallel_map(run, more)
    out = []
    for idx, Wk in enumerate(Wks):
        ranked = sorted(res, key=lambda t: (-t[1][idx][0], t[0]))
        gval = max(ranked[0][1][idx][0], 0.0)
        # both distances of the leading pairs through their shortest Clairaut candidates
        best, arg = -math.inf, ()
        for i, cells in ranked[:o["top"]]:
            val, k, dk, dm = cells[idx]
            if not np.isfinite(val):
                continue
            ti, tj = divmod(k, base.nphi)
            r1, r2, dphi = base.r[i], base.r[ti], base.phi[tj]
            if np.isfinite(dk):
                dk = min(dk, refined_value(M, r1, r2, dphi, Wk)[0])
            # the candidate set of the whole space is complete, so its minimum replaces the grid value;
            # inside W_k a boundary-hugging path may beat every geodesic of M, so there only min() is safe
            rm = refined_value(M, r1, r2, dphi, ambient)[0]
            if math.isfinite(rm):
                dm = rm
            if dk - dm > best:
                best, arg = dk - dm, (float(r1), 0.0, float(r2), float(dphi))
        if not math.isfinite(best):
            best = gval
        out.append(SupResult(max(best, 0.0), base.tol * 2, arg, gval))
    return out


def flat_lambda(space: FlatModelSpace, Wj: RegionSpec, Wk: RegionSpec, n: int = 65) -> float:
    """Exact sup for box regions in the flat torus (W_k convex: induced = Euclidean).

    The maximum of |x-y|_E - |x-y|_T over the box is attained at a pair of
    corners; the sample confirms it.
    """
    if space.kind != "flat_torus":
        return 0.0
    a, b = _flat_box(Wj)
    s = b - a
    L = space.L

    def gap(dx, dy):
        e = np.hypot(dx, dy)
        tx, ty = np.minimum(dx, L - dx), np.minimum(dy, L - dy)
        return e - np.hypot(tx, ty)

    t = np.linspace(0, s, n)
    DX, DY = np.meshgrid(t, t)
    sample = float(np.max(gap(DX, DY)))
    corner = float(gap(s, s))
    return max(sample, corner)


def flat_lambda_axis(space: FlatModelSpace, Wj: RegionSpec) -> float:
    """Same sup restricted to pairs differing in one coordinate."""
    a, b = _flat_box(Wj)
    s = b - a
    return max(0.0, s - min(s, space.L - s))


def hausdorff_gap(space, U: RegionSpec, opts: dict | None = None,
                  ambient: RegionSpec | None = None) -> SupResult:
    """sup over x in M (or in ``ambient``) of d(x, U)."""
    if isinstance(space, FlatModelSpace):
        return SupResult(_flat_hausdorff(space, U), 0.0)
    M = space
    A = ambient or M.full
    if any(A.component(x) is None for iv in U.intervals for x in iv):
        raise ValueError("U must lie inside the ambient region")
    # exact: a rotationally symmetric r-set is reached radially, and the sup
    # lies at an end of the ambient region or at the radial midpoint of a gap
    ends = [x for iv in A.intervals for x in iv]
    pts = list(np.unique(np.concatenate([ends, [x for iv in U.intervals for x in iv]])))

    def dist_to_U(r):
        if U.contains(r):
            return 0.0
        comp = A.component(r)
        best = math.inf
        for iv in U.intervals:
            for x in iv:
                if A.component(x) == comp:
                    best = min(best, radial_length(M, r, x))
        return best

    gaps = [(U.intervals[k][1], U.intervals[k + 1][0]) for k in range(len(U.intervals) - 1)]
    for a, b in gaps:
        if A.component(a) != A.component(b):
            continue
        g = lambda r: radial_length(M, a, r) - radial_length(M, r, b)
        try:
            pts.append(brentq(g, a, b, xtol=1e-13))
        except ValueError:
            pts.append(0.5 * (a + b))
    cand = [dist_to_U(r) for r in pts]
    exact = max(cand)
    o = grid_opts(opts)
    grid = get_grid(M, o["nr"], o["nphi"], o["stencil"], ambient)
    rows = np.nonzero(U.contains(grid.r, tol=1e-9) & grid.rows)[0]
    nodes = (rows[:, None] * grid.nphi + np.arange(grid.nphi)[None, :]).ravel()
    d = grid.solve_nodes(nodes)
    fin = d[np.isfinite(d)]
    gv = float(np.max(fin)) if fin.size else math.nan
    err = (abs(gv - exact) if np.isfinite(gv) else 0.0) + grid.tol
    return SupResult(float(exact), err, (), gv)


def _flat_hausdorff(space: FlatModelSpace, U: RegionSpec):
    a, b = _flat_box(U)
    L = space.L
    if space.kind == "flat_torus":
        g = max(0.0, (L - (b - a)) / 2)
    else:
        g = max(a, L - b, 0.0)
    return math.sqrt(2) * g


def distance_gap(Ma: RotSymManifold, Mb: RotSymManifold, U: RegionSpec, amb_a: RegionSpec | None = None,
                 amb_b: RegionSpec | None = None, opts: dict | None = None) -> SupResult:
    """sup over x, y in U of |d_a(x, y) - d_b(x, y)| for two metrics in one chart.

    d_a is the distance of (amb_a, Ma) and d_b that of (amb_b, Mb); both are
    solved on the lattice of Ma's domain, so discretization errors largely
    cancel in the difference.
    """
    if Ma.m != Mb.m:
        raise ValueError("metrics must share the dimension")
    o = grid_opts(opts)
    ga = get_grid(Ma, o["nr"], o["nphi"], o["stencil"], amb_a)
    gb = get_grid(Mb, o["nr"], o["nphi"], o["stencil"], amb_b, extent=Ma.domain)
    tmask = _target_mask(ga, U)
    rows_all = np.nonzero(U.contains(ga.r, tol=1e-9) & ga.rows & gb.rows)[0]
    if rows_all.size == 0:
        raise ValueError("U contains no lattice rows")
    pick = rows_all if rows_all.size <= o["sources"] else rows_all[
        np.unique(np.round(np.linspace(0, rows_all.size - 1, o["sources"])).astype(int))]

    def run(i):
        n = [ga.node(i, 0)]
        da, db = ga.solve_nodes(n), gb.solve_nodes(n)
        fin = tmask & np.isfinite(da) & np.isfinite(db)
        diff = np.where(fin, np.abs(da - db), -np.inf)
        # reachable in one metric only: the gap is infinite
        diff[tmask & (np.isfinite(da) != np.isfinite(db))] = np.inf
        k = int(np.argmax(diff))
        return float(diff[k]), i, k

    res = _config.parallel_map(run, list(pick))
    res.sort(key=lambda t: (-t[0], t[1]))
    top = [t[1] for t in res[:o["top"]]]
    more = [i for i in _refine_rows(list(rows_all), top) if i not in set(pick)]
    res += _config.parallel_map(run, more)
    res.sort(key=lambda t: (-t[0], t[1], t[2]))
    val, i, k = res[0]
    ti, tj = divmod(k, ga.nphi)
    val = max(val, 0.0)
    return SupResult(val, ga.tol + gb.tol, (float(ga.r[i]), 0.0, float(ga.r[ti]), float(ga.phi[tj])))

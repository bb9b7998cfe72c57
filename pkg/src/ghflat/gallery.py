"""The example gallery: executable metric families with their expected outcomes.

Each example is a family i -> (M, g_i) on S^3 (or a flat 2-torus), a limit
metric on the regular part, a singular-set descriptor, a default exhaustion
W_j and a list of machine-checkable claims.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import config as _config
from .manifold import (FlatModelSpace, RegionSpec, RotSymManifold, boundary_area, curvature_profile,
                       round_sphere, tip_density, volume, radial_length, region_boundary_area)
from .profiles import (_STEP, BlendSpec, Compose, PiecewiseProfile, Profile, Scale, as_profile,
                       expr, mollify, profile_to_obj)

PI = math.pi
FIDELITIES = ("full", "flat", "quantity-only")
CLAIM_KINDS = ("density", "diameter-growth", "volume-bound", "boundary-area", "lambda-value",
               "trace-behavior", "pole-smoothness", "curvature", "profile-envelope", "structure")


def _n(x: float) -> str:
    """Number literal for the profile grammar."""
    x = float(x)
    return repr(x) if x >= 0 else f"({x!r})"


def _pw(pieces, blends=()) -> PiecewiseProfile:
    return PiecewiseProfile(pieces, [b if isinstance(b, BlendSpec) else BlendSpec(**b) for b in blends])


def _gap(a, b, kind="quintic", **kw) -> BlendSpec:
    return BlendSpec(0.5 * (a + b), kind, 0.5 * (b - a), **kw)


def spline_integral() -> float:
    """int_0^1 exp(1/(4u(u-1))) du, the unit spline length."""
    return integrate.quad(lambda u: math.exp(1.0 / (4 * u * (u - 1))), 0, 1, epsabs=1e-13, epsrel=1e-12)[0]


SPLINE_L = spline_integral()
S3 = round_sphere(3)

# ---------------------------------------------------------------------------
# Specs and claims


@dataclass
class ClaimResult:
    name: str
    kind: str
    passed: bool
    value: object
    target: object
    tol: float
    detail: dict = field(default_factory=dict)

    def to_obj(self):
        return asdict(self)


@dataclass(frozen=True)
class Claim:
    name: str
    kind: str
    description: str
    target: object
    tol: float
    check: Callable = field(compare=False, repr=False)

    def evaluate(self, opts: dict | None = None) -> ClaimResult:
        passed, value, detail = self.check(opts or {})
        return ClaimResult(self.name, self.kind, bool(passed), value, self.target, self.tol, detail)


@dataclass(frozen=True)
class SingularSet:
    kind: str          # point | ball | hypersurface | circles | none
    where: tuple = ()
    ambient_dim: int = 3

    def to_obj(self):
        return {"kind": self.kind, "where": list(self.where), "ambient_dim": self.ambient_dim}


@dataclass(frozen=True)
class ExampleSpec:
    name: str
    fidelity: str
    summary: str
    build: Callable = field(repr=False)
    build_limit: Callable = field(repr=False)
    singular_set: SingularSet = SingularSet("none")
    exhaustion: Callable = field(default=None, repr=False)
    claims_fn: Callable = field(default=None, repr=False)
    i_min: int = 1
    connected: bool = True
    regular_region: RegionSpec | None = None
    i_max: int | None = None  # last index the construction resolves in double precision

    def generator(self, i: int):
        i = int(i)
        if i < self.i_min:
            raise ValueError(f"{self.name}: index {i} below the declared range i >= {self.i_min}")
        if self.i_max is not None and i > self.i_max:
            raise ValueError(f"{self.name}: index {i} above the declared range i <= {self.i_max}")
        return self.build(i)

    @property
    def limit(self):
        return self.build_limit()

    def default_exhaustion(self, j: int) -> RegionSpec:
        return self.exhaustion(int(j))

    @property
    def expected(self) -> list:
        return self.claims_fn() if self.claims_fn else []


# ---------------------------------------------------------------------------
# Shared helpers


class Pullback(Compose):
    """outer(inner(r)) with extra quadrature breakpoints in r."""

    def __init__(self, outer: Profile, inner: Profile, breaks=()):
        super().__init__(outer, inner)
        self._extra = tuple(breaks)

    def breakpoints(self):
        return tuple(sorted(set(self.inner.breakpoints()) | set(self._extra)))


class SlopeBlend(Profile):
    """Join A to C on [ta, tb] by blending slopes: f' = (1-s)A' + sC'.

    f(ta) = A(ta); the caller picks the window so that f(tb) = C(tb).  If A'
    and C' are decreasing and C' < A' the join is concave.
    """

    def __init__(self, A: Profile, C: Profile, ta: float, tb: float, nodes: int = 32):
        self.A, self.C, self.ta, self.tb = A, C, float(ta), float(tb)
        self._gx, self._gw = np.polynomial.legendre.leggauss(nodes)
        self._s = [_STEP["quintic"].deriv(k) for k in range(3)]

    def _w(self, t, k):
        u = (np.asarray(t, float) - self.ta) / (self.tb - self.ta)
        return self._s[k](np.clip(u, 0.0, 1.0)) / (self.tb - self.ta) ** k

    def _slope(self, t, order):
        # d^order/dt^order of (1-s)A' + sC'
        A, C = self.A, self.C
        out = A.d(t, order + 1)
        for k in range(order + 1):
            out = out + math.comb(order, k) * self._w(t, k) * (C.d(t, order + 1 - k) - A.d(t, order + 1 - k))
        return out

    def d(self, r, order=0):
        if order >= 1:
            return self._slope(r, order - 1)
        scalar = np.ndim(r) == 0
        t = np.atleast_1d(np.asarray(r, float))
        half = 0.5 * (t - self.ta)
        z = self.ta + half[:, None] * (1 + self._gx[None, :])
        vals = self._slope(z.ravel(), 0).reshape(z.shape)
        out = float(self.A(self.ta)) + np.sum(vals * self._gw[None, :], axis=1) * half
        return out[0] if scalar else out


def point_exhaustion(j: int) -> RegionSpec:
    return RegionSpec.interval(0.0, PI - 1.0 / j)


def _ok(passed, value, **detail):
    return bool(passed), value, detail


def _grid(opts):
    o = dict(_config.DEFAULTS["check"])
    o.update(opts or {})
    return o


def _fit_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _max_on_region(fn, R: RegionSpec, n=4001):
    best = 0.0
    for a, b in R.intervals:
        x = np.linspace(a, b, n)[1:-1]
        with np.errstate(all="ignore"):
            best = max(best, float(np.nanmax(fn(x))))
    return best


# ---------------------------------------------------------------------------
# ex-region


def _region_limit():
    return RotSymManifold(3, (PI / 16, PI), "sin(r)", 1.0, False, True, False, True, "sphere minus ball")


def _ball_volume(rho):
    # unit S^3 ball of radius rho: 4 pi int_0^rho sin^2
    return 2 * PI * (rho - math.sin(2 * rho) / 2)


def _claims_region():
    lost = _ball_volume(PI / 16)

    def lost_volume(opts):
        vals = {}
        for j in (4, 8, 16):
            W = region_exhaustion(j)
            vals[j] = float(volume(S3, RegionSpec.interval(0.0, W.lo)))
        v = min(vals.values())
        return _ok(v >= lost * (1 - 1e-9), v, by_j=vals, ball_volume=lost)

    def trace_floor(opts):
        from .bounds import flat_convergence_trace
        tr = flat_convergence_trace(EXAMPLES["ex-region"], pairs=[(8, 4), (16, 8)], opts=_grid(opts), k=16)
        v = min(r.d_F_bound for r in tr.rows)
        return _ok(v >= 2 * lost * (1 - 1e-9), v, rows=[list(r.values()) for r in tr.rows])

    return [
        Claim("lost-region", "volume-bound", "Vol(M minus W_j) >= Vol(B(pi/16)) for every j", lost, 1e-9,
              lost_volume),
        Claim("trace-floor", "trace-behavior", "B(i,j) stays above twice the lost-ball volume", 2 * lost,
              1e-9, trace_floor),
    ]


def region_exhaustion(j):
    return RegionSpec.interval(PI / 16 + 1.0 / j, PI)


# ---------------------------------------------------------------------------
# ex-cone and ex-cusp


_Q = (PI / 2, 3 * PI / 4)


def _tip_family(tail: str, j: int) -> PiecewiseProfile:
    c = 1.0 - 1.0 / j
    right = f"{_n(1.0 / j)}*sin(r) + {_n(c)}*({tail})"
    return _pw([(0.0, _Q[0], "sin(r)"), (_Q[1], PI, right)], [_gap(*_Q, sign="positive")])


CONE_TAIL = f"{_n(-2 / PI)}*(r - {_n(PI)})"
CUSP_TAIL = f"{_n(4 / PI ** 2)}*(r - {_n(PI)})^2"


@lru_cache(maxsize=None)
def _cone(j):
    return RotSymManifold(3, (0.0, PI), _tip_family(CONE_TAIL, j), 1.0, True, True, True, False, f"cone g_{j}")


@lru_cache(maxsize=None)
def _cone_limit():
    f = _pw([(0.0, _Q[0], "sin(r)"), (_Q[1], PI, CONE_TAIL)], [_gap(*_Q, sign="positive")])
    return RotSymManifold(3, (0.0, PI), f, 1.0, True, True, True, False, "cone limit")


@lru_cache(maxsize=None)
def _cusp(j):
    return RotSymManifold(3, (0.0, PI), _tip_family(CUSP_TAIL, j), 1.0, True, True, True, False, f"cusp g_{j}")


@lru_cache(maxsize=None)
def _cusp_limit():
    f = _pw([(0.0, _Q[0], "sin(r)"), (_Q[1], PI, CUSP_TAIL)], [_gap(*_Q, sign="positive")])
    return RotSymManifold(3, (0.0, PI), f, 1.0, True, True, True, False, "cusp limit")


CONE_DENSITY = 16 / (3 * PI)
DENSITY_RADII = [0.5 * 2.0 ** (-k) for k in range(7)]  # 0.5 down to 1/128


def _claims_cone():
    def density(opts):
        td = tip_density(_cone_limit(), "max", DENSITY_RADII)
        rel = [abs(v / CONE_DENSITY - 1) for v in td.values]
        return _ok(rel[-1] <= 0.02 and td.classification == "settled", td.values[-1],
                   values=td.values, radii=td.radii, classification=td.classification)

    def trace(opts):
        from .bounds import flat_convergence_trace
        pairs = [(4 * j, j) for j in range(2, 9)]
        tr = flat_convergence_trace(EXAMPLES["ex-cone"], pairs=pairs, opts=_grid(opts))
        B = [r.d_F_bound for r in tr.diagonal(4)]
        mono = all(b2 <= b1 for b1, b2 in zip(B, B[1:]))
        return _ok(mono and B[-1] < 0.15 * B[0], B[-1] / B[0], diagonal=B, monotone=mono)

    return [
        Claim("tip-density", "density", "mu(B(r))/r^3 -> 16/(3 pi) at the cone tip", CONE_DENSITY, 0.02, density),
        Claim("trace-decrease", "trace-behavior",
              "B(4j, j) nonincreasing for j = 2..8 and final < 0.15 x initial", 0.15, 0.0, trace),
    ]


def _claims_cusp():
    def density(opts):
        td = tip_density(_cusp_limit(), "max", DENSITY_RADII)
        ok = abs(td.exponent - 2.0) <= 0.2 and td.values[-1] < 0.01 and td.classification == "unsettled"
        return _ok(ok, td.exponent, values=td.values, classification=td.classification)

    return [Claim("tip-density", "density", "density -> 0 with exponent 2 at the cusp tip", 2.0, 0.2, density)]


# ---------------------------------------------------------------------------
# ex-not-connected


@lru_cache(maxsize=None)
def _psi():
    return _pw([(0.0, PI / 8, "0"), (PI / 4, 3 * PI / 4, "1"), (7 * PI / 8, PI, "0")],
               [_gap(PI / 8, PI / 4), _gap(3 * PI / 4, 7 * PI / 8)])


@lru_cache(maxsize=None)
def _not_connected(i):
    base = expr("abs(sin(2*r))")
    psi = _psi()
    moll = mollify(base, 1.0 / i, domain=(0.0, PI), kinks=(0.0, PI / 2, PI))
    body = (1 - psi) * base + psi * moll
    f = Scale(1.0 / i, expr("sin(r)")) + Scale((i - 1) / (2.0 * i), body)
    return RotSymManifold(3, (0.0, PI), f, 1.0, True, True, True, True, f"pinched g_{i}")


@lru_cache(maxsize=None)
def _not_connected_limit():
    return RotSymManifold(3, (0.0, PI), "0.5*abs(sin(2*r))", 1.0, True, True, True, True, "two spheres")


def not_connected_exhaustion(j):
    return RegionSpec([(0.0, PI / 2 - 1.0 / j), (PI / 2 + 1.0 / j, PI)])


def _pole_claim(build, ilist, ends=("min", "max")):
    from .manifold import pole_slope

    def check(opts):
        worst, vals = 0.0, {}
        for i in ilist:
            M = build(i)
            for e in ends:
                end = M.domain[0] if e == "min" else M.domain[1]
                s = pole_slope(M, end)
                vals[f"{i}:{e}"] = s
                worst = max(worst, abs(abs(s) - 1.0))
        return _ok(worst <= 1e-3, worst, slopes=vals)
    return check


def _claims_not_connected():
    def diam(opts):
        from .geodesics import diameter
        M = _not_connected(16)
        d = diameter(M, opts=_grid(opts))
        return _ok(abs(d.value - PI) <= 0.03 * PI, d.value, error=d.error)

    def codim(opts):
        from .hypotheses import codim_flag
        c = codim_flag(EXAMPLES["ex-not-connected"].singular_set)
        return _ok(c == "codim 1", c)

    return [
        Claim("pole-slopes", "pole-smoothness", "f_i'(0) = 1 and f_i'(pi) = -1", 1.0, 1e-3,
              _pole_claim(_not_connected, (4, 8, 16))),
        Claim("diameter", "diameter-growth", "diam(M_i) -> pi (two half-radius spheres joined)", PI, 0.03, diam),
        Claim("codimension", "structure", "the equator has codimension 1", "codim 1", 0.0, codim),
    ]


# ---------------------------------------------------------------------------
# ex-not-F


def _nf_ends(i):
    a = PI - PI / (10 * i)
    b = PI - (PI - PI / (10 * i)) / (10 * i)
    return a, b


@lru_cache(maxsize=None)
def _not_F(i):
    a, b = _nf_ends(i)
    k = 10.0 * i
    f = _pw([(0.0, a, "sin(r)"), (b, PI, f"sin({_n(k)}*({_n(PI)} - r))")], [_gap(a, b, sign="positive")])
    h = _pw([(0.0, a, "1"), (b, PI, _n(k))], [_gap(a, b, monotone="increasing")])
    return RotSymManifold(3, (0.0, PI), f, h, True, True, True, True, f"bubble g_{i}")


def _claims_not_F():
    def envelope(opts):
        worst = -math.inf
        for i in (2, 4, 8):
            a, b = _nf_ends(i)
            M = _not_F(i)
            x = np.linspace(a, b, 401)[1:-1]
            cap = max(float(M.f(a)), float(M.f(b)))
            v = M.f(x)
            worst = max(worst, float(np.max(v)) - cap, -float(np.min(v)))
        return _ok(worst < 0, worst)

    def edge(opts):
        i, j = 8, 4
        M = _not_F(i)
        v = float(volume(M, RegionSpec.interval(PI - 1.0 / j, PI)))
        return _ok(v >= 0.9 * 2 * PI ** 2, v, total=float(volume(M)))

    return [
        Claim("neck-envelope", "profile-envelope", "0 < f_i < max(f_i(a_i), f_i(b_i)) on the neck", 0.0, 0.0,
              envelope),
        Claim("bubble-volume", "volume-bound", "Vol(M minus W_j) stays near Vol(S^3): the bubble persists",
              2 * PI ** 2, 0.1, edge),
        Claim("pole-slopes", "pole-smoothness", "both poles smooth", 1.0, 1e-3, _pole_claim(_not_F, (2, 8))),
    ]


# ---------------------------------------------------------------------------
# ex-to-hemisphere


def _hemi_H(i):
    kappa = (PI / 2) / (PI - PI / (2 * i))
    sigma = i * PI / 2 - 1.0
    a, b = PI - 1.0 / i, PI - 1.0 / (2 * i)
    return _pw([(0.0, a, f"{_n(kappa)}*r"), (b, PI, f"{_n(PI)} - {_n(sigma)}*({_n(PI)} - r)")],
               [_gap(a, b, monotone="increasing")])


@lru_cache(maxsize=None)
def _hemi(i):
    H = _hemi_H(i)
    return RotSymManifold(3, (0.0, PI), Compose(expr("sin(r)"), H), H.derivative(1), True, True, True, True,
                          f"reparametrised sphere g_{i}")


@lru_cache(maxsize=None)
def _hemi_limit():
    return RotSymManifold(3, (0.0, PI), "sin(r/2)", 0.5, True, False, True, False, "open hemisphere")


def _claims_hemi():
    def area(opts):
        worst = 0.0
        for i in (4, 8, 16, 32):
            for j in (2, 4, 8):
                worst = max(worst, region_boundary_area(_hemi(i), point_exhaustion(j)))
        return _ok(worst <= 4 * PI * (1 + 1e-12), worst)

    def edge(opts):
        vals = {j: float(volume(_hemi(4 * j), RegionSpec.interval(PI - 1.0 / j, PI))) for j in (2, 4, 8)}
        v = min(vals.values())
        return _ok(v >= PI ** 2 * (1 - 1e-9), v, by_j=vals)

    def trace(opts):
        from .bounds import flat_convergence_trace
        tr = flat_convergence_trace(EXAMPLES["ex-to-hemisphere"], pairs=[(8, 2), (16, 4)], opts=_grid(opts), k=8)
        v = min(2 * r.V_excess for r in tr.rows)
        return _ok(v >= 0.5 * PI ** 2 and all(r.d_F_bound >= 2 * r.V_excess for r in tr.rows), v,
                   rows=[list(r.values()) for r in tr.rows])

    return [
        Claim("boundary-area", "boundary-area", "Vol_{g_i}(boundary W_j) <= 4 pi", 4 * PI, 0.0, area),
        Claim("lost-hemisphere", "volume-bound", "Vol_{g_i}(M minus W_j) >= Vol(S^3)/2", PI ** 2, 0.0, edge),
        Claim("trace-floor", "trace-behavior", "trace bounded below by 0.5 pi^2 through its 2 V_j term",
              0.5 * PI ** 2, 0.0, trace),
        Claim("pole-slopes", "pole-smoothness", "g_i smooth at both poles", 1.0, 1e-3, _pole_claim(_hemi, (4, 16))),
    ]


# ---------------------------------------------------------------------------
# ex-cap-cyl and ex-diam-now: pullbacks of long metrics by phi_j


TAN = f"{_n(PI / 2)} + sin(r - {_n(PI / 2)})/cos(r - {_n(PI / 2)})"


def phi_inverse(t):
    """r with phi(r) = t."""
    return t if t <= PI / 2 else PI / 2 + math.atan(t - PI / 2)


def _phi_j(j):
    """phi on [0, phi^-1(j + pi/2)], then a monotone blend to j + 1 + r - pi/2."""
    ra = phi_inverse(j + PI / 2)
    c0 = j + 1 - PI / 2
    g = lambda x: PI / 2 + math.tan(x - PI / 2) - (c0 + x)
    cross = optimize.brentq(g, ra, PI - 1e-9)
    rb = ra + 0.5 * (cross - ra)
    return _pw([(0.0, PI / 2, "r"), (PI / 2, ra, TAN), (rb, PI, f"{_n(c0)} + r")],
               [BlendSpec(PI / 2, "exact-match", c1=True), _gap(ra, rb, monotone="increasing")])


def chart_inverse(phi, t):
    """r in [0, pi] with phi(r) = t for an increasing chart phi."""
    return optimize.brentq(lambda r: float(phi(r)) - t, 0.0, PI, xtol=1e-15, rtol=1e-15)


def _phi_cut(r_cut):
    return _pw([(0.0, PI / 2, "r"), (PI / 2, r_cut, TAN)], [BlendSpec(PI / 2, "exact-match", c1=True)])


def r_cut():
    R = float(_config.DEFAULTS["gallery"]["r_cut"])
    return phi_inverse(R)


def torpedo(L):
    """Double torpedo: sin on [0, pi/2], 1, then sin(pi + t - L) on [L - pi/2, L] (C^{1,1} joins)."""
    return _pw([(0.0, PI / 2, "sin(r)"), (PI / 2, L - PI / 2, "1"), (L - PI / 2, L, f"sin({_n(PI - L)} + r)")],
               [BlendSpec(PI / 2, "exact-match", c1=True), BlendSpec(L - PI / 2, "exact-match", c1=True)])


@lru_cache(maxsize=None)
def _cap_cyl(j):
    L = j + PI / 2 + 1
    phi = _phi_j(j)
    f = Pullback(torpedo(L), phi, (chart_inverse(phi, L - PI / 2),))
    return RotSymManifold(3, (0.0, PI), f, phi.derivative(1), True, True, True, True, f"double torpedo g_{j}")


@lru_cache(maxsize=None)
def _cap_cyl_limit(rc):
    f = _pw([(0.0, PI / 2, "sin(r)"), (PI / 2, 1e6, "1")], [BlendSpec(PI / 2, "exact-match", c1=True)])
    phi = _phi_cut(rc)
    return RotSymManifold(3, (0.0, rc), Pullback(f, phi), phi.derivative(1), True, False, True, False,
                          "hemisphere with cylinder (truncated)")


def _sample_r(M, n=6001):
    lo, hi = M.domain
    x = np.linspace(lo, hi, n)[1:-1]
    return np.union1d(x, [b for b in M.breakpoints() if lo < b < hi])


def _claims_cap_cyl():
    def ricci(opts):
        vals = {}
        for j in (4, 8):
            M = _cap_cyl(j)
            vals[j] = curvature_profile(M, _sample_r(M)).min_ricci()
        v = min(vals.values())
        return _ok(v >= -1e-3, v, by_j=vals)

    def cap(opts):
        M = _cap_cyl(4)
        c = curvature_profile(M, np.linspace(0.05, PI / 2 - 0.05, 64))
        v = float(np.max(np.abs(np.concatenate([c.Ric_rad, c.Ric_tan]) - 2.0)))
        return _ok(v <= 1e-6, v)

    def area(opts):
        v = max(region_boundary_area(_cap_cyl(i), point_exhaustion(j)) for i in (4, 8) for j in (2, 4))
        return _ok(v <= 4 * PI * (1 + 1e-12), v)

    def growth(opts):
        Rs = [4.0, 8.0, 16.0]
        vols = [float(volume(_cap_cyl_limit(phi_inverse(R)))) for R in Rs]
        s = _fit_slope(Rs, vols)
        return _ok(s > 0.75, s, volumes=vols, r_cut=Rs)

    return [
        Claim("ricci-nonnegative", "curvature", "min Ricci of g_j >= -1e-3", 0.0, 1e-3, ricci),
        Claim("cap-ricci", "curvature", "Ric = 2 on the spherical cap", 2.0, 1e-6, cap),
        Claim("boundary-area", "boundary-area", "Vol(boundary W_j) <= 4 pi", 4 * PI, 0.0, area),
        Claim("volume-growth", "volume-bound", "Vol of the truncated limit grows linearly in R_cut", 1.0, 0.25,
              growth),
    ]


def _cusp_end():
    return _pw([(0.0, PI / 2, "sin(r)"), (PI, 1e6, "exp(-r)")], [_gap(PI / 2, PI, sign="positive")])


def _close_eps(L):
    """epsilon_L making the slope blend on [L - 2e, L - e] land on sin(L - t)."""
    A, C = expr("exp(-r)"), expr(f"sin({_n(PI - L)} + r)")

    def miss(e):
        sb = SlopeBlend(A, C, L - 2 * e, L - e)
        return float(sb(L - e)) - float(C(L - e))

    e0 = math.exp(-L)
    return optimize.brentq(miss, 0.05 * e0, 0.99 * e0, xtol=1e-18, rtol=1e-14)


def diam_now_profile(L):
    e = _close_eps(L)
    A, C = expr("exp(-r)"), expr(f"sin({_n(PI - L)} + r)")
    pieces = [(0.0, PI / 2, "sin(r)"), (PI, L - 2 * e, "exp(-r)"), (L - 2 * e, L - e, SlopeBlend(A, C, L - 2 * e, L - e)),
              (L - e, L, C)]
    return _pw(pieces, [_gap(PI / 2, PI, sign="positive"), BlendSpec(L - 2 * e, "exact-match", c1=True),
                        BlendSpec(L - e, "exact-match", c1=True)]), e


# the join window has width ~exp(-L_j); past this index it drops below L_j times
# the double precision spacing and the profile can no longer be represented
DIAM_NOW_MAX = 20


@lru_cache(maxsize=None)
def _diam_now(j):
    L = j + PI / 2 + 1
    phi = _phi_j(j)
    fL, e = diam_now_profile(L)
    f = Pullback(fL, phi, tuple(chart_inverse(phi, t) for t in (PI, L - 2 * e, L - e)))
    return RotSymManifold(3, (0.0, PI), f, phi.derivative(1), True, True, True, True, f"cusp torpedo g_{j}")


@lru_cache(maxsize=None)
def _diam_now_limit(rc):
    phi = _phi_cut(rc)
    return RotSymManifold(3, (0.0, rc), Pullback(_cusp_end(), phi, (phi_inverse(PI),)), phi.derivative(1),
                          True, False, True, False, "hemisphere with cusp (truncated)")


def _claims_diam_now():
    js = (4, 8, 16)

    def vol(opts):
        vols = [float(volume(_diam_now(j))) for j in js]
        return _ok(max(vols) / min(vols) < 1.1, max(vols), volumes=vols)

    def diam(opts):
        lens = [radial_length(_diam_now(j), 0.0, PI) for j in js]
        target = [j + PI / 2 + 1 for j in js]
        err = max(abs(a - b) for a, b in zip(lens, target))
        return _ok(err < 1e-6 and _fit_slope(js, lens) > 0.5, lens[-1], pole_distances=lens, L=target)

    def area(opts):
        v = max(region_boundary_area(_diam_now(i), point_exhaustion(j)) for i in js for j in (2, 4))
        return _ok(v <= 4 * PI * (1 + 1e-12), v)

    def curv(opts):
        mins = {}
        for j in js:
            M = _diam_now(j)
            c = curvature_profile(M, _sample_r(M, 20001))
            mins[j] = float(np.nanmin(np.minimum(c.K_rad, c.K_tan)))
        lo = min(mins.values())
        spread = max(mins.values()) - lo
        return _ok(math.isfinite(lo) and spread <= 0.1 * max(1.0, abs(lo)), lo, by_j=mins)

    return [
        Claim("volume-bounded", "volume-bound", "Vol(M, g_j) stays bounded", 1.0, 0.1, vol),
        Claim("diameter-growth", "diameter-growth", "pole-to-pole distance equals L_j and diverges", None, 1e-6,
              diam),
        Claim("boundary-area", "boundary-area", "Vol(boundary W_j) <= 4 pi", 4 * PI, 0.0, area),
        Claim("sectional-lower-bound", "curvature", "sectional curvature bounded below uniformly in j", None, 0.1,
              curv),
    ]


# ---------------------------------------------------------------------------
# Splines: ex-not-GH, ex-no-GH, ex-not-bounded


def spline_h(i, height):
    lo, hi = PI - 2.0 / i, PI - 1.0 / i
    q = 1.0 / (4.0 * i * i)
    bump = f"1 + {_n(height)}*exp({_n(-q)}/((r - {_n(lo)})*({_n(hi)} - r)))"
    return _pw([(0.0, lo, "1"), (lo, hi, bump), (hi, PI, "1")])


@lru_cache(maxsize=None)
def _not_GH(i):
    return RotSymManifold(3, (0.0, PI), "sin(r)", spline_h(i, float(i)), True, True, True, True, f"spline g_{i}")


@lru_cache(maxsize=None)
def _not_bounded(i):
    return RotSymManifold(3, (0.0, PI), "sin(r)", spline_h(i, float(i * i)), True, True, True, True,
                          f"long spline g_{i}")


def spline_exhaustion(j):
    return RegionSpec.interval(0.0, PI - 2.0 / j)


def window_length(M, i):
    return radial_length(M, PI - 2.0 / i, PI - 1.0 / i)


def _claims_not_GH():
    def diam(opts):
        from .geodesics import diameter
        out = {}
        ok = True
        for i in (10, 20):
            M = _not_GH(i)
            Lw = window_length(M, i)
            target = PI - 2.0 / i + Lw + 1.0 / i
            d = diameter(M, opts=_grid(opts))
            out[i] = {"diameter": d.value, "target": target}
            ok &= d.value >= target - 1e-6
        return _ok(ok, out[20]["diameter"], by_i=out)

    def length(opts):
        i = 10
        direct = window_length(_not_GH(i), i) - 1.0 / i
        u_form = 1.0 + SPLINE_L  # integrand 1 + e^(...) over the unit interval
        return _ok(abs(direct - SPLINE_L) <= 1e-8, direct, unit_integral=SPLINE_L, u_substituted=u_form,
                   mismatch=abs(u_form - direct) > 1e-8)

    def ricci(opts):
        mins = {i: curvature_profile(_not_GH(i), _sample_r(_not_GH(i), 40001)).min_ricci() for i in (10, 20)}
        return _ok(mins[20] < mins[10] < -10.0, mins[20], by_i=mins)

    def haus(opts):
        from .geodesics import hausdorff_gap
        i = 10
        M = _not_GH(i)
        v = hausdorff_gap(M, spline_exhaustion(i), _grid(opts)).value
        target = window_length(M, i) + 1.0 / i
        return _ok(abs(v - target) <= 1e-6, v, target=target)

    return [
        Claim("diameter", "diameter-growth", "diam(M_i) >= pi - 2/i + L + 1/i", None, 1e-6, diam),
        Claim("spline-length", "structure", "window length minus 1/i equals the unit spline integral",
              SPLINE_L, 1e-8, length),
        Claim("ricci-unbounded", "curvature", "min Ricci strongly negative and decreasing in i", -10.0, 0.0, ricci),
        Claim("hausdorff", "structure", "d_H(U, M) = L + 1/i for U = [0, pi - 2/i]", None, 1e-6, haus),
    ]


def _claims_not_bounded():
    def length(opts):
        out = {i: window_length(_not_bounded(i), i) - 1.0 / i for i in (10, 20)}
        err = max(abs(v - i * SPLINE_L) for i, v in out.items())
        return _ok(err <= 1e-7, err, by_i=out)

    def diam(opts):
        from .geodesics import diameter
        d = diameter(_not_bounded(20), opts=_grid(opts))
        return _ok(d.value > 10.0, d.value, error=d.error, pole_to_pole=radial_length(_not_bounded(20), 0, PI))

    def edge(opts):
        js = (4, 8, 16, 32)
        V = [float(volume(_not_bounded(j), RegionSpec.interval(PI - 2.0 / j, PI))) for j in js]
        displayed = [PI * (1 / (2 * j)) ** 2 + PI * math.sin(2 / j) ** 2 * j * SPLINE_L for j in js]
        s = _fit_slope(js, V)
        return _ok(-s > 0.5 and V[-1] < 0.2 * V[0], V[-1], V_j=V, displayed=displayed, exponent=-s)

    return [
        Claim("spline-length", "structure", "L_i = i L", None, 1e-7, length),
        Claim("diameter-20", "diameter-growth", "diameter at i = 20 exceeds 10", 10.0, 0.0, diam),
        Claim("edge-volume", "volume-bound", "V_j -> 0 despite the growing spline", 0.0, 0.0, edge),
    ]


@dataclass(frozen=True)
class SplineCluster:
    """Closed-form quantities of the sphere carrying i thin splines."""

    i: int
    L: float

    @property
    def m(self):
        return 3

    def volume_bound(self):
        i = self.i
        return 2 * PI ** 2 + i * math.sin(1 / (2 * i * i)) * self.L

    def area_bound(self):
        i = self.i
        return 4 * PI * math.sin(1 / (2 * i * i)) * i

    def edge_bound(self):
        i = self.i
        return PI * i * (1 / (2 * i * i)) ** 2 + PI * i * math.sin(2 / i ** 2) ** 2 * self.L

    def diameter_bound(self):
        return PI + 2 * self.L

    def ball_count(self):
        return self.i

    def spline_volume(self):
        """i copies of the spline region of the single-spline metric at index i^2."""
        n = self.i * self.i
        return self.i * float(volume(_not_GH(n), RegionSpec.interval(PI - 2.0 / n, PI)))

    def to_obj(self):
        return {"i": self.i, "L": self.L, "volume_bound": self.volume_bound(), "area_bound": self.area_bound(),
                "edge_bound": self.edge_bound(), "diameter_bound": self.diameter_bound(),
                "ball_count": self.ball_count()}


def _claims_no_GH():
    ii = (2, 4, 8, 16)

    def vol(opts):
        v = [SplineCluster(i, SPLINE_L).volume_bound() for i in ii]
        return _ok(max(v) <= 2 * PI ** 2 + SPLINE_L, max(v), bounds=v)

    def balls(opts):
        c = [SplineCluster(i, SPLINE_L).ball_count() for i in ii]
        return _ok(_fit_slope(ii, c) > 0.75, c[-1], counts=c)

    def spline_vol(opts):
        v = [SplineCluster(i, SPLINE_L).spline_volume() for i in ii]
        return _ok(v[-1] < 0.2 * v[0], v[-1], volumes=v)

    def edge(opts):
        v = [SplineCluster(i, SPLINE_L).edge_bound() for i in ii]
        return _ok(-_fit_slope(ii, v) > 0.5 and v[-1] < 0.2 * v[0], v[-1], bounds=v)

    return [
        Claim("volume-bound", "volume-bound", "Vol <= Vol(S^3) + i sin(1/(2 i^2)) L stays bounded",
              2 * PI ** 2, SPLINE_L, vol),
        Claim("ball-count", "diameter-growth", "disjoint L/2-balls at the tips number i", None, 0.0, balls),
        Claim("spline-volume", "volume-bound", "total spline volume -> 0", 0.0, 0.0, spline_vol),
        Claim("edge-volume", "volume-bound", "edge-volume bound -> 0", 0.0, 0.0, edge),
    ]


# ---------------------------------------------------------------------------
# ex-flamenco


FLAMENCO_TAIL = f"({_n(PI)} - r)^(-0.25)"
_FW = (PI / 2, PI / 2 + 0.5)


@lru_cache(maxsize=None)
def _flamenco_limit():
    f = _pw([(0.0, _FW[0], "sin(r)"), (_FW[1], PI, FLAMENCO_TAIL)], [_gap(*_FW, sign="positive")])
    return RotSymManifold(3, (0.0, PI), f, 1.0, True, False, True, False, "flamenco limit")


@lru_cache(maxsize=None)
def _flamenco(i):
    a, b = PI - 1.0 / i, PI - 1.0 / (2 * i)
    f = _pw([(0.0, _FW[0], "sin(r)"), (_FW[1], a, FLAMENCO_TAIL), (b, PI, "sin(r)")],
            [_gap(*_FW, sign="positive"), _gap(a, b, sign="positive")])
    return RotSymManifold(3, (0.0, PI), f, 1.0, True, True, True, True, f"flamenco g_{i}")


def _claims_flamenco():
    def area(opts):
        out = {}
        for j in (4, 16, 64):
            v = boundary_area(_flamenco_limit(), PI - 1.0 / j)
            out[j] = v / (4 * PI * math.sqrt(j)) - 1
        worst = max(abs(v) for v in out.values())
        return _ok(worst <= 0.01, worst, relative_error=out)

    def vol(opts):
        V = volume(_flamenco_limit(), full_output=True)
        vi = [float(volume(_flamenco(i))) for i in (2, 8, 32)]
        return _ok(math.isfinite(V.value) and max(vi) <= V.value + 1e-6, V.value, members=vi, error=V.error)

    def diam(opts):
        from .geodesics import diameter
        d = diameter(_flamenco(8), opts=_grid(opts))
        return _ok(d.value <= 2 * PI + d.error, d.value, error=d.error)

    return [
        Claim("boundary-area", "boundary-area", "Vol(boundary W_j) = 4 pi sqrt(j) is not bounded", None, 0.01, area),
        Claim("finite-volume", "volume-bound", "Vol_{g_inf}(M minus S) finite and bounds Vol(M_i)", None, 1e-6, vol),
        Claim("diameter", "diameter-growth", "diam(M_i) <= 2 pi", 2 * PI, 0.0, diam),
    ]


# ---------------------------------------------------------------------------
# ex-to-torus-square


def square_exhaustion(k):
    return RegionSpec.interval(1.0 / k, 2 * PI - 1.0 / k)


def _claims_torus():
    def lam(opts):
        from .geodesics import flat_lambda, flat_lambda_axis
        T = FlatModelSpace.flat_torus()
        out = {}
        worst = 0.0
        for j in (4, 8):
            v = flat_lambda(T, square_exhaustion(j), square_exhaustion(4 * j))
            target = 2 * PI - 4.0 / j
            out[j] = {"lambda": v, "target": target, "axis": flat_lambda_axis(T, square_exhaustion(j))}
            worst = max(worst, abs(v / target - 1))
        return _ok(worst <= 0.02, worst, by_j=out)

    def codim(opts):
        from .hypotheses import codim_flag
        c = codim_flag(EXAMPLES["ex-to-torus-square"].singular_set)
        return _ok(c == "codim 1", c)

    return [
        Claim("lambda", "lambda-value", "iterated lambda equals 2 pi - 4/j", None, 0.02, lam),
        Claim("codimension", "structure", "two circles: codimension 1", "codim 1", 0.0, codim),
    ]


# ---------------------------------------------------------------------------
# Registry


def _spec(name, **kw):
    return ExampleSpec(name=name, **kw)


EXAMPLES = {}


def _register(spec: ExampleSpec):
    EXAMPLES[spec.name] = spec


_register(_spec("ex-region", fidelity="full", summary="constant round sphere; the limit forgets a ball",
                build=lambda i: S3, build_limit=_region_limit,
                singular_set=SingularSet("ball", (0.0, PI / 16)), exhaustion=region_exhaustion,
                claims_fn=_claims_region))
_register(_spec("ex-cone", fidelity="full", summary="conical tip with positive density",
                build=_cone, build_limit=_cone_limit, singular_set=SingularSet("point", (PI,)),
                exhaustion=point_exhaustion, claims_fn=_claims_cone))
_register(_spec("ex-cusp", fidelity="full", summary="cusp tip with zero density",
                build=_cusp, build_limit=_cusp_limit, singular_set=SingularSet("point", (PI,)),
                exhaustion=point_exhaustion, claims_fn=_claims_cusp))
_register(_spec("ex-not-connected", fidelity="full", summary="equator pinches to a point",
                build=_not_connected, build_limit=_not_connected_limit, i_min=2,
                singular_set=SingularSet("hypersurface", (PI / 2,)), exhaustion=not_connected_exhaustion,
                connected=False, claims_fn=_claims_not_connected))
_register(_spec("ex-not-F", fidelity="full", summary="a unit bubble on a shrinking neck",
                build=_not_F, build_limit=lambda: S3, singular_set=SingularSet("point", (PI,)),
                exhaustion=point_exhaustion, claims_fn=_claims_not_F))
_register(_spec("ex-to-hemisphere", fidelity="full", summary="round spheres converging to a hemisphere",
                build=_hemi, build_limit=_hemi_limit, singular_set=SingularSet("point", (PI,)),
                exhaustion=point_exhaustion, claims_fn=_claims_hemi))
_register(_spec("ex-cap-cyl", fidelity="full", summary="double torpedoes with ever longer cylinders",
                build=_cap_cyl, build_limit=lambda: _cap_cyl_limit(r_cut()), i_min=3,
                singular_set=SingularSet("point", (PI,)), exhaustion=point_exhaustion, claims_fn=_claims_cap_cyl))
_register(_spec("ex-diam-now", fidelity="full", summary="hemisphere with an infinitely long cusp",
                build=_diam_now, build_limit=lambda: _diam_now_limit(r_cut()), i_min=3, i_max=DIAM_NOW_MAX,
                singular_set=SingularSet("point", (PI,)), exhaustion=point_exhaustion, claims_fn=_claims_diam_now))
_register(_spec("ex-not-GH", fidelity="full", summary="one thin spline of fixed length",
                build=_not_GH, build_limit=lambda: S3, i_min=2,
                singular_set=SingularSet("point", (PI,)), exhaustion=spline_exhaustion, claims_fn=_claims_not_GH))
_register(_spec("ex-no-GH", fidelity="quantity-only", summary="i splines of fixed length near one point",
                build=lambda i: SplineCluster(i, SPLINE_L), build_limit=lambda: S3,
                singular_set=SingularSet("point", (PI,)), exhaustion=spline_exhaustion, claims_fn=_claims_no_GH))
_register(_spec("ex-not-bounded", fidelity="full", summary="one thin spline of growing length",
                build=_not_bounded, build_limit=lambda: S3, i_min=2,
                singular_set=SingularSet("point", (PI,)), exhaustion=spline_exhaustion,
                claims_fn=_claims_not_bounded))
_register(_spec("ex-flamenco", fidelity="full", summary="finite volume, unbounded boundary areas",
                build=_flamenco, build_limit=_flamenco_limit, i_min=2, singular_set=SingularSet("point", (PI,)),
                exhaustion=point_exhaustion, claims_fn=_claims_flamenco))
_register(_spec("ex-to-torus-square", fidelity="flat", summary="flat tori with a square exhaustion",
                build=lambda i: FlatModelSpace.flat_torus(), build_limit=lambda: FlatModelSpace.flat_square(),
                singular_set=SingularSet("circles", (0.0,), 2), exhaustion=square_exhaustion,
                claims_fn=_claims_torus))


def names() -> list:
    return list(EXAMPLES)


def get(name: str) -> ExampleSpec:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; known: {', '.join(EXAMPLES)}") from None


def build_example(name: str, i: int):
    return get(name).generator(i)


def expected_claims(name: str) -> list:
    return get(name).expected


def export_example(name: str, i: int) -> dict:
    """JSON-ready description of (M, g_i) in the manifold profile format."""
    spec = get(name)
    M = spec.generator(i)
    if isinstance(M, RotSymManifold):
        try:
            obj = M.to_obj()
        except TypeError as e:
            raise TypeError(f"{name}: {e}") from None
    else:
        obj = asdict(M) if not isinstance(M, SplineCluster) else M.to_obj()
    return {"name": name, "i": int(i), "fidelity": spec.fidelity, "space": obj,
            "singular_set": spec.singular_set.to_obj()}


__all__ = ["EXAMPLES", "ExampleSpec", "Claim", "ClaimResult", "SingularSet", "build_example", "expected_claims",
           "export_example", "mollify", "names", "get", "profile_to_obj", "as_profile"]

"""Rotationally symmetric metrics g = h(r)^2 dr^2 + f(r)^2 g_{S^{m-1}}.

Integral quantities (volume, boundary area, radial length, tip density),
warped-product curvature and the bi-Lipschitz constant between two metrics.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

from .profiles import Profile, as_profile, profile_from_obj, profile_to_obj

QUAD_EPSABS = 1e-9
QUAD_EPSREL = 1e-7
TOL_POLE = 1e-3


class QuadratureWarning(UserWarning):
    pass


class NotBiLipschitz(ValueError):
    pass


def sphere_area(m: int) -> float:
    """omega_{m-1}: area of the unit (m-1)-sphere in R^m."""
    return 2.0 * math.pi ** (m / 2.0) / special.gamma(m / 2.0)


def euclidean_ball_volume(m: int) -> float:
    return sphere_area(m) / m


@dataclass(frozen=True)
class Quad:
    value: float
    error: float


def quad(fn, a, b, points=(), full_output=False):
    """Adaptive quadrature; non-convergence is warned with its error estimate."""
    if b == a:
        return Quad(0.0, 0.0) if full_output else 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    pts = sorted(p for p in set(points) if a < p < b)
    edges = [a] + pts + [b]
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            v, e = integrate.quad(fn, lo, hi, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
        if caught:
            warnings.warn(f"quadrature on [{lo:.6g}, {hi:.6g}] did not converge; "
                          f"estimate {v:.10g} with error {e:.3g}", QuadratureWarning, stacklevel=2)
        total += v
        err += e
    return Quad(sign * total, err) if full_output else sign * total


# ---------------------------------------------------------------------------
# Regions


@dataclass(frozen=True)
class RegionSpec:
    """Union of closed r-intervals (for flat models: squares [a,b]^2)."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        if not ivs:
            raise ValueError("region must be nonempty")
        for a, b in ivs:
            if b < a:
                raise ValueError(f"bad interval [{a}, {b}]")
        merged = [list(ivs[0])]
        for a, b in ivs[1:]:
            if a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        object.__setattr__(self, "intervals", tuple((a, b) for a, b in merged))

    @classmethod
    def interval(cls, a, b) -> "RegionSpec":
        return cls(((a, b),))

    @property
    def lo(self):
        return self.intervals[0][0]

    @property
    def hi(self):
        return self.intervals[-1][1]

    @property
    def connected(self) -> bool:
        return len(self.intervals) == 1

    def contains(self, r, tol=1e-12):
        r = np.asarray(r, dtype=float)
        m = np.zeros(r.shape, bool)
        for a, b in self.intervals:
            m |= (r >= a - tol) & (r <= b + tol)
        return m

    def component(self, r):
        for a, b in self.intervals:
            if a - 1e-12 <= r <= b + 1e-12:
                return (a, b)
        return None

    def within(self, domain) -> bool:
        return self.lo >= domain[0] - 1e-12 and self.hi <= domain[1] + 1e-12

    def to_obj(self):
        return [list(iv) for iv in self.intervals]


# ---------------------------------------------------------------------------
# Manifolds


@dataclass(frozen=True)
class RotSymManifold:
    m: int
    domain: tuple
    f: Profile
    h: Profile
    pole_min: bool = False
    pole_max: bool = False
    smooth_min: bool = False  # metric claimed smooth at the pole
    smooth_max: bool = False
    name: str = ""

    def __post_init__(self):
        if int(self.m) < 2:
            raise ValueError("dimension m must be >= 2")
        lo, hi = map(float, self.domain)
        if hi < lo:
            raise ValueError("domain must satisfy r_min <= r_max")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "f", as_profile(self.f))
        object.__setattr__(self, "h", as_profile(self.h))

    # -- invariants -----------------------------------------------------
    def breakpoints(self):
        lo, hi = self.domain
        pts = set(self.f.breakpoints()) | set(self.h.breakpoints())
        return tuple(sorted(p for p in pts if lo < p < hi))

    def validate(self, n: int = 2049) -> list:
        """Return a list of invariant violations (empty when valid)."""
        problems = []
        lo, hi = self.domain
        if hi == lo:
            return problems
        r = np.linspace(lo, hi, n)[1:-1]
        with np.errstate(all="ignore"):
            fv, hv = self.f(r), self.h(r)
        if not np.all(np.isfinite(fv)) or np.any(fv <= 0):
            problems.append("f must be finite and positive on the interior")
        if not np.all(np.isfinite(hv)) or np.any(hv < 0):
            problems.append("h must be finite and nonnegative on the interior")
        for flag, smooth, end, sgn in ((self.pole_min, self.smooth_min, lo, 1.0),
                                       (self.pole_max, self.smooth_max, hi, -1.0)):
            if not flag:
                continue
            fe = float(self.f(end))
            if not abs(fe) <= 1e-8:
                problems.append(f"pole at r={end}: f={fe} is not 0")
            if smooth:
                slope = pole_slope(self, end)
                if abs(abs(slope) - 1.0) > TOL_POLE:
                    problems.append(f"pole at r={end}: f'/h = {slope} is not +-1")
        return problems

    def scaled(self, c: float) -> "RotSymManifold":
        return RotSymManifold(self.m, self.domain, c * self.f, c * self.h,
                              self.pole_min, self.pole_max, self.smooth_min, self.smooth_max, self.name)

    @property
    def full(self) -> RegionSpec:
        return RegionSpec.interval(*self.domain)

    # -- serialization --------------------------------------------------
    def to_obj(self) -> dict:
        return {"m": self.m, "domain": list(self.domain), "f": profile_to_obj(self.f),
                "h": profile_to_obj(self.h),
                "poles": {"min": self.pole_min, "max": self.pole_max,
                          "smooth_min": self.smooth_min, "smooth_max": self.smooth_max}}

    @classmethod
    def from_obj(cls, obj: dict, name: str = "") -> "RotSymManifold":
        try:
            m = int(obj["m"])
            domain = tuple(float(x) for x in obj["domain"])
            f = profile_from_obj(obj["f"])
            h = profile_from_obj(obj.get("h", 1.0))
        except KeyError as e:
            raise ValueError(f"manifold JSON missing key {e}") from None
        poles = obj.get("poles", {})
        if isinstance(poles, list):
            poles = {"min": bool(poles[0]), "max": bool(poles[1])}
        return cls(m, domain, f, h, bool(poles.get("min", False)), bool(poles.get("max", False)),
                   bool(poles.get("smooth_min", False)), bool(poles.get("smooth_max", False)),
                   name or obj.get("name", ""))

    @classmethod
    def from_json(cls, text: str) -> "RotSymManifold":
        return cls.from_obj(json.loads(text))


def pole_slope(M: RotSymManifold, end: float) -> float:
    """lim f'/h at an endpoint, evaluated just inside the domain."""
    lo, hi = M.domain
    step = 1e-7 * max(1.0, hi - lo)
    # stay inside the end piece, however thin
    inner = [abs(b - end) for b in M.breakpoints() if abs(b - end) > 0]
    if inner:
        step = min(step, 0.01 * min(inner))
    x = end + step if end == lo else end - step
    with np.errstate(all="ignore"):
        fp, hv = float(M.f.d(x, 1)), float(M.h(x))
    return fp / hv if hv != 0 else math.inf


def round_sphere(m: int = 3, radius: float = 1.0) -> RotSymManifold:
    return RotSymManifold(m, (0.0, math.pi), f"{float(radius)!r}*sin(r)", float(radius), True, True, True, True,
                          name=f"round S^{m}")


@dataclass(frozen=True)
class FlatModelSpace:
    """Flat torus S^1 x S^1, flat square (0,L)^2, circle, or flat cylinder."""

    kind: str
    L: float = 2 * math.pi
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in ("flat_torus", "flat_square", "circle", "flat_cylinder"):
            raise ValueError(f"unknown flat model {self.kind!r}")

    @classmethod
    def flat_torus(cls, L=2 * math.pi):
        return cls("flat_torus", float(L))

    @classmethod
    def flat_square(cls, L=2 * math.pi):
        return cls("flat_square", float(L))

    @classmethod
    def circle(cls, L=2 * math.pi):
        return cls("circle", float(L))

    @classmethod
    def flat_cylinder(cls, a, b):
        """S^1 x [0, 1] with metric a^2 dtheta^2 + b^2 dl^2."""
        return cls("flat_cylinder", 2 * math.pi, float(a), float(b))

    @property
    def dim(self):
        return 1 if self.kind == "circle" else 2

    def _wrap(self, d, period):
        d = np.abs(d) % period
        return np.minimum(d, period - d)

    def distance(self, p, q):
        p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        L = self.L
        if self.kind == "circle":
            return self._wrap(np.asarray(p) - np.asarray(q), L)
        dx, dy = p[..., 0] - q[..., 0], p[..., 1] - q[..., 1]
        if self.kind == "flat_torus":
            dx, dy = self._wrap(dx, L), self._wrap(dy, L)
        elif self.kind == "flat_cylinder":
            dx, dy = self.a * self._wrap(dx, 2 * math.pi), self.b * dy
        return np.hypot(dx, dy)

    def diameter(self):
        if self.kind == "flat_torus":
            return math.sqrt(2) * self.L / 2
        if self.kind == "flat_square":
            return math.sqrt(2) * self.L
        if self.kind == "circle":
            return self.L / 2
        return math.hypot(self.a * math.pi, self.b)

    def volume(self, R: RegionSpec | None = None):
        if self.kind == "flat_cylinder":
            return 2 * math.pi * self.a * self.b
        if R is None:
            return self.L ** self.dim
        return sum((b - a) ** self.dim for a, b in R.intervals)

    def boundary_area(self, R: RegionSpec):
        """Perimeter of the box region (square side b-a per interval)."""
        return sum(4 * (b - a) if self.dim == 2 else 2.0 for a, b in R.intervals)

    def as_rotsym(self) -> RotSymManifold:
        """Flat cylinder as a warped surface h = b, f = a on [0, 1]."""
        if self.kind != "flat_cylinder":
            raise TypeError("only the flat cylinder is a warped surface")
        return RotSymManifold(2, (0.0, 1.0), self.a, self.b, name="flat cylinder")


# ---------------------------------------------------------------------------
# Integral quantities


def _density(M: RotSymManifold):
    w = sphere_area(M.m)
    k = M.m - 1

    def fn(r):
        return w * float(M.h(r)) * float(M.f(r)) ** k
    return fn


def volume(M: RotSymManifold, R: RegionSpec | None = None, full_output: bool = False):
    """omega_{m-1} * int_R h f^{m-1} dr."""
    R = R or M.full
    if not R.within(M.domain):
        raise ValueError("region not contained in the domain")
    fn = _density(M)
    pts = M.breakpoints()
    total, err = 0.0, 0.0
    for a, b in R.intervals:
        q = quad(fn, a, b, pts, full_output=True)
        total += q.value
        err += q.error
    return Quad(total, err) if full_output else total


def boundary_area(M: RotSymManifold, c: float) -> float:
    """Area omega_{m-1} f(c)^{m-1} of the level sphere r = c."""
    lo, hi = M.domain
    if not lo - 1e-12 <= c <= hi + 1e-12:
        raise ValueError("c outside the domain")
    fc = float(M.f(c))
    return sphere_area(M.m) * abs(fc) ** (M.m - 1)


def region_boundary_area(M: RotSymManifold, R: RegionSpec) -> float:
    """Total area of the level spheres bounding R (zero at poles)."""
    return float(sum(boundary_area(M, a) + boundary_area(M, b) for a, b in R.intervals
                     if b > a))


def radial_length(M: RotSymManifold, r1: float, r2: float, full_output: bool = False):
    a, b = sorted((float(r1), float(r2)))
    q = quad(lambda r: float(M.h(r)), a, b, M.breakpoints(), full_output=True)
    return q if full_output else q.value


def radial_coordinate(M: RotSymManifold, start: float, rho: float, direction: int = 1) -> float:
    """r such that the radial length from ``start`` equals rho."""
    lo, hi = M.domain
    end = hi if direction > 0 else lo
    total = radial_length(M, start, end)
    if rho >= total:
        return end
    g = lambda r: radial_length(M, start, r) - rho
    a, b = (start, end) if direction > 0 else (end, start)
    return optimize.brentq(g, a, b, xtol=1e-14, rtol=1e-13)


@dataclass
class TipDensity:
    radii: list
    values: list
    exponent: float
    classification: str
    euclidean: float
    r_boundary: list = field(default_factory=list)

    def to_obj(self):
        return {"radii": self.radii, "values": self.values, "exponent": self.exponent,
                "classification": self.classification, "euclidean_density": self.euclidean}


def dyadic_radii(r0: float, levels: int = 9):
    return [r0 * 2.0 ** (-k) for k in range(levels)]


def tip_density(M: RotSymManifold, pole: str | float = "max", radii=None) -> TipDensity:
    """Vol(B(rho))/rho^m on decreasing radii with a power-law fit."""
    lo, hi = M.domain
    if isinstance(pole, str):
        end = hi if pole == "max" else lo
    else:
        end = float(pole)
    if abs(float(M.f(end))) > 1e-8:
        raise ValueError("tip_density needs f = 0 at the chosen endpoint")
    radii = list(radii) if radii is not None else dyadic_radii(0.5)
    direction = -1 if end == hi else 1
    vals, rb = [], []
    for rho in radii:
        rc = radial_coordinate(M, end, rho, direction)
        R = RegionSpec.interval(min(end, rc), max(end, rc))
        vals.append(volume(M, R) / rho ** M.m)
        rb.append(rc)
    vals_a = np.array(vals)
    rad_a = np.array(radii)
    pos = vals_a > 0
    if pos.sum() >= 2:
        exponent = float(np.polyfit(np.log(rad_a[pos]), np.log(vals_a[pos]), 1)[0])
    else:
        exponent = math.inf
    eu = euclidean_ball_volume(M.m)
    if vals_a.min() > 0.05 * eu and exponent < 0.25:
        cls = "settled"
    elif exponent > 0.5:
        cls = "unsettled"
    else:
        cls = "inconclusive"
    return TipDensity(list(map(float, radii)), list(map(float, vals)), exponent, cls, eu, rb)


@dataclass
class Curvature:
    K_rad: np.ndarray
    K_tan: np.ndarray
    Ric_rad: np.ndarray
    Ric_tan: np.ndarray
    on_blend: np.ndarray

    def min_ricci(self):
        return float(np.nanmin(np.minimum(self.Ric_rad, self.Ric_tan)))


def curvature_profile(M: RotSymManifold, r) -> Curvature:
    """Warped-product sectional and Ricci curvatures in arclength s (ds = h dr)."""
    r = np.asarray(r, dtype=float)
    with np.errstate(all="ignore"):
        f, f1, f2 = M.f.d(r, 0), M.f.d(r, 1), M.f.d(r, 2)
        h, h1 = M.h.d(r, 0), M.h.d(r, 1)
        fs = f1 / h
        fss = (f2 * h - f1 * h1) / h ** 3
        Krad = -fss / f
        Ktan = (1.0 - fs ** 2) / f ** 2
    m = M.m
    blend = np.zeros(r.shape, bool)
    for lo, hi in tuple(M.f.blend_windows()) + tuple(M.h.blend_windows()):
        blend |= (r > lo) & (r < hi)
    return Curvature(Krad, Ktan, (m - 1) * Krad, Krad + (m - 2) * Ktan, blend)


def _ratio_fn(M1, M2):
    def fn(r):
        with np.errstate(all="ignore"):
            f1, f2 = M1.f(r), M2.f(r)
            h1, h2 = M1.h(r), M2.h(r)
            q = np.maximum.reduce([f1 / f2, f2 / f1, h1 / h2, h2 / h1])
        return q
    return fn


def metric_ratio_epsilon(M1: RotSymManifold, M2: RotSymManifold, R: RegionSpec | None = None,
                         samples: int = 4096) -> float:
    """Smallest eps with (1+eps)^-2 g1 <= g2 <= (1+eps)^2 g1 on R."""
    if M1.m != M2.m:
        raise ValueError("metrics must share the dimension")
    R = R or M1.full
    fn = _ratio_fn(M1, M2)
    best = 1.0
    for a, b in R.intervals:
        if b == a:
            continue
        # open sample grid avoids the 0/0 ratio at poles
        t = (np.arange(samples) + 0.5) / samples
        r = a + (b - a) * t
        q = fn(r)
        if not np.all(np.isfinite(q)):
            bad = r[~np.isfinite(q)][0]
            raise NotBiLipschitz(f"not bi-Lipschitz on region: ratio unbounded near r={bad:.6g}")
        k = int(np.argmax(q))
        best = max(best, float(q[k]))
        lo_b = r[max(k - 1, 0)]
        hi_b = r[min(k + 1, samples - 1)]
        if hi_b > lo_b:
            res = optimize.minimize_scalar(lambda x: -float(fn(np.float64(x))), bounds=(lo_b, hi_b),
                                           method="bounded", options={"xatol": 1e-12})
            if np.isfinite(res.fun):
                best = max(best, -float(res.fun))
    return max(best - 1.0, 0.0)

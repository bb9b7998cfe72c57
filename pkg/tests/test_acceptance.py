"""Acceptance criteria: one PASS/FAIL line per criterion at the stated tolerances.

Run under pytest, or directly with `python3 tests/test_acceptance.py`.
"""

import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))
from conftest import record  # noqa: E402

from ghflat import gallery  # noqa: E402
from ghflat.bounds import BOUNDS, DELTA_A, BoundInputs, squeeze_bounds, subdiffeo_bounds  # noqa: E402
from ghflat.bridge import bridge_grid, equator_circle, hemisphere, verify_geodesic_embedding  # noqa: E402
from ghflat.cli import main as cli_main  # noqa: E402
from ghflat.geodesics import distance, lambda_table  # noqa: E402
from ghflat.hypotheses import check_family  # noqa: E402
from ghflat.manifold import curvature_profile, round_sphere, tip_density  # noqa: E402
from ghflat.profiles import ProfileSyntaxError, parse_profile  # noqa: E402

PI = math.pi


def claim(name, cname):
    c = next(c for c in gallery.expected_claims(name) if c.name == cname)
    return c.evaluate()


def great_circle(r1, r2, dphi):
    c = math.cos(r1) * math.cos(r2) + math.sin(r1) * math.sin(r2) * math.cos(dphi)
    return math.acos(max(-1.0, min(1.0, c)))


def test_criterion_1_cone_density():
    t = time.perf_counter()
    td = tip_density(gallery.get("ex-cone").limit, "max", gallery.DENSITY_RADII)
    dt = time.perf_counter() - t
    rel = abs(td.values[-1] / gallery.CONE_DENSITY - 1)
    ok = record(1, rel <= 0.02 and td.radii[-1] <= 1e-2 and dt < 5.0,
                f"cone tip density {td.values[-1]:.5f} vs 16/(3 pi) = {gallery.CONE_DENSITY:.5f} "
                f"(rel {rel:.2e}) at r = {td.radii[-1]:.4g}, {dt:.2f} s")
    assert ok


def test_criterion_2_cusp_density():
    t = time.perf_counter()
    td = tip_density(gallery.get("ex-cusp").limit, "max", gallery.DENSITY_RADII)
    dt = time.perf_counter() - t
    ok = record(2, abs(td.exponent - 2.0) <= 0.2 and td.values[-1] < 0.01 and td.classification == "unsettled"
                and dt < 5.0,
                f"cusp exponent {td.exponent:.3f}, final {td.values[-1]:.2e}, {td.classification}, {dt:.2f} s")
    assert ok


def test_criterion_3_sphere_oracle():
    S = round_sphere(3)
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        r1, r2, a = rng.uniform(0, PI, 3)
        exact = great_circle(r1, r2, a)
        d = distance(S, (r1, 0.0), (r2, a), {"nr": 512, "nphi": 512})
        worst = max(worst, abs(d.value - exact) / exact)
    dt = time.perf_counter() - t
    ok = record(3, worst <= 0.01 and dt < 60.0, f"S^3 max rel error {worst:.2e} over 100 pairs at 512x512, {dt:.1f} s")
    assert ok


def test_criterion_4_torus_lambda():
    res = claim("ex-to-torus-square", "lambda")
    by_j = res.detail["by_j"]
    rep = check_family(gallery.get("ex-to-torus-square"))
    verdict = rep.verdicts["well-embedded"].status
    parts = ", ".join(f"j={j}: {v['lambda']:.4f} vs {v['target']:.4f} (axis pairs {v['axis']:.4f})"
                      for j, v in by_j.items())
    ok = record(4, res.passed and verdict == "fail", f"torus lambda {parts}; well-embedded {verdict}")
    assert ok


def test_criterion_5_hemisphere_embedding():
    rng = np.random.default_rng(5)
    pairs = [((0.0, float(x)), (0.0, float(y))) for x, y in rng.uniform(0, 2 * PI, (32, 2))]
    B = hemisphere(equator_circle(), PI)
    good = verify_geodesic_embedding(B, 1, pairs, bridge_grid(B, {"nr": 128, "nphi": 128, "nt": 64}))
    forced = dataclasses.replace(B, scale=0.5)
    bad = verify_geodesic_embedding(forced, 1, pairs, bridge_grid(forced, {"nr": 128, "nphi": 128, "nt": 64}))
    ok = record(5, good.relative <= 0.05 and bad.relative > 0.10,
                f"equator violation {good.relative:.2e} x pi, inadmissible control {bad.relative:.3f} x pi")
    assert ok


def hand(kind, m, eps, D1, D2, lam, V1, V2, A1, A2, X1, X2, H1, H2):
    th = np.arccos(1 / (1 + eps)) / np.pi
    if kind == "squeeze":
        a = (1 + DELTA_A) * th * max(D1, D2)
        vol, area = a * (V1 + V2), a * (A1 + A2)
        return a, vol + area, vol ** (1 / (m + 1)) + area ** (1 / m)
    a = (1 + DELTA_A) * th * max(D1, D2)
    h = np.sqrt(lam * max(D1, D2) + lam ** 2 / 4)
    hbar = max(h, np.sqrt(eps * (eps + 2)) * max(D1, D2))
    w = 2 * hbar + a
    dGH = a + 2 * hbar + max(H1, H2)
    dF = w * (V1 + V2 + A1 + A2) + X1 + X2
    dsF = ((hbar + a) * (V1 + V2)) ** (1 / (m + 1)) + (w * (A1 + A2) + X1 + X2) ** (1 / m)
    return dGH, dF, dsF


def test_criterion_6_bound_formulas():
    rng = np.random.default_rng(6)
    tuples = [(3, 1.0, PI, PI, 0.0, 2 * PI ** 2, 2 * PI ** 2, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0)]
    while len(tuples) < 20:
        m = int(rng.integers(1, 6))
        tuples.append((m, *[float(x) for x in rng.uniform(0.01, 3.0, 12)]))
    worst = 0.0
    for t in tuples:
        b = BoundInputs(*t)
        for kind, fn in (("squeeze", squeeze_bounds), ("subdiffeo", subdiffeo_bounds)):
            rep = fn(b)
            want = hand(kind, *t)
            got = (rep.d_GH_bound, rep.d_F_bound, rep.d_sF_bound)
            worst = max(worst, max(abs(g - w) for g, w in zip(got, want)))
    third = squeeze_bounds(BoundInputs(*tuples[0])).a_inf
    ok = record(6, worst <= 1e-12 and abs(third - PI / 3) <= 1e-12,
                f"20 tuples x 2 formulas, max abs deviation {worst:.1e}; eps = 1 width {third:.15f} vs pi/3")
    assert ok


def test_criterion_7_cone_trace():
    res = claim("ex-cone", "trace-decrease")
    B = res.detail["diagonal"]
    ok = record(7, res.passed, f"cone B(4j, j), j=2..8: {' '.join(f'{b:.3f}' for b in B)}; "
                f"monotone {res.detail['monotone']}, final/initial {B[-1] / B[0]:.3f} (need < 0.15)")
    assert ok


def test_criterion_8_divergence_controls():
    hemi = claim("ex-to-hemisphere", "trace-floor")
    diam = claim("ex-not-bounded", "diameter-20")
    area = claim("ex-flamenco", "boundary-area")
    ok = record(8, hemi.passed and diam.passed and area.passed,
                f"hemisphere 2V_j floor {hemi.value:.3f} >= {0.5 * PI ** 2:.3f} [{'ok' if hemi.passed else 'no'}]; "
                f"ex-not-bounded diameter(20) {diam.value:.3f} > 10 [{'ok' if diam.passed else 'no'}]; "
                f"flamenco area rel error {area.value:.1e} [{'ok' if area.passed else 'no'}]")
    assert ok


def test_criterion_9_curvature():
    c = curvature_profile(round_sphere(3), np.linspace(0.01, PI - 0.01, 401))
    dev = float(np.max(np.abs(np.concatenate([c.Ric_rad, c.Ric_tan]) - 2.0)))
    cap = claim("ex-cap-cyl", "ricci-nonnegative")
    ok = record(9, dev <= 1e-6 and cap.passed, f"S^3 |Ric - 2| {dev:.1e}; ex-cap-cyl min Ricci {cap.value:.2e}")
    assert ok


def _metric_axioms():
    S = round_sphere(3)
    rng = np.random.default_rng(10)
    opts = {"nr": 128, "nphi": 128}
    pts = [(float(r), float(p)) for r, p in zip(rng.uniform(0, PI, 24), rng.uniform(0, PI, 24))]
    n = len(pts)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = distance(S, pts[i], pts[j], opts).value
    sym = np.max(np.abs(D - D.T) / np.maximum(D, 1e-300))
    tri = np.max(D[:, None, :] - D[:, :, None] - D.T[None, :, :] - 0.01 * D[:, None, :])
    return bool(sym <= 0.01 and tri <= 0 and np.all(np.diag(D) == 0) and np.all(D[~np.eye(n, dtype=bool)] > 0))


def _lambda_monotone():
    spec = gallery.get("ex-cone")
    M = spec.generator(16)
    res = lambda_table(M, spec.default_exhaustion(4), [spec.default_exhaustion(k) for k in (4, 8, 16, 32)],
                       {"nr": 128, "nphi": 128})
    vals = [r.value for r in res]
    return all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


FIELDS = ("eps", "D_U1", "D_U2", "lam", "V1", "V2", "A1", "A2", "X1", "X2", "H1", "H2")


def _bound_monotone():
    rng = np.random.default_rng(11)
    for n in range(600):
        base = dict(zip(FIELDS, rng.uniform(0, 3, 12)))
        bumped = dict(base)
        bumped[FIELDS[n % 12]] += rng.uniform(0, 1)
        for f in BOUNDS.values():
            r0, r1 = f(BoundInputs(3, **base)), f(BoundInputs(3, **bumped))
            for key in ("d_GH_bound", "d_F_bound", "d_sF_bound"):
                if getattr(r1, key) < getattr(r0, key) * (1 - 1e-14):
                    return False
    return True


def _scale_covariance():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(50):
        b = BoundInputs(int(rng.integers(1, 5)), *rng.uniform(0.01, 3, 12))
        for c in (0.5, 2.0, 10.0):
            for f in BOUNDS.values():
                worst = max(worst, abs(f(b.scaled(c)).d_sF_bound / f(b).d_sF_bound - c))
    return worst <= 1e-9


ALPHABET = list("r0123456789.+-*/^() ") + ["sin", "cos", "exp", "abs", "sqrt", "pi", "e", "x", "−"]


def _parser_fuzz(n=100_000):
    rng = np.random.default_rng(13)
    x = np.linspace(-2, 2, 5)
    with np.errstate(all="ignore"):
        for _ in range(n):
            text = "".join(ALPHABET[k] for k in rng.integers(0, len(ALPHABET), rng.integers(0, 30)))
            try:
                parse_profile(text)(x)
            except ProfileSyntaxError as e:
                if not 0 <= e.pos <= len(text):
                    return False
    return True


def _determinism():
    import contextlib
    import io

    def run(argv):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = cli_main(argv)
        return code, buf.getvalue()

    torus = gallery.get("ex-to-torus-square")
    a = check_family(torus).to_json()
    b = check_family(torus).to_json()
    argv = ["bounds", "subdiffeo", "--m", "3", "--eps", "0.2", "--du1", "2", "--du2", "2.5", "--lam", "0.1",
            "--v1", "3", "--v2", "4", "--a1", "1", "--a2", "2"]
    c1, c2 = run(argv), run(argv)
    return a == b and c1 == c2 and json.loads(c1[1])["report"]["d_GH_bound"] > 0


def test_criterion_10_property_suites():
    parts = {"metric-axioms": _metric_axioms, "lambda-monotone": _lambda_monotone,
             "bound-monotone": _bound_monotone, "scale-covariance": _scale_covariance,
             "parser-fuzz": _parser_fuzz, "determinism": _determinism}
    status = {k: fn() for k, fn in parts.items()}
    ok = record(10, all(status.values()), " ".join(f"{k}={'ok' if v else 'no'}" for k, v in status.items()))
    assert ok


if __name__ == "__main__":
    failed = 0
    tests = [(int(k.split("_")[2]), v) for k, v in list(globals().items()) if k.startswith("test_criterion_")]
    for _, fn in sorted(tests, key=lambda t: t[0]):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)

import csv
import io
import math
from types import SimpleNamespace

import numpy as np
import pytest

from ghflat import gallery
from ghflat.bounds import (BOUNDS, DELTA_A, BoundInputs, convex_bounds, family_inputs, flat_convergence_trace,
                           squeeze_bounds, subdiffeo_bounds)
from ghflat.manifold import RegionSpec, RotSymManifold

PI = math.pi
FIELDS = ("eps", "D_U1", "D_U2", "lam", "V1", "V2", "A1", "A2", "X1", "X2", "H1", "H2")


def test_squeeze_zero():
    rep = squeeze_bounds(BoundInputs(3, 0.0, PI, PI, 0.0, 1, 1, 1, 1))
    assert (rep.d_GH_bound, rep.d_F_bound, rep.d_sF_bound) == (0.0, 0.0, 0.0)


def test_squeeze_third_of_pi():
    rep = squeeze_bounds(BoundInputs(3, 1.0, PI, PI, V1=2 * PI ** 2, V2=2 * PI ** 2))
    assert rep.a_inf == pytest.approx(PI / 3, abs=1e-12)
    assert rep.a == pytest.approx((1 + DELTA_A) * PI / 3, abs=1e-12)
    assert rep.d_F_bound == pytest.approx(rep.a * 4 * PI ** 2, abs=1e-12)
    assert rep.d_sF_bound == pytest.approx((rep.a * 4 * PI ** 2) ** 0.25, abs=1e-12)


def test_subdiffeo_zero():
    rep = subdiffeo_bounds(BoundInputs(3, 0.0, 2.0, 2.0, 0.0, 5, 5, 1, 1))
    assert (rep.d_GH_bound, rep.d_F_bound, rep.d_sF_bound) == (0.0, 0.0, 0.0)


def test_subdiffeo_heights_without_lambda():
    eps, D1, D2 = 0.3, 2.0, 1.5
    rep = subdiffeo_bounds(BoundInputs(3, eps, D1, D2, 0.0, 1, 1, 1, 1))
    assert rep.h == 0.0
    assert rep.hbar == pytest.approx(math.sqrt(eps ** 2 + 2 * eps) * D1, abs=1e-12)


def test_subdiffeo_formulas():
    b = BoundInputs(3, 0.2, 2.0, 2.5, 0.1, 3.0, 4.0, 1.0, 2.0, 0.3, 0.4, 0.05, 0.07)
    rep = subdiffeo_bounds(b)
    h = math.sqrt(0.1 * (2.5 + 0.1 / 4))
    s = math.sqrt(0.2 ** 2 + 0.4)
    hbar = max(h, s * 2.0, s * 2.5)
    a = (1 + DELTA_A) * math.acos(1 / 1.2) / PI * 2.5
    assert rep.h == pytest.approx(h, abs=1e-12)
    assert rep.hbar == pytest.approx(hbar, abs=1e-12)
    assert rep.d_GH_bound == pytest.approx(a + 2 * hbar + 0.07, abs=1e-12)
    assert rep.d_F_bound == pytest.approx((2 * hbar + a) * 10.0 + 0.7, abs=1e-12)
    assert rep.d_sF_bound == pytest.approx((7.0 * (hbar + a)) ** 0.25 + ((2 * hbar + a) * 3.0 + 0.7) ** (1 / 3),
                                           abs=1e-12)


def test_convex_formulas_and_comparison():
    b = BoundInputs(3, 1.0, PI, PI, 0.0, H1=0.1)
    rep = convex_bounds(b)
    assert rep.d_GH_bound == pytest.approx((1 + DELTA_A) * PI / 3 + 0.1, abs=1e-12)
    assert convex_bounds(BoundInputs(3)).d_GH_bound == 0.0
    rng = np.random.default_rng(1)
    for _ in range(200):
        b = BoundInputs(3, *rng.uniform(0, 2, 12))
        assert convex_bounds(b).d_GH_bound <= subdiffeo_bounds(b).d_GH_bound + 1e-15


def test_report_invariants():
    rng = np.random.default_rng(2)
    for _ in range(200):
        b = BoundInputs(int(rng.integers(1, 5)), *rng.uniform(0, 3, 12))
        for f in BOUNDS.values():
            rep = f(b)
            vals = (rep.a, rep.h, rep.hbar, rep.d_GH_bound, rep.d_F_bound, rep.d_sF_bound)
            assert all(v >= 0 for v in vals)
            assert rep.d_GH_bound >= rep.a
            assert rep.hbar >= rep.h


def test_inputs_validated():
    with pytest.raises(ValueError):
        BoundInputs(3, -1.0)
    with pytest.raises(ValueError):
        BoundInputs(3, math.inf)
    with pytest.raises(ValueError):
        BoundInputs(0)


def test_monotone_in_each_input():
    rng = np.random.default_rng(3)
    for n in range(1000):
        base = dict(zip(FIELDS, rng.uniform(0, 3, 12)))
        name = FIELDS[n % len(FIELDS)]
        bumped = dict(base)
        bumped[name] += rng.uniform(0, 1)
        b0, b1 = BoundInputs(3, **base), BoundInputs(3, **bumped)
        for f in BOUNDS.values():
            r0, r1 = f(b0), f(b1)
            for key in ("d_GH_bound", "d_F_bound", "d_sF_bound"):
                assert getattr(r1, key) >= getattr(r0, key) * (1 - 1e-14), (f.__name__, name, key)


@pytest.mark.parametrize("c", [2.0, 10.0])
def test_scale_covariance_per_term(c):
    m = 3
    b = BoundInputs(m, 0.2, 2.0, 2.5, 0.1, 3.0, 4.0, 1.0, 2.0, 0.3, 0.4, 0.05, 0.07)
    for f in BOUNDS.values():
        r0, r1 = f(b), f(b.scaled(c))
        assert r1.d_GH_bound / r0.d_GH_bound == pytest.approx(c, abs=1e-9)
        assert r1.d_sF_bound / r0.d_sF_bound == pytest.approx(c, abs=1e-9)
        assert r1.terms["d_F_volume"] == pytest.approx(c ** (m + 1) * r0.terms["d_F_volume"], rel=1e-12)
        assert r1.terms["d_F_area"] == pytest.approx(c ** m * r0.terms["d_F_area"], rel=1e-12)
        assert r1.terms["d_F_excess"] == pytest.approx(c ** m * r0.terms["d_F_excess"], rel=1e-12)


def test_subdiffeo_reduces_to_squeeze_when_equal():
    b = BoundInputs(3, 0.0, PI, PI, 0.0, 2.0, 2.0, 1.0, 1.0)
    assert subdiffeo_bounds(b).d_F_bound == squeeze_bounds(b).d_F_bound == 0.0


def test_constant_family_trace():
    spec = gallery.get("ex-region")
    tr = flat_convergence_trace(spec, i_list=[4, 8], j_list=[2, 4, 8], k=8)
    assert not tr.divergent
    lost = 2 * PI * (PI / 16 - math.sin(PI / 8) / 2)
    for r in tr.rows:
        assert r.epsilon == 0.0 and r.a == 0.0
        want = r.hbar * (2 * tr.V0 + 2 * tr.A0) + 2 * r.V_excess + r.details["F"]
        assert r.d_F_bound == pytest.approx(want, rel=1e-12)
        assert r.V_excess >= lost * (1 - 1e-9)
        assert r.d_F_bound >= 2 * lost * (1 - 1e-9)


def test_trace_csv_schema():
    spec = gallery.get("ex-region")
    tr = flat_convergence_trace(spec, i_list=[4], j_list=[2, 4], k=4)
    text = tr.to_csv()
    assert text.startswith("# schema_version=1\n")
    rows = list(csv.reader(io.StringIO(text.split("\n", 1)[1])))
    assert rows[0] == ["i", "j", "epsilon", "lambda", "a", "h", "hbar", "V_excess",
                       "d_GH_bound", "d_F_bound", "d_sF_bound"]
    assert len(rows) == 1 + len(tr.rows)


def test_trace_flags_divergence():
    lim = RotSymManifold(3, (0.0, PI), "sin(r)", 1.0)
    fam = SimpleNamespace(generator=lambda i: RotSymManifold(3, (0.0, PI), "sin(r)*(1.5 + 0.5*sin(r))", 1.0),
                          limit=lim, default_exhaustion=lambda j: RegionSpec.interval(0.0, PI - 1 / j))
    tr = flat_convergence_trace(fam, i_list=[4, 8], j_list=[2], k=4, opts={"nr": 64, "nphi": 64})
    assert tr.divergent and tr.notes


def test_hemisphere_trace_stays_large():
    spec = gallery.get("ex-to-hemisphere")
    tr = flat_convergence_trace(spec, i_list=[8, 16], j_list=[2, 4], k=8, opts={"nr": 96, "nphi": 96})
    assert min(r.V_excess for r in tr.rows) >= PI ** 2 * 0.99
    assert min(r.d_F_bound for r in tr.rows) >= 2 * PI ** 2 * 0.99


def test_cone_pipeline_resolution_and_decrease():
    spec = gallery.get("ex-cone")
    j, k = 8, 32
    lo = {"nr": 160, "nphi": 160}
    hi = {"nr": 320, "nphi": 320}
    b_lo = family_inputs(spec, 32, j, k, opts=lo)[0]
    b_hi = family_inputs(spec, 32, j, k, opts=hi)[0]
    f_lo, f_hi = subdiffeo_bounds(b_lo).d_F_bound, subdiffeo_bounds(b_hi).d_F_bound
    assert f_lo == pytest.approx(f_hi, rel=0.05)
    seq = [subdiffeo_bounds(family_inputs(spec, i, j, k, opts=lo)[0]).d_F_bound for i in (8, 16, 32)]
    assert seq[0] > seq[1] > seq[2]

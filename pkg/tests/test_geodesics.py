import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from ghflat import _kernels, gallery
from ghflat.geodesics import (MetricGrid, diameter, distance, get_grid, hausdorff_gap, lambda_gap, lambda_table)
from ghflat.manifold import FlatModelSpace, RegionSpec, round_sphere

LOW = {"nr": 128, "nphi": 128}


def great_circle(r1, r2, dphi):
    c = math.cos(r1) * math.cos(r2) + math.sin(r1) * math.sin(r2) * math.cos(dphi)
    return math.acos(max(-1.0, min(1.0, c)))


def test_distance_example(sphere3):
    d = distance(sphere3, (math.pi / 4, 0.0), (3 * math.pi / 4, math.pi / 2))
    assert d.value == pytest.approx(2 * math.pi / 3, rel=1e-6)
    assert d.error >= 0 and not d.degraded


def test_distance_same_point(sphere3):
    assert distance(sphere3, (1.0, 0.3), (1.0, 0.3)).value == 0.0


def test_torus_wraparound():
    T = FlatModelSpace.flat_torus()
    assert distance(T, (0.1, 0.1), (2 * math.pi - 0.1, 0.1)).value == pytest.approx(0.2)


def test_sphere_oracle_moderate_resolution(sphere3):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        r1, r2, a = rng.uniform(0, math.pi, 3)
        exact = great_circle(r1, r2, a)
        d = distance(sphere3, (r1, 0), (r2, a), {"nr": 256, "nphi": 256})
        worst = max(worst, abs(d.value - exact) / exact)
    assert worst <= 0.01


def test_distance_bounds_and_symmetry(sphere3):
    p, q = (0.4, 0.0), (2.2, 1.3)
    a = distance(sphere3, p, q, LOW)
    b = distance(sphere3, q, p, LOW)
    assert abs(a.value - b.value) <= a.error + b.error
    assert a.value >= abs(2.2 - 0.4) - 1e-9


def test_distance_out_of_domain(sphere3):
    with pytest.raises(ValueError):
        distance(sphere3, (4.0, 0.0), (1.0, 0.0))


def test_degraded_when_unreachable(sphere3):
    R = RegionSpec(((0.0, 1.0), (2.0, math.pi)))
    d = distance(sphere3, (0.5, 0), (2.5, 0), LOW, refine=False, region=R)
    assert d.degraded and not math.isfinite(d.value)


def test_graph_metric_exact(sphere3):
    g = get_grid(sphere3, 128, 128, 16)
    rng = np.random.default_rng(5)
    nodes = [g.node(int(i), int(j)) for i, j in zip(rng.integers(0, 128, 40), rng.integers(0, 128, 40))]
    table = np.array([g.solve_nodes([n])[nodes] for n in nodes])
    assert np.max(np.abs(table - table.T)) <= 1e-9
    idx = rng.integers(0, 40, (1000, 3))
    a, b, c = idx.T
    assert np.all(table[a, c] <= table[a, b] + table[b, c] + 1e-12)


def test_triangle_inequality_with_refinement(sphere3):
    rng = np.random.default_rng(9)
    g = get_grid(sphere3, 128, 128, 16)
    slack = 2 * g.tol
    pts = [(float(r), float(p)) for r, p in zip(rng.uniform(0, math.pi, 40), rng.uniform(0, math.pi, 40))]
    D = np.zeros((40, 40))
    for i in range(40):
        for j in range(i + 1, 40):
            D[i, j] = D[j, i] = distance(sphere3, pts[i], pts[j], LOW).value
    idx = rng.integers(0, 40, (1000, 3))
    a, b, c = idx.T
    assert np.all(D[a, c] <= D[a, b] + D[b, c] + slack)


def test_distance_field_invariants(sphere3):
    g = get_grid(sphere3, 128, 128, 16)
    field_ = g.solve(1.0, 0.0)
    assert 0.0 <= field_.at(1.0, 0.0) <= g.tol
    assert field_.lipschitz_violation() <= 1e-12
    assert np.all(g.weights[np.isfinite(g.weights)] >= 0)


def test_induced_distances_dominate(sphere3):
    base = get_grid(sphere3, 128, 128, 16)
    W = [RegionSpec.interval(0.0, math.pi - 1 / k) for k in (2, 4, 8)]
    src = [base.node(20, 0)]
    dM = base.solve_nodes(src)
    prev = None
    for Wk in W:
        dk = base.masked(Wk).solve_nodes(src)
        shared = np.isfinite(dk)
        assert np.all(dk[shared] >= dM[shared] - 1e-12)
        if prev is not None:
            both = np.isfinite(prev) & shared
            assert np.all(prev[both] >= dk[both] - 1e-12)
        prev = dk


def test_convergence_order(sphere3):
    """Halving the grid spacing reduces the raw sphere-oracle error by at least 1.5x."""
    rng = np.random.default_rng(2)
    pairs = [tuple(rng.uniform(0, math.pi, 3)) for _ in range(20)]
    errs = []
    for n in (128, 256, 512):
        e = [abs(distance(sphere3, (r1, 0), (r2, a), {"nr": n, "nphi": n}, refine=False).value
                 - great_circle(r1, r2, a)) for r1, r2, a in pairs]
        errs.append(max(e))
    assert errs[0] / errs[1] >= 1.5 and errs[1] / errs[2] >= 1.5


def test_diameter_sphere(sphere3):
    assert diameter(sphere3, opts=LOW).value == pytest.approx(math.pi, rel=1e-6)


def test_diameter_hemisphere_restricted(sphere3):
    d = diameter(sphere3, RegionSpec.interval(0, math.pi / 2), opts=LOW)
    assert d.value == pytest.approx(math.pi, rel=1e-6)


def test_diameter_modes(sphere3):
    R = RegionSpec.interval(0.3, 2.0)
    res = diameter(sphere3, R, opts=LOW)
    ind = diameter(sphere3, R, "induced_in_R", opts=LOW)
    full = diameter(sphere3, opts=LOW)
    assert ind.value >= res.value - 1e-9
    assert res.value <= full.value + full.error
    with pytest.raises(ValueError):
        diameter(sphere3, RegionSpec(((0, 1), (2, 3))), "induced_in_R")


def test_flat_square_diameter():
    S = FlatModelSpace.flat_square()
    assert diameter(S, RegionSpec.interval(0, 2 * math.pi), "induced_in_R").value == pytest.approx(
        2 * math.sqrt(2) * math.pi)


def test_lambda_zero_for_whole_space(sphere3):
    assert lambda_gap(sphere3, sphere3.full, sphere3.full, LOW).value == 0.0


def test_lambda_monotone_in_k_and_vanishing_for_cone():
    spec = gallery.get("ex-cone")
    M = spec.generator(16)
    Wj = spec.default_exhaustion(4)
    res = lambda_table(M, Wj, [spec.default_exhaustion(k) for k in (4, 8, 16, 32)], LOW)
    vals = [r.value for r in res]
    for a, b in zip(vals, vals[1:]):
        assert b <= a + 1e-12
    assert vals[-1] <= 0.02 * math.pi


def test_hausdorff_gap(sphere3):
    for j in (4, 8):
        assert hausdorff_gap(sphere3, RegionSpec.interval(0, math.pi - 1 / j), LOW).value == pytest.approx(
            1 / j, rel=1e-6)
    assert hausdorff_gap(sphere3, sphere3.full, LOW).value == 0.0


def test_hausdorff_spline_tip():
    i = 10
    M = gallery.build_example("ex-not-GH", i)
    h = hausdorff_gap(M, RegionSpec.interval(0, math.pi - 2 / i), LOW).value
    L = gallery.window_length(M, i)
    assert h == pytest.approx(L + 1 / i, rel=1e-6)


def test_torus_lambda_negative_control():
    spec = gallery.get("ex-to-torus-square")
    T = spec.generator(8)
    lam = lambda_gap(T, spec.default_exhaustion(8), spec.default_exhaustion(32)).value
    assert lam > 1.0


@pytest.mark.skipif(_kernels._core is None, reason="compiled kernel not built")
def test_backends_agree(sphere3):
    g = MetricGrid(sphere3, 96, 96, 16).graph
    cy, py = g.with_active(g.active), g.with_active(g.active)
    cy.backend, py.backend = "cython", "python"
    src = g.index(30, 5)
    a, b = cy.solve(src), py.solve(src)
    assert np.array_equal(np.isfinite(a), np.isfinite(b))
    ok = np.isfinite(a)
    assert np.max(np.abs(a[ok] - b[ok])) <= 1e-12


def test_concurrent_solves_match(sphere3):
    g = get_grid(sphere3, 128, 128, 16)
    nodes = [g.node(i, 0) for i in range(5, 125, 12)]
    seq = [g.solve_nodes([n]) for n in nodes]
    with ThreadPoolExecutor(4) as ex:
        par = list(ex.map(lambda n: g.solve_nodes([n]), nodes))
    for a, b in zip(seq, par):
        np.testing.assert_array_equal(a, b)


def test_round_sphere_other_dimension():
    S2 = round_sphere(2)
    d = distance(S2, (0.5, 0.0), (2.0, 2.0), LOW)
    assert d.value == pytest.approx(great_circle(0.5, 2.0, 2.0), rel=1e-6)

import dataclasses
import json
import math

import numpy as np
import pytest

from ghflat import gallery
from ghflat.bridge import (BridgeError, bridge_grid, bridge_volumes, build_bridge, cross_distance_check,
                           equator_circle, hemisphere, min_separation, verify_geodesic_embedding)
from ghflat.manifold import RegionSpec, RotSymManifold, metric_ratio_epsilon, round_sphere, sphere_area

SMALL = {"nr": 32, "nphi": 32, "nt": 16}


def flat_torus_metric(a, b):
    """a^2 dr^2 + b^2 dphi^2 on a strip, with no poles."""
    return RotSymManifold(2, (0.0, 2 * math.pi), float(b), float(a))


def circle_pairs(n=24, seed=0):
    rng = np.random.default_rng(seed)
    return [((0.0, float(x)), (0.0, float(y))) for x, y in rng.uniform(0, math.pi, (n, 2))]


def test_min_separation_zero():
    assert min_separation(0.0, 3.0, 4.0) == (0.0, 0.0, 0.0)


def test_min_separation_third_of_pi():
    a1, a2, a = min_separation(1.0, 2.0, math.pi)
    assert a1 == pytest.approx(math.pi / 3, rel=1e-12)
    assert a == max(a1, a2)


def test_min_separation_rejects_negative():
    with pytest.raises(ValueError):
        min_separation(-0.1, 1, 1)


def test_min_separation_shrinks_along_cone():
    spec = gallery.get("ex-cone")
    W = spec.default_exhaustion(4)
    a = []
    for i in (4, 16, 64):
        eps = metric_ratio_epsilon(spec.generator(i), spec.limit, W)
        a.append(min_separation(eps, math.pi, math.pi)[2])
    assert a[0] > a[1] > a[2] > 0


def test_symmetric_bridge():
    S = round_sphere(3)
    B = build_bridge(S, S, 2.0, 2.0, 0.0, 1.0)
    assert B.admissibility() == []
    r = np.linspace(0.1, 3.0, 30)
    t = np.linspace(0.0, 1.0, 21)
    H, F = B.components(r[:, None], t[None, :])
    g = np.sin(r)[:, None] ** 2
    assert np.all(F <= g * (1 + 1e-12))
    np.testing.assert_allclose(F[:, 0], g[:, 0], rtol=1e-9)
    np.testing.assert_allclose(F[:, -1], g[:, 0], rtol=1e-9)


def test_hemisphere_suspension():
    B = hemisphere(round_sphere(2))
    r = np.linspace(0.05, 3.0, 13)[:, None]
    t = np.linspace(0.0, math.pi / 2, 9)[None, :]
    np.testing.assert_allclose(B.fprime(r, t), np.cos(t) * np.sin(r), atol=1e-14)
    np.testing.assert_allclose(B.hprime(r, t), np.cos(t) * np.ones_like(r), atol=1e-14)


def test_flat_tori_separation_criterion():
    a1, a2, b1, b2 = 2.0, 1.0, 1.0, 1.5
    M1, M2 = flat_torus_metric(a1, b1), flat_torus_metric(a2, b2)
    D1, D2 = 3.0, 4.0
    need = max(D1 / math.pi * math.acos(a2 / a1), D2 / math.pi * math.acos(b1 / b2))
    build_bridge(M1, M2, D1, D2, 0.0, need * (1 + 1e-6))
    with pytest.raises(BridgeError, match="increase"):
        build_bridge(M1, M2, D1, D2, 0.0, need * (1 - 1e-3))


def test_zero_separation_needs_equal_metrics():
    with pytest.raises(BridgeError):
        build_bridge(flat_torus_metric(1, 1), flat_torus_metric(1, 2), 1.0, 1.0, 0.0, 0.0)


def test_bad_depth_rejected():
    with pytest.raises(ValueError):
        build_bridge(round_sphere(3), None, 0.0, None, 0.0, 1.0)


def test_equator_embedding_and_negative_control():
    B = hemisphere(equator_circle(), math.pi)
    grid = bridge_grid(B)
    good = verify_geodesic_embedding(B, 1, circle_pairs(), grid)
    assert good.relative <= 0.05 and good.passes()
    bad_bridge = dataclasses.replace(B, scale=0.5)
    bad = verify_geodesic_embedding(bad_bridge, 1, circle_pairs(), bridge_grid(bad_bridge))
    assert bad.relative > 0.05 and not bad.passes()


def test_embedding_same_point_is_zero():
    B = hemisphere(equator_circle(), math.pi)
    chk = verify_geodesic_embedding(B, 1, [((0.0, 1.0), (0.0, 1.0))], bridge_grid(B, SMALL))
    assert chk.max_violation == 0.0


def test_embedding_rejects_far_pairs():
    B = hemisphere(equator_circle(), 2.0)
    with pytest.raises(ValueError):
        verify_geodesic_embedding(B, 1, [((0.0, 0.0), (0.0, 3.0))], bridge_grid(B, SMALL))


def test_embedding_violation_monotone_in_separation():
    C = equator_circle()
    out = []
    for s in (0.5, 1.0, 2.0):
        B = build_bridge(C, C, math.pi, math.pi, 0.0, s)
        out.append(verify_geodesic_embedding(B, 1, circle_pairs(12, 4), bridge_grid(B)).max_violation)
    for a, b in zip(out, out[1:]):
        assert b <= a + 1e-9


def test_cross_distance_vertical():
    C = equator_circle()
    B = build_bridge(C, C, math.pi, math.pi, 0.0, 1.0)
    chk = cross_distance_check(B, (0.0, 1.0), (0.0, 1.0), bridge_grid(B))
    assert chk.measured == pytest.approx(1.0, abs=chk.error)
    assert chk.passes()


def test_cross_distance_antipodal_and_product_bound():
    S = round_sphere(2)
    B = build_bridge(S, S, math.pi, math.pi, 0.0, math.pi / 2)
    grid = bridge_grid(B, SMALL)
    chk = cross_distance_check(B, (0.0, 0.0), (math.pi, 0.0), grid)
    assert chk.law_of_cosines == pytest.approx(math.pi / 2, rel=1e-12)
    assert chk.measured >= math.pi / 2 - chk.error
    assert chk.passes()
    p, q = (1.0, 0.0), (2.0, 1.0)
    chk = cross_distance_check(B, p, q, grid)
    assert chk.passes()
    assert chk.measured ** 2 <= chk.d_base ** 2 + (math.pi / 2) ** 2 + chk.error


def test_volumes_within_caps():
    S = round_sphere(3)
    B = build_bridge(S, S, math.pi, math.pi, 0.0, 1.0)
    v = bridge_volumes(B)
    assert v.volume <= 2 * 2 * math.pi ** 2
    assert v.within_caps()


def test_zero_interval_volumes():
    S = round_sphere(3)
    v = bridge_volumes(build_bridge(S, S, math.pi, math.pi, 0.0, 0.0))
    assert (v.volume, v.lateral) == (0.0, 0.0)


def test_flat_tori_volume_oracle():
    a1, a2, b1, b2 = 2.0, 1.0, 1.0, 1.5
    D1, D2 = 3.0, 4.0
    s = 1.2 * max(D1 / math.pi * math.acos(a2 / a1), D2 / math.pi * math.acos(b1 / b2))
    B = build_bridge(flat_torus_metric(a1, b1), flat_torus_metric(a2, b2), D1, D2, 0.0, s)
    t = np.linspace(0.0, s, 200001)
    p1 = np.where(np.abs(t) < D1 / 2, np.cos(t * math.pi / D1), 0.0) ** 2
    p2 = np.where(np.abs(t - s) < D2 / 2, np.cos((t - s) * math.pi / D2), 0.0) ** 2
    h = np.sqrt(np.minimum(np.maximum(p1 * a1 ** 2, p2 * a2 ** 2), a1 ** 2 + a2 ** 2))
    f = np.sqrt(np.minimum(np.maximum(p1 * b1 ** 2, p2 * b2 ** 2), b1 ** 2 + b2 ** 2))
    oracle = sphere_area(2) * 2 * math.pi * np.trapezoid(h * f, t)
    assert bridge_volumes(B).volume == pytest.approx(oracle, rel=0.01)


def test_region_bridge_and_export():
    S = round_sphere(3)
    B = build_bridge(S, S, math.pi, math.pi, 0.0, 1.0, region=RegionSpec.interval(0.0, 2.0))
    obj = json.loads(B.to_json(nr=9, nt=5))
    assert len(obj["f_prime"]) == 9 and len(obj["f_prime"][0]) == 5
    assert max(obj["r"]) <= 2.0

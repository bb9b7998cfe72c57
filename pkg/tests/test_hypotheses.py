import dataclasses
import json
import math
from types import SimpleNamespace

import pytest

from ghflat import gallery
from ghflat.hypotheses import (HYPOTHESES, ROUTES, Verdict, check_family, check_ricci, codim_flag, family_from_obj,
                               lambda_monotone, routes_for)
from ghflat.manifold import round_sphere


@pytest.fixture(scope="module")
def cone_report():
    return check_family(gallery.get("ex-cone"))


@pytest.fixture(scope="module")
def hemi_report():
    return check_family(gallery.get("ex-to-hemisphere"))


@pytest.fixture(scope="module")
def torus_report():
    return check_family(gallery.get("ex-to-torus-square"))


@pytest.mark.parametrize("name, flag", [("ex-cone", "point"), ("ex-not-connected", "codim 1"),
                                        ("ex-to-torus-square", "codim 1"), ("ex-region", "codim 0")])
def test_codim_flag(name, flag):
    assert codim_flag(gallery.get(name)) == flag


def test_codim_flag_descriptors():
    assert codim_flag({"kind": "none"}) == "none"
    assert codim_flag({"kind": "submanifold", "ambient_dim": 4}) == "codim >= 2"
    with pytest.raises(ValueError):
        codim_flag({"kind": "blob"})


def test_ricci_sphere():
    fam = SimpleNamespace(generator=lambda i: round_sphere(3))
    rows = check_ricci(fam, [1, 2], H=1.0)["rows"]
    for r in rows:
        assert r["min_ricci"] == pytest.approx(2.0, abs=1e-6)
        assert r["passes"]


def test_ricci_cap_cyl_nonnegative():
    rows = check_ricci(gallery.get("ex-cap-cyl"), [3, 8, 16], H=0.0)["rows"]
    assert all(r["min_ricci"] >= -1e-3 for r in rows)


def test_ricci_not_gh_unbounded():
    rows = check_ricci(gallery.get("ex-not-GH"), [10, 20, 40])["rows"]
    mins = [r["min_ricci"] for r in rows]
    assert mins[0] < -10 and mins[2] < mins[1] < mins[0]


def test_cone_report(cone_report):
    v = cone_report.verdicts
    for h in ("m-diam", "m-area", "m-edge-volume", "well-embedded"):
        assert v[h].status == "pass", (h, v[h].note)
    assert "codim-thm" in cone_report.routes
    assert v["contractibility"].status == "unverified"
    assert "c-codim-thm" not in cone_report.routes


def test_hemisphere_report(hemi_report):
    v = hemi_report.verdicts
    assert v["m-edge-volume"].status == "fail"
    assert min(v["m-edge-volume"].witness["V_j"]) >= math.pi ** 2 * 0.99
    for h in ("connected", "smooth-convergence", "codim-2", "m-diam", "m-area", "well-embedded"):
        assert v[h].status == "pass", (h, v[h].note)
    assert hemi_report.routes == []


def test_torus_report(torus_report):
    v = torus_report.verdicts
    assert v["well-embedded"].status == "fail"
    lam = [r["value"] for r in torus_report.tables["lambda"]]
    assert max(lam) > 2 * math.pi - 1
    assert torus_report.routes == []


def test_every_verdict_cites_cells(cone_report, hemi_report, torus_report):
    for rep in (cone_report, hemi_report, torus_report):
        assert set(rep.verdicts) == set(HYPOTHESES)
        for name, v in rep.verdicts.items():
            if v.status != "unverified":
                assert v.cells, (rep.family, name)


def test_lambda_monotone_in_every_table(cone_report, hemi_report, torus_report):
    for rep in (cone_report, hemi_report, torus_report):
        assert lambda_monotone(rep.tables["lambda"]), rep.family


def test_ricci_route_ablation(cone_report):
    need = ROUTES["Ricci-codim-thm"]
    assert "Ricci-codim-thm" in cone_report.routes
    for h in need:
        assert cone_report.verdicts[h].passed
        ablated = dict(cone_report.verdicts)
        ablated[h] = dataclasses.replace(ablated[h], status="fail")
        assert "Ricci-codim-thm" not in routes_for(ablated), h
        del ablated[h]
        assert "Ricci-codim-thm" not in routes_for(ablated), h


def test_report_schema(torus_report):
    obj = json.loads(torus_report.to_json())
    assert {"family", "window", "tables", "verdicts", "routes", "unverified"} <= set(obj)
    assert {"i_max", "j_max", "k_max"} <= set(obj["window"])
    assert obj["unverified"] == ["contractibility"]


def test_report_determinism():
    spec = gallery.get("ex-cone")
    kw = dict(i_list=[4, 8], j_list=[2, 4], k_max=8, opts={"nr": 64, "nphi": 64})
    assert check_family(spec, **kw).to_json() == check_family(spec, **kw).to_json()
    torus = gallery.get("ex-to-torus-square")
    assert check_family(torus).to_json() == check_family(torus).to_json()


def test_window_rejects_bad_order():
    with pytest.raises(ValueError):
        check_family(gallery.get("ex-cone"), j_max=16, k_max=8)


def test_user_family_json():
    obj = {"name": "spheres", "members": {str(i): round_sphere(3).to_obj() for i in (2, 4)},
           "limit": round_sphere(3).to_obj(), "exhaustion": {"lo": 0.0, "hi": math.pi, "offset": 1.0},
           "singular_set": {"kind": "point", "where": [math.pi]}}
    fam = family_from_obj(obj)
    rep = check_family(fam, i_list=[2, 4], j_list=[2, 4], k_max=8, opts={"nr": 64, "nphi": 64})
    assert rep.verdicts["smooth-convergence"].status == "pass"
    assert rep.verdicts["m-edge-volume"].status == "pass"
    with pytest.raises(ValueError):
        fam.generator(3)


def test_verdict_passed():
    assert Verdict("pass", {}, []).passed and not Verdict("inconclusive", {}, []).passed

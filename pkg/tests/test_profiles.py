import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghflat.profiles import (BUMP_MASS, BlendSpec, PiecewiseError, PiecewiseProfile, ProfileSyntaxError,
                             as_profile, build_piecewise, bump_kernel, derivative_value, differentiate, expr,
                             mollify, parse_profile, profile_from_obj, render)


@pytest.mark.parametrize("text, r, want", [
    ("sin(r)", math.pi / 2, 1.0),
    ("1 + exp(1/(4*r*(r-1)))", 0.5, 1 + math.exp(-1)),
    ("(3.141592653589793 - r)^(-0.25)", math.pi - 1, 1.0),
    ("2^3 + r", 1.0, 9.0),
    ("-r^2", 3.0, -9.0),
    ("sqrt(abs(r - 5))", 1.0, 2.0),
    ("π - r", 0.0, math.pi),
])
def test_evaluation(text, r, want):
    assert parse_profile(text)(r) == pytest.approx(want, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("text", ["sin(r)", "1 + exp(1/(4*r*(r-1)))", "(pi - r)^(-0.25)",
                                  "-(2/pi)*(r - pi)", "abs(sin(2*r))", "r - -r", "cos(r)^2 / (1 + r)"])
def test_render_round_trip(text):
    e = parse_profile(text)
    again = parse_profile(render(e.ast))
    assert render(again.ast) == render(e.ast)
    x = np.linspace(0.1, 3.0, 17)
    np.testing.assert_allclose(again(x), e(x), rtol=1e-15)


@pytest.mark.parametrize("text, pos", [("sin(r", 5), ("sin(r))", 6), ("foo(r)", 0), ("r^r", 2), ("2 $ r", 2),
                                       ("", 0), ("1/0", 1)])
def test_syntax_errors_are_positioned(text, pos):
    with pytest.raises(ProfileSyntaxError) as e:
        parse_profile(text)
    assert e.value.pos == pos


def test_non_constant_exponent_rejected():
    with pytest.raises(ProfileSyntaxError, match="non-constant exponent"):
        parse_profile("r^(r+1)")


@pytest.mark.parametrize("text, order, r, want", [
    ("sin(r)", 1, 0.0, 1.0),
    ("sin(r)", 2, math.pi / 2, -1.0),
    ("(pi - r)^(-0.25)", 1, math.pi - 1, 0.25),
])
def test_derivative_examples(text, order, r, want):
    assert differentiate(parse_profile(text), order)(r) == pytest.approx(want, rel=1e-12)


BUILTIN = ["sin(r)", "1 + exp(1/(4*r*(r-1)))", "(pi - r)^(-0.25)", "(4/pi^2)*(r - pi)^2", "-(2/pi)*(r - pi)",
           "sin(r/2)", "exp(-r)", "sqrt(r + 1)", "1 + 10*exp(-1/((r - 0.2)*(0.9 - r)))"]


@pytest.mark.parametrize("text", BUILTIN)
def test_derivatives_match_finite_differences(text):
    e = parse_profile(text)
    x = np.linspace(0.25, 0.85, 64)
    step = 1e-5
    d1 = differentiate(e, 1)(x)
    fd1 = (e(x + step) - e(x - step)) / (2 * step)
    np.testing.assert_allclose(d1, fd1, rtol=1e-4, atol=1e-8)
    d2 = differentiate(e, 2)(x)
    fd2 = (d1_at(e, x + step) - d1_at(e, x - step)) / (2 * step)
    np.testing.assert_allclose(d2, fd2, rtol=1e-4, atol=1e-6)


def d1_at(e, x):
    return differentiate(e, 1)(x)


def test_abs_kink_one_sided():
    e = parse_profile("abs(r)")
    right = derivative_value(e, 0.0, 1, side=1)
    left = derivative_value(e, 0.0, 1, side=-1)
    assert right.one_sided[0] and left.one_sided[0]
    assert right.values[0] == pytest.approx(1.0)
    assert left.values[0] == pytest.approx(-1.0)


def test_piecewise_exact_match():
    p = build_piecewise([(0, math.pi / 2, "sin(r)"), (math.pi / 2, math.pi, "1")])
    assert p(math.pi / 2) == pytest.approx(1.0)
    assert p(3.0) == 1.0


def test_piecewise_jump_rejected():
    with pytest.raises(PiecewiseError):
        build_piecewise([(0, math.pi / 2, "1"), (math.pi / 2, math.pi, "2")])


def test_piecewise_gap_without_blend_rejected():
    with pytest.raises(PiecewiseError):
        build_piecewise([(0, 1, "1"), (1.5, 2, "1")])


def cone_f():
    return build_piecewise([(0, math.pi / 2, "sin(r)"), (3 * math.pi / 4, math.pi, "-(2/pi)*(r - pi)")],
                           [{"at": 5 * math.pi / 8, "kind": "quintic", "halfwidth": math.pi / 8}])


def test_cone_profile_blend_positive_and_sandwiched():
    f = cone_f()
    x = np.linspace(1e-6, math.pi - 1e-6, 2001)
    assert np.all(f(x) > 0)
    w = np.linspace(math.pi / 2, 3 * math.pi / 4, 201)
    lo = np.minimum(np.sin(w), -(2 / math.pi) * (w - math.pi))
    hi = np.maximum(np.sin(w), -(2 / math.pi) * (w - math.pi))
    v = f(w)
    assert np.all(v >= lo - 1e-12) and np.all(v <= hi + 1e-12)


def test_blend_is_c1_at_window_ends():
    f = cone_f()
    for c in (math.pi / 2, 3 * math.pi / 4):
        a, b = f.d(c - 1e-9, 1), f.d(c + 1e-9, 1)
        assert abs(a - b) < 1e-6


def test_piecewise_json_round_trip():
    f = cone_f()
    g = profile_from_obj(f.to_dict())
    x = np.linspace(0, math.pi, 101)
    np.testing.assert_allclose(g(x), f(x), rtol=1e-14)


def test_kernel_mass():
    from scipy.integrate import quad
    mass, _ = quad(lambda x: float(bump_kernel(x, 0.3)), -0.3, 0.3, epsabs=1e-13)
    assert mass == pytest.approx(1.0, abs=1e-9)
    assert BUMP_MASS > 0


def test_mollify_constant():
    m = mollify(as_profile(1.0), 0.1, domain=(0, 3))
    np.testing.assert_allclose(m(np.linspace(0.2, 2.8, 21)), 1.0, atol=1e-12)


def test_mollify_converges():
    base = expr("abs(sin(2*r))")
    x = np.linspace(0.3, 2.8, 801)
    gaps = []
    for w in (1 / 4, 1 / 8, 1 / 16):
        m = mollify(base, w, domain=(0, math.pi), kinks=(math.pi / 2,))
        gaps.append(float(np.max(np.abs(m(x) - base(x)))))
    assert gaps[0] > gaps[1] > gaps[2]


def test_mollify_is_c2_across_kink():
    m = mollify(expr("abs(sin(2*r))"), 1 / 8, domain=(0, math.pi), kinks=(math.pi / 2,))
    c = math.pi / 2
    for order in (1, 2):
        assert abs(m.d(c - 1e-7, order) - m.d(c + 1e-7, order)) < 1e-3


ALPHABET = list("r0123456789.+-*/^() ") + ["sin", "cos", "exp", "abs", "sqrt", "pi", "e", "x", "−"]


@settings(max_examples=400, deadline=None)
@given(st.lists(st.sampled_from(ALPHABET), max_size=30))
def test_parser_total(tokens):
    text = "".join(tokens)
    try:
        e = parse_profile(text)
    except ProfileSyntaxError as err:
        assert 0 <= err.pos <= len(text)
        return
    with np.errstate(all="ignore"):
        e(np.linspace(-2, 2, 5))


def test_deep_nesting_is_an_error():
    with pytest.raises(ProfileSyntaxError):
        parse_profile("(" * 5000 + "r" + ")" * 5000)


def test_piecewise_shared_across_threads():
    from concurrent.futures import ThreadPoolExecutor
    f = cone_f()
    x = np.linspace(0, math.pi, 1001)
    want = f(x)
    with ThreadPoolExecutor(4) as ex:
        outs = list(ex.map(lambda _: f(x), range(8)))
    for o in outs:
        np.testing.assert_array_equal(o, want)
    assert isinstance(f, PiecewiseProfile)
    assert BlendSpec(1.0).kind == "exact-match"

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachkit.homotopy import TrackerOptions
from reachkit.poly import PolyError, Polynomial, PolySystem, parse_system
from reachkit.reach import (
    BottleneckPair,
    DegenerateError,
    ReachReport,
    bottleneck_system,
    bottlenecks,
    curvature_at,
    curvature_points,
    curvature_system,
    max_curvature,
    narrowest_bottleneck,
    optimality_residual,
    polish_real,
    reach,
    tangent_defect,
)

ELLIPSE = parse_system("vars: x y\nx^2 + 4*y^2 - 4")
CIRCLE = parse_system("vars: x y\nx^2 + y^2 - 1")


def conic(a, b, theta=0.0, cx=0.0, cy=0.0, s=1.0):
    """Ellipse with semi-axes a, b rotated by theta about the origin, then shifted, then scaled by s."""
    X, Y = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
    u, v = X * (1.0 / s) - cx, Y * (1.0 / s) - cy
    c, sn = math.cos(theta), math.sin(theta)
    p, q = u * c + v * sn, -u * sn + v * c
    return p * p * (1.0 / a**2) + q * q * (1.0 / b**2) - 1.0


# ---------------------------------------------------------------- bottlenecks


def test_bottleneck_system_shape():
    B = bottleneck_system(ELLIPSE)
    assert B.nvars == 6 and len(B) == 6
    assert B.degrees == [2, 2, 2, 2, 2, 2]
    with pytest.raises(PolyError):
        bottleneck_system(parse_system("vars: x y\nx - 1\ny - 1"))


def test_ellipse_bottlenecks():
    pairs = bottlenecks(ELLIPSE)
    assert [p.width for p in pairs] == pytest.approx([2.0, 4.0], abs=1e-6)
    minor, major = pairs
    assert sorted(map(tuple, np.round([minor.x, minor.y], 9))) == [(0, -1), (0, 1)]
    assert sorted(map(tuple, np.round([major.x, major.y], 9))) == [(-2, 0), (2, 0)]
    assert narrowest_bottleneck(pairs) == pytest.approx(2.0, abs=1e-6)


def test_bottleneck_pairs_are_perpendicular():
    F = parse_system("vars: x y\nx^2 + 3*y^2 + x*y - 2")
    pairs = bottlenecks(F)
    assert len(pairs) == 2
    for p in pairs:
        assert tangent_defect(F, p) < 1e-8


def test_each_pair_reported_once():
    pairs = bottlenecks(ELLIPSE)
    for i, p in enumerate(pairs):
        for q in pairs[:i]:
            s = q.swapped()
            assert not (np.allclose(p.x, q.x) and np.allclose(p.y, q.y))
            assert not (np.allclose(p.x, s.x) and np.allclose(p.y, s.y))


def test_swapped_pair_also_solves():
    B = bottleneck_system(ELLIPSE)
    for p in bottlenecks(ELLIPSE):
        s = p.swapped()
        z = np.concatenate([s.x, s.y, s.lam, s.mu])
        assert B.residual(z) < 1e-10


def test_bottlenecks_of_a_space_ellipse():
    F = parse_system("vars: x y z\nx^2 + 4*y^2 - 4\nz")
    pairs = bottlenecks(F)
    assert [p.width for p in pairs] == pytest.approx([2.0, 4.0], abs=1e-6)
    for p in pairs:
        assert tangent_defect(F, p) < 1e-8


def test_no_real_bottleneck_warns():
    # a parabola has no pair of points with a common normal chord
    warns = []
    pairs = bottlenecks(parse_system("vars: x y\ny - x^2"), warnings=warns)
    assert pairs == [] and warns
    with pytest.raises(ValueError):
        narrowest_bottleneck(pairs)


def test_circle_is_degenerate():
    with pytest.raises(DegenerateError):
        bottlenecks(CIRCLE)
    with pytest.raises(DegenerateError):
        curvature_system(CIRCLE.polys[0])


def test_circle_reach_raises_with_partial_report():
    with pytest.raises(DegenerateError) as info:
        reach(CIRCLE)
    rep = info.value.report
    assert isinstance(rep, ReachReport)
    assert rep.tau is None and rep.warnings


# ---------------------------------------------------------------- curvature


def test_curvature_examples():
    f = ELLIPSE.polys[0]
    assert curvature_at(f, [2, 0]) == pytest.approx(2.0, rel=1e-12)
    assert curvature_at(f, [0, 1]) == pytest.approx(0.25, rel=1e-12)
    assert curvature_at(CIRCLE.polys[0], [1, 0]) == pytest.approx(1.0, rel=1e-12)
    assert curvature_at(parse_system("vars: x y\nx^2 - y^2").polys[0], [0, 0]) == math.inf


def test_curvature_matches_parametric_formula():
    f = ELLIPSE.polys[0]
    for t in np.linspace(0, 2 * np.pi, 13):
        x = [2 * np.cos(t), np.sin(t)]
        # kappa = ab / (a^2 sin^2 + b^2 cos^2)^(3/2)
        want = 2 / (4 * np.sin(t) ** 2 + np.cos(t) ** 2) ** 1.5
        assert curvature_at(f, x) == pytest.approx(want, rel=1e-10)


def test_ellipse_curvature_points():
    pts = curvature_points(ELLIPSE.polys[0])
    assert len(pts) == 4
    assert [p.kappa for p in pts] == pytest.approx([2, 2, 0.25, 0.25], rel=1e-10)
    assert all(p.optimality < 1e-6 for p in pts)


@settings(max_examples=8)
@given(
    st.floats(1.2, 4.0),
    st.floats(0.3, 1.0),
    st.floats(0, math.pi),
    st.floats(-2, 2),
    st.floats(-2, 2),
)
def test_random_ellipse_curvature(a, b, theta, cx, cy):
    f = conic(a, b, theta, cx, cy)
    sigma, _ = max_curvature(f)
    assert sigma == pytest.approx(a / b**2, rel=1e-8)


@settings(max_examples=5)
@given(st.floats(0.25, 4.0))
def test_reach_scales_linearly(s):
    base = reach(PolySystem(("x", "y"), (conic(2.0, 1.0),)))
    scaled = reach(PolySystem(("x", "y"), (conic(2.0, 1.0, s=s),)))
    assert scaled.rho == pytest.approx(base.rho * s, rel=1e-6)
    assert scaled.sigma == pytest.approx(base.sigma / s, rel=1e-6)
    assert scaled.tau == pytest.approx(base.tau * s, rel=1e-6)


def test_optimality_residual_vanishes_at_vertices_only():
    f = ELLIPSE.polys[0]
    assert optimality_residual(f, [2, 0]) < 1e-12
    assert optimality_residual(f, [math.sqrt(2), math.sqrt(0.5)]) > 1e-2


def test_polish_real_reaches_extended_precision():
    S = curvature_system(ELLIPSE.polys[0])
    x, ok = polish_real(S.polys, np.array([2.0 + 1e-5, 1e-5]))
    assert ok
    assert np.allclose(x, [2, 0], atol=1e-15)


def test_curvature_needs_planar_real_curve():
    with pytest.raises(PolyError):
        curvature_system(parse_system("vars: x y z\nx^2 + y^2 + z^2 - 1").polys[0])
    with pytest.raises(PolyError):
        curvature_points(parse_system("vars: x y\nx^2 + 1j*y^2 - 1").polys[0])


# ---------------------------------------------------------------- reach


def test_ellipse_reach():
    rep = reach(ELLIPSE)
    assert rep.rho == pytest.approx(2.0, abs=1e-6)
    assert rep.sigma == pytest.approx(2.0, abs=1e-6)
    assert rep.tau == pytest.approx(0.5, abs=1e-6)


def test_reach_of_space_curve_has_no_tau():
    rep = reach(parse_system("vars: x y z\nx^2 + 4*y^2 - 4\nz"))
    assert rep.rho == pytest.approx(2.0, abs=1e-6)
    assert rep.sigma is None and rep.tau is None
    assert any("planar" in w for w in rep.warnings)


def test_tau_takes_the_smaller_bound():
    rep = ReachReport(rho=1.0, sigma=0.1).combine()
    assert rep.tau == 0.5
    rep = ReachReport(rho=10.0, sigma=4.0).combine()
    assert rep.tau == 0.25


def test_report_json():
    d = json.loads(reach(ELLIPSE).to_json())
    assert set(d) == {"rho", "sigma", "tau", "bottlenecks", "curvature_points", "warnings"}
    assert set(d["bottlenecks"][0]) == {"x", "y", "lambda", "mu", "width", "residual"}
    assert set(d["curvature_points"][0]) == {"x", "kappa", "residual", "optimality"}


def test_reach_is_deterministic():
    f = parse_system("vars: x y\nx^2 + 3*y^2 + x*y - 2")
    opts = TrackerOptions(seed=11)
    assert reach(f, opts).to_json() == reach(f, opts).to_json()


def test_pair_width():
    p = BottleneckPair(np.array([0.0, 0.0]), np.array([3.0, 4.0]), np.zeros(1), np.zeros(1))
    assert p.width == 5.0
    assert p.swapped().x.tolist() == [3.0, 4.0]

import json

import numpy as np
import pytest

from conftest import cyclooctane_point, random_dense_system
from oracles import elimination_roots, match_sets
from reachkit.homotopy import (
    NoSolutionsError,
    PathStatus,
    TrackerOptions,
    collect_solutions,
    dedupe_points,
    is_real_point,
    make_start,
    newton_refine,
    solve_all,
    track_path,
    track_paths,
)
from reachkit.poly import PolyError, PolySystem, parse_system


# ---------------------------------------------------------------- start system


def test_start_points_for_univariate():
    F = parse_system("vars: x\nx^2 - 4")
    start, pts = make_start(F, 7)
    assert pts.shape == (2, 1)
    a = start.constants[0]
    assert np.allclose(pts[:, 0] ** 2, a, atol=1e-12)
    assert abs(abs(a) - 1) < 1e-15 and abs(abs(start.gamma) - 1) < 1e-15


def test_start_points_satisfy_start_system(rng):
    F = random_dense_system(rng, [2, 3, 2])
    start, pts = make_start(F, 3)
    assert len(pts) == 12
    for p in pts:
        assert start.system.residual(p) < 1e-12
    assert len(dedupe_points(list(pts), 1e-6)) == 12


def test_start_is_deterministic():
    F = parse_system("vars: x y\nx^2 + y^2 - 1\nx*y - 2")
    s1, p1 = make_start(F, 99)
    s2, p2 = make_start(F, 99)
    assert s1.gamma == s2.gamma
    assert np.array_equal(s1.constants, s2.constants)
    assert np.array_equal(p1, p2)
    s3, _ = make_start(F, 100)
    assert s3.gamma != s1.gamma


def test_start_rejects_non_square():
    with pytest.raises(PolyError):
        make_start(parse_system("vars: x y\nx^2 + y^2 - 1"))


# ---------------------------------------------------------------- single paths


@pytest.mark.parametrize("x0, end", [(1.0, 2.0), (-1.0, -2.0)])
def test_track_simple_path(x0, end):
    F = parse_system("vars: x\nx^2 - 4")
    G = parse_system("vars: x\nx^2 - 1")
    r = track_path(F, G, 1.0, [x0])
    assert r.status is PathStatus.SUCCESS
    assert abs(r.endpoint[0] - end) < 1e-12


def test_path_to_infinity_diverges():
    # x*y - 1 with y = 0 has no finite solution: both paths escape
    F = parse_system("vars: x y\nx*y - 1\ny")
    sols = solve_all(F, raise_on_empty=False)
    assert len(sols) == 0
    assert sols.diverged_count == 2


def test_all_paths_failing_is_reported():
    F = parse_system("vars: x y\nx*y - 1\ny")
    with pytest.raises(NoSolutionsError):
        solve_all(F)


def test_endpoints_on_a_line_component_are_singular():
    # x = 0 is a whole line of solutions; only (1, 1) is isolated
    F = parse_system("vars: x y\nx^2 - x\nx*y - x")
    sols = solve_all(F, raise_on_empty=False)
    assert len(sols) == 1
    assert np.allclose(sols.solutions[0].point, [1, 1], atol=1e-12)
    assert sols.singular_count == 2


def test_isolated_double_root_is_kept_with_reduced_accuracy():
    # condition estimate near 1e7 stays under the singular threshold
    sols = solve_all(parse_system("vars: x\n(x - 1)^2"), raise_on_empty=False)
    assert sols.singular_count + len(sols) >= 1
    for s in sols.solutions:
        assert abs(s.point[0] - 1) < 1e-6


# ---------------------------------------------------------------- Newton


def test_newton_refine_converges_fast():
    F = parse_system("vars: x\nx^2 - 1")
    x, res = newton_refine(F, [1.1], tol=1e-12, max_iter=5)
    assert abs(x[0] - 1) < 1e-12 and res < 1e-12


def test_newton_refine_fixed_point():
    F = parse_system("vars: x\nx^2 - 1")
    x, res = newton_refine(F, [1.0])
    assert x[0] == 1.0 and res == 0.0


def test_newton_refine_singular():
    F = parse_system("vars: x y\nx^2\ny - 1")
    with pytest.raises(np.linalg.LinAlgError):
        newton_refine(F, [0.0, 1.0])


def test_newton_error_decreases_monotonically(rng):
    F = random_dense_system(rng, [2, 2])
    root = solve_all(F).solutions[0].point
    x = root + 1e-2 * np.exp(2j * np.pi * rng.random(2)) / np.sqrt(2)
    errs = [np.max(np.abs(x - root))]
    for _ in range(5):
        x, _ = newton_refine(F, x, tol=0.0, max_iter=1)
        errs.append(np.max(np.abs(x - root)))
    for a, b in zip(errs, errs[1:]):
        assert b <= a or b < 1e-14
    # quadratic once close
    assert errs[3] < 1e-10


def test_perturbed_cyclooctane_point_polishes():
    from reachkit.sampling import SliceSpec, build_cyclooctane

    m = build_cyclooctane(c2=2)
    rng = np.random.default_rng(5)
    x = cyclooctane_point(m, rng)
    assert m.system.residual(x) < 1e-12
    # a slice through x makes it an isolated solution
    spec = SliceSpec.random(rng, 2, 17)
    spec = SliceSpec(spec.A, spec.A @ x)
    S = PolySystem(m.system.var_names, m.system.polys + tuple(spec.equations(17)))
    noisy = x + 1e-3 * rng.standard_normal(17)
    y, res = newton_refine(S, noisy, tol=1e-14, max_iter=20)
    assert res < 1e-10
    assert np.max(np.abs(y - x)) < 1e-8


# ---------------------------------------------------------------- solving


def test_solve_univariate():
    sols = solve_all(parse_system("vars: x\nx^2 - 1"))
    assert [s.point[0].real for s in sols.solutions] == pytest.approx([-1, 1], abs=1e-14)
    assert all(s.is_real for s in sols.solutions)


def test_circle_meets_line():
    sols = solve_all(parse_system("vars: x y\nx^2 + y^2 - 1\nx - y"))
    assert sols.bezout == 2
    pts = np.array([s.point.real for s in sols.solutions])
    r = np.sqrt(0.5)
    assert np.allclose(pts, [[-r, -r], [r, r]], atol=1e-12)
    assert all(s.is_real for s in sols.solutions)


@pytest.mark.parametrize("seed", range(3))
def test_random_quadrics_match_elimination(seed):
    rng = np.random.default_rng(100 + seed)
    F = random_dense_system(rng, [2, 2], ("x", "y"))
    sols = solve_all(F, TrackerOptions(seed=seed))
    assert sum(p.ok for p in sols.paths) == 4
    assert len(sols) == 4
    assert match_sets([s.point for s in sols.solutions], elimination_roots(F), 1e-6)


def test_cubic_times_quadric_matches_elimination():
    rng = np.random.default_rng(7)
    F = random_dense_system(rng, [3, 2], ("x", "y"))
    sols = solve_all(F)
    assert len(sols) == 6
    assert max(s.residual for s in sols.solutions) < 1e-10
    assert match_sets([s.point for s in sols.solutions], elimination_roots(F), 1e-6)


@pytest.mark.parametrize("deg", [1, 2, 3])
def test_univariate_matches_elimination(deg):
    rng = np.random.default_rng(deg)
    F = random_dense_system(rng, [deg], ("x",))
    sols = solve_all(F)
    assert match_sets([s.point for s in sols.solutions], elimination_roots(F), 1e-6)


def test_solutions_are_sorted_and_separated(rng):
    F = random_dense_system(rng, [3, 3])
    sols = solve_all(F)
    pts = [s.point for s in sols.solutions]
    keys = [tuple(np.column_stack([p.real, p.imag]).ravel()) for p in pts]
    assert keys == sorted(keys)
    for i in range(len(pts)):
        for j in range(i):
            d = max(np.max(np.abs(pts[i].real - pts[j].real)), np.max(np.abs(pts[i].imag - pts[j].imag)))
            assert d >= 1e-6


def test_same_result_for_one_and_two_workers(rng):
    F = random_dense_system(rng, [2, 3])
    a = solve_all(F, TrackerOptions(workers=1))
    b = solve_all(F, TrackerOptions(workers=2))
    assert a.to_json() == b.to_json()


def test_same_seed_same_json():
    F = parse_system("vars: x y\nx^3 - 2*x*y + 1\ny^2 - x - 3")
    assert solve_all(F).to_json() == solve_all(F).to_json()


def test_path_order_does_not_matter(rng):
    F = random_dense_system(rng, [2, 2])
    opts = TrackerOptions()
    start, pts = make_start(F, opts.seed)
    fwd = track_paths(F, start.system, start.gamma, pts, opts)
    rev = track_paths(F, start.system, start.gamma, pts[::-1].copy(), opts)
    a = collect_solutions(fwd, opts, 4)
    b = collect_solutions(rev, opts, 4)
    assert a.to_json() == b.to_json()


def test_real_flags_survive_conjugation():
    F = parse_system("vars: x y\nx^2 + y^2 - 4\nx*y - 1 + y^3")
    sols = solve_all(F)
    flags = [s.is_real for s in sols.solutions]
    conj = [is_real_point(np.conj(s.point), 1e-8) for s in sols.solutions]
    assert flags == conj
    reals = sorted(tuple(s.point.real) for s in sols.solutions if s.is_real)
    creals = sorted(tuple(np.conj(s.point).real) for s, f in zip(sols.solutions, conj) if f)
    assert reals == creals
    # a real-coefficient system has conjugate-closed solutions
    pts = [s.point for s in sols.solutions]
    assert match_sets(pts, [np.conj(p) for p in pts], 1e-8)


def test_is_real_rule():
    assert is_real_point(np.array([1 + 1e-9j]), 1e-8)
    assert not is_real_point(np.array([1 + 1e-7j]), 1e-8)
    assert is_real_point(np.array([1e6 + 1e-3j]), 1e-8)


def test_json_format():
    sols = solve_all(parse_system("vars: x\nx^2 - 1"))
    d = json.loads(sols.to_json())
    assert set(d) == {"solutions", "diverged", "failed", "bezout", "seed"}
    assert set(d["solutions"][0]) == {"point_re", "point_im", "residual", "is_real"}
    assert d["bezout"] == 2 and d["seed"] == TrackerOptions().seed


def test_options_validation():
    with pytest.raises(ValueError):
        TrackerOptions(step_min=0.2)
    with pytest.raises(ValueError):
        TrackerOptions(newton_tol=0)
    with pytest.raises(ValueError):
        TrackerOptions(seed=-1)
    with pytest.raises(ValueError):
        TrackerOptions(workers=0)

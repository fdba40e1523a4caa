"""Bottlenecks, planar curvature extremes and the reach of a real variety.

The reach is ``tau = min(1/sigma, rho/2)`` with ``rho`` the width of the
narrowest bottleneck and ``sigma`` the maximal curvature.  Bottlenecks come
from the critical-pair system

    F(x) = 0, F(y) = 0, JF(x)^T lam = x - y, JF(y)^T mu = x - y

whose trivial solutions ``x = y, lam = mu = 0`` form a positive-dimensional
component.  Paths ending there are discarded.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .homotopy import PathStatus, SolutionSet, TrackerOptions, _canonical_key, dedupe_points, solve_all
from .poly import PolyError, Polynomial, PolySystem, gradient
from .sampling import _fresh_names

log = logging.getLogger(__name__)

WITNESS_TOL = 1e-8
OPTIMALITY_TOL = 1e-6
DIAG_REL_TOL = 1e-4
DEGENERATE_FRACTION = 0.5
# candidates for high-precision polishing: endpoints this close to real
NEAR_REAL = 1e-4
POLISH_DPS = 60


class DegenerateError(RuntimeError):
    """Critical points are not isolated (e.g. a circle); carries any partial report."""

    def __init__(self, msg: str, report: ReachReport | None = None):
        super().__init__(msg)
        self.report = report


@dataclass
class BottleneckPair:
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    residual: float = 0.0

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.x - self.y))

    def swapped(self) -> BottleneckPair:
        # both multiplier equations use x - y, which changes sign under the swap
        return BottleneckPair(self.y, self.x, -self.mu, -self.lam, self.residual)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "width": self.width,
            "residual": self.residual,
        }


@dataclass
class CurvaturePoint:
    x: np.ndarray
    kappa: float
    residual: float = 0.0
    optimality: float = 0.0

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "kappa": self.kappa,
            "residual": self.residual,
            "optimality": self.optimality,
        }


@dataclass
class ReachReport:
    rho: float | None = None
    sigma: float | None = None
    tau: float | None = None
    bottlenecks: list[BottleneckPair] = field(default_factory=list)
    curvature_points: list[CurvaturePoint] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def combine(self):
        if self.rho is not None and self.sigma is not None:
            self.tau = min(1.0 / self.sigma, self.rho / 2.0)
        else:
            self.tau = None
        return self

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "sigma": self.sigma,
            "tau": self.tau,
            "bottlenecks": [b.to_dict() for b in self.bottlenecks],
            "curvature_points": [c.to_dict() for c in self.curvature_points],
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


# ---------------------------------------------------------------- bottlenecks


def bottleneck_system(F: PolySystem) -> PolySystem:
    """The square system in (x, y, lam, mu), 2n + 2s unknowns."""
    n, s = F.nvars, len(F)
    if s == 0 or s >= n:
        raise PolyError(f"need 0 < #equations < #variables, got {s} and {n}")
    N = 2 * n + 2 * s
    V = [Polynomial.variable(N, i) for i in range(N)]
    xs, ys, lam, mu = V[:n], V[n:2 * n], V[2 * n:2 * n + s], V[2 * n + s:]
    grads = [gradient(f) for f in F.polys]
    eqs = [f.substitute(xs) for f in F.polys] + [f.substitute(ys) for f in F.polys]
    for pt, mult in ((xs, lam), (ys, mu)):
        Jp = [[g.substitute(pt) for g in row] for row in grads]
        for j in range(n):
            e = ys[j] - xs[j]
            for i in range(s):
                e = e + mult[i] * Jp[i][j]
            eqs.append(e)
    xnames = [f"{v}_1" for v in F.var_names]
    ynames = [f"{v}_2" for v in F.var_names]
    taken = set(F.var_names) | set(xnames) | set(ynames)
    mult_names = _fresh_names(taken, "lam", s) + _fresh_names(taken, "mu", s)
    return PolySystem(tuple(xnames + ynames + mult_names), tuple(eqs))


def _pair_key(p: BottleneckPair):
    return _canonical_key(np.concatenate([p.x, p.y]).astype(complex))


def _canonical_pair(p: BottleneckPair, tol: float) -> BottleneckPair:
    """Orient the pair so x precedes y lexicographically, ignoring differences below tol."""
    for a, b in zip(p.x, p.y):
        if abs(a - b) > tol:
            return p if a < b else p.swapped()
    return p


def _is_near(a: BottleneckPair, b: BottleneckPair, tol: float) -> bool:
    u = np.concatenate([a.x, a.y, a.lam, a.mu])
    for c in (b, b.swapped()):
        v = np.concatenate([c.x, c.y, c.lam, c.mu])
        if float(np.max(np.abs(u - v))) < tol:
            return True
    return False


def _check_degenerate(sols: SolutionSet, diag_mask, what: str):
    """Raise when most non-diverging, off-diagonal paths end singular or lost."""
    bad = good = 0
    for p, on_diag in zip(sols.paths, diag_mask):
        if p.status is PathStatus.DIVERGED or on_diag:
            continue
        if p.ok:
            good += 1
        else:
            bad += 1
    if bad + good and bad > DEGENERATE_FRACTION * (bad + good):
        raise DegenerateError(
            f"{what}: {bad} of {bad + good} relevant paths ended singular or failed; "
            "the critical set is not isolated"
        )


def bottlenecks(F: PolySystem, opts: TrackerOptions | None = None, warnings: list | None = None) -> list[BottleneckPair]:
    """Real bottleneck pairs of ``{F = 0}``, each geometric pair once, sorted by width."""
    opts = opts or TrackerOptions()
    warnings = warnings if warnings is not None else []
    n, s = F.nvars, len(F)
    B = bottleneck_system(F)
    diag_tol = DIAG_REL_TOL * max(F.scale(), 1.0)
    sols = solve_all(B, opts, raise_on_empty=False)

    def near_diag(z):
        return bool(np.max(np.abs(z[:n] - z[n:2 * n])) < diag_tol)

    _check_degenerate(sols, [near_diag(p.endpoint) for p in sols.paths], "bottlenecks")

    found: list[BottleneckPair] = []
    for sol in sols.real_solutions():
        z = sol.point.real
        if near_diag(z):
            continue
        res = B.residual(z)
        if res >= WITNESS_TOL:
            warnings.append(f"bottleneck candidate dropped: residual {res:.3g}")
            continue
        pair = BottleneckPair(z[:n].copy(), z[n:2 * n].copy(), z[2 * n:2 * n + s].copy(), z[2 * n + s:].copy(), res)
        pair = _canonical_pair(pair, opts.dedupe_tol)
        if not any(_is_near(pair, q, opts.dedupe_tol) for q in found):
            found.append(pair)
    if not found:
        msg = "no real bottlenecks found"
        warnings.append(msg)
        log.warning(msg)
    found.sort(key=lambda p: (p.width, _pair_key(p)))
    return found


def narrowest_bottleneck(pairs: list[BottleneckPair]) -> float:
    if not pairs:
        raise ValueError("no bottlenecks to take the minimum over")
    return min(p.width for p in pairs)


def tangent_defect(F: PolySystem, pair: BottleneckPair) -> float:
    """max |(x - y) . t| / |x - y| over orthonormal tangent vectors t at x and at y."""
    d = pair.x - pair.y
    worst = 0.0
    for p in (pair.x, pair.y):
        J = np.array([[complex(g(p)).real for g in gradient(f)] for f in F.polys])
        _, sv, vt = np.linalg.svd(J)
        rank = int(np.sum(sv > 1e-12 * max(sv.max(), 1e-300)))
        T = vt[rank:]
        if T.size:
            worst = max(worst, float(np.max(np.abs(T @ d))))
    return worst / float(np.linalg.norm(d))


# ---------------------------------------------------------------- curvature


def _check_planar(f: Polynomial):
    if f.nvars != 2:
        raise PolyError(f"curvature needs a planar curve, got {f.nvars} variables")
    if f.is_constant():
        raise PolyError("curvature of a constant polynomial is undefined")


def curvature_parts(f: Polynomial):
    """(N, G) with kappa = |N| / G^(3/2): N the bordered Hessian form, G = |grad f|^2."""
    fx, fy = gradient(f)
    fxx, fxy = gradient(fx)
    fyy = fy.diff(1)
    N = fy * fy * fxx - 2 * fx * fy * fxy + fx * fx * fyy
    G = fx * fx + fy * fy
    return N, G


def curvature_direction(f: Polynomial):
    """Q with grad(N^2 / G^3) = 2 N Q / G^4, so grad(kappa) is parallel to Q."""
    N, G = curvature_parts(f)
    Nx, Ny = gradient(N)
    Gx, Gy = gradient(G)
    return 2 * G * Nx - 3 * N * Gx, 2 * G * Ny - 3 * N * Gy


def curvature_system(f: Polynomial, names=("x", "y")) -> PolySystem:
    """f = 0 together with det[Q, grad f] = 0.

    The condition is the polynomial form of grad(kappa^2) parallel to grad f
    with the common factor N * G^2 removed: points with N = 0 have kappa = 0
    and G = 0 are singular points of the curve, neither can carry the maximum.
    """
    _check_planar(f)
    fx, fy = gradient(f)
    Qx, Qy = curvature_direction(f)
    eq = Qx * fy - Qy * fx
    if eq.is_zero():
        raise DegenerateError("curvature is constant along the curve: no isolated critical points")
    return PolySystem(tuple(names), (f, eq))


def curvature_at(f: Polynomial, x) -> float:
    """|N| / G^(3/2), evaluated in extended precision; inf at singular points."""
    N, G = curvature_parts(f)
    with mpmath.workdps(POLISH_DPS):
        xm = [mpmath.mpf(float(v)) for v in np.real(x)]
        n, g = _mp_eval_many([N, G], xm)
        if g <= 0:
            return math.inf
        return float(abs(n) / g**1.5)


def optimality_residual(f: Polynomial, x) -> float:
    """Sine of the angle between grad(kappa) and the curve normal; 0 when grad(kappa) = 0."""
    fx, fy = gradient(f)
    Qx, Qy = curvature_direction(f)
    with mpmath.workdps(POLISH_DPS):
        xm = [mpmath.mpf(float(v)) for v in np.real(x)]
        q0, q1, g0, g1 = _mp_eval_many([Qx, Qy, fx, fy], xm)
        q, g = [q0, q1], [g0, g1]
        nq, ng = mpmath.sqrt(q[0] ** 2 + q[1] ** 2), mpmath.sqrt(g[0] ** 2 + g[1] ** 2)
        if nq == 0 or ng == 0:
            return 0.0
        return float(abs(q[0] * g[1] - q[1] * g[0]) / (nq * ng))


def _mp_eval_many(polys, x) -> list:
    """Evaluate real-coefficient polynomials at an mpf point, sharing the power table."""
    top = max((max(e, default=0) for p in polys for e, _ in p.terms), default=0)
    pw = []
    for xi in x:
        row = [mpmath.mpf(1)]
        for _ in range(top):
            row.append(row[-1] * xi)
        pw.append(row)
    out = []
    for p in polys:
        terms = []
        for e, c in p.terms:
            t = mpmath.mpf(c.real)
            for i, k in enumerate(e):
                if k:
                    t *= pw[i][k]
            terms.append(t)
        out.append(mpmath.fsum(terms))
    return out


def polish_real(polys, x0, dps: int = POLISH_DPS, max_iter: int = 40):
    """Real Newton in extended precision on a square system.

    Returns (point, converged).  Needs real coefficients.  Used where double
    precision cannot resolve a root because evaluation cancels heavily.
    """
    grads = [gradient(p) for p in polys]
    with mpmath.workdps(dps):
        x = [mpmath.mpf(float(v)) for v in x0]
        tol = mpmath.mpf(10) ** (-(dps // 2))
        for _ in range(max_iter):
            vals = _mp_eval_many(list(polys) + [g for row in grads for g in row], x)
            n = len(polys)
            f = mpmath.matrix(vals[:n])
            J = mpmath.matrix([vals[n + i * n: n + (i + 1) * n] for i in range(n)])
            try:
                d = mpmath.lu_solve(J, -f)
            except ZeroDivisionError:
                return np.array([float(v) for v in x]), False
            x = [xi + di for xi, di in zip(x, d)]
            if mpmath.norm(d, mpmath.inf) <= tol * (1 + mpmath.norm(mpmath.matrix(x), mpmath.inf)):
                return np.array([float(v) for v in x]), True
            if mpmath.norm(mpmath.matrix(x), mpmath.inf) > 1e12:
                break
    return np.array([float(v) for v in x]), False


def _has_real_coefficients(polys) -> bool:
    return all(c.imag == 0 for p in polys for _, c in p.terms)


def curvature_points(f: Polynomial, opts: TrackerOptions | None = None, warnings: list | None = None) -> list[CurvaturePoint]:
    """Real critical points of curvature on ``{f = 0}``, ordered by decreasing kappa.

    Every endpoint close to the real plane, successful or not, is polished in
    extended precision: near tight turns the curvature condition loses most
    of its digits to cancellation in double precision.
    """
    opts = opts or TrackerOptions()
    warnings = warnings if warnings is not None else []
    S = curvature_system(f)
    if not _has_real_coefficients(S.polys):
        raise PolyError("curvature needs a curve with real coefficients")
    sols = solve_all(S, opts, raise_on_empty=False)
    _check_degenerate(sols, [False] * len(sols.paths), "curvature")
    if sols.singular_count:
        warnings.append(f"curvature: {sols.singular_count} paths ended at singular points")
    cands = []
    for p in sols.paths:
        z = p.endpoint
        if p.status is PathStatus.DIVERGED or not np.all(np.isfinite(z)):
            continue
        if np.max(np.abs(z.imag)) <= NEAR_REAL * (1.0 + np.max(np.abs(z))):
            cands.append(z.real)
    cands = [cands[i] for i in dedupe_points([c.astype(complex) for c in cands], opts.dedupe_tol)]
    pts: list[CurvaturePoint] = []
    for c in cands:
        x, ok = polish_real(S.polys, c)
        if not ok or any(np.max(np.abs(x - q.x)) < opts.dedupe_tol for q in pts):
            continue
        res = abs(complex(f(x)))
        if res >= WITNESS_TOL:
            continue
        k = curvature_at(f, x)
        if not math.isfinite(k):
            warnings.append(f"curvature undefined at singular point {x.tolist()}")
            continue
        opt = optimality_residual(f, x)
        if opt >= OPTIMALITY_TOL:
            warnings.append(f"curvature candidate dropped: optimality residual {opt:.3g}")
            continue
        pts.append(CurvaturePoint(x, k, res, opt))
    pts.sort(key=lambda c: (-c.kappa, _canonical_key(c.x.astype(complex))))
    return pts


def max_curvature(f: Polynomial, opts: TrackerOptions | None = None, warnings: list | None = None) -> tuple[float, list[CurvaturePoint]]:
    pts = curvature_points(f, opts, warnings)
    if not pts:
        raise DegenerateError("no real critical points of curvature")
    return pts[0].kappa, pts


# ---------------------------------------------------------------- reach


def reach(F: PolySystem, opts: TrackerOptions | None = None) -> ReachReport:
    """rho from bottlenecks, sigma for planar curves, tau when both are known.

    Raises DegenerateError carrying the partial report if either part is
    degenerate; the other part is still computed.
    """
    opts = opts or TrackerOptions()
    report = ReachReport()
    problems = []
    try:
        report.bottlenecks = bottlenecks(F, opts, report.warnings)
        if report.bottlenecks:
            report.rho = narrowest_bottleneck(report.bottlenecks)
    except DegenerateError as exc:
        problems.append(str(exc))
    if F.nvars == 2 and len(F) == 1:
        try:
            report.sigma, report.curvature_points = max_curvature(F.polys[0], opts, report.warnings)
        except DegenerateError as exc:
            problems.append(str(exc))
    else:
        report.warnings.append("maximal curvature is only computed for planar curves: tau not reported")
    report.combine()
    if problems:
        report.warnings.extend(problems)
        raise DegenerateError("; ".join(problems), report)
    return report

"""Real point clouds on varieties: linear slicing and nearest-point projection.

Slicing intersects ``M = {F = 0}`` with random affine spaces of complementary
dimension.  Slice directions are standard normal (rotation invariant), but
the induced density on M is not uniform: it is weighted by how M sits
relative to random hyperplanes.  Good enough to feed a persistence
computation, not a sampler with coverage guarantees.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .homotopy import NoSolutionsError, SolutionSet, TrackerOptions, collect_solutions, solve_all, track_paths
from .poly import PolyError, Polynomial, PolySystem, gradient

log = logging.getLogger(__name__)

ON_VARIETY_TOL = 1e-8
# stream key for the generic complex slice, outside the range of slice indices
GENERIC_SLICE_KEY = 2**32


class NoRealPointError(RuntimeError):
    """The critical-point system had no usable real solution."""


@dataclass
class PointCloud:
    points: np.ndarray
    residuals: np.ndarray
    var_names: tuple[str, ...]
    provenance: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, len(self.var_names))
        self.residuals = np.asarray(self.residuals, dtype=float).ravel()
        if len(self.points) != len(self.residuals):
            raise ValueError("one residual per point")

    def __len__(self):
        return len(self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.var_names) + ["residual"])
        for p, r in zip(self.points, self.residuals):
            w.writerow([f"{v:.17g}" for v in p] + [f"{r:.17g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "var_names": list(self.var_names),
            "points": [[float(v) for v in p] for p in self.points],
            "residuals": [float(r) for r in self.residuals],
            "provenance": self.provenance,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


@dataclass(frozen=True)
class SliceSpec:
    A: np.ndarray
    b: np.ndarray

    @classmethod
    def random(cls, rng: np.random.Generator, m: int, n: int) -> SliceSpec:
        A = rng.standard_normal((m, n))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        return cls(A, rng.standard_normal(m))

    def equations(self, nvars: int) -> list[Polynomial]:
        eqs = []
        for row, off in zip(self.A, self.b):
            terms = {(0,) * nvars: -off}
            for j, a in enumerate(row):
                e = [0] * nvars
                e[j] = 1
                terms[tuple(e)] = a
            eqs.append(Polynomial(nvars, terms))
        return eqs

    def residual(self, x) -> float:
        return float(np.max(np.abs(self.A @ np.asarray(x) - self.b), initial=0.0))


def _slice_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1, np.uint64)[0])


def _rank_warning(F: PolySystem, x: np.ndarray) -> str | None:
    J = np.array([[complex(g(x)).real for g in gradient(f)] for f in F.polys])
    if J.size and np.linalg.matrix_rank(J, tol=1e-8 * max(1.0, np.abs(J).max())) < len(F):
        return f"Jacobian rank deficient at {x.tolist()}: not a complete intersection there"
    return None


def _slice_system(F: PolySystem, spec: SliceSpec) -> PolySystem:
    return PolySystem(F.var_names, F.polys + tuple(spec.equations(F.nvars)))


def generic_slice_solutions(F: PolySystem, dim_M: int, opts: TrackerOptions) -> tuple[PolySystem, np.ndarray, SolutionSet]:
    """Solve F on one random complex slice by total degree.

    Its finite solutions start a parameter homotopy to any other slice: for
    generic complex slice data the count of isolated solutions is maximal,
    so every isolated solution of a later slice is the end of one such path.
    """
    n = F.nvars
    rng = np.random.default_rng(_slice_seed(opts.seed, GENERIC_SLICE_KEY))
    A = rng.standard_normal((dim_M, n)) + 1j * rng.standard_normal((dim_M, n))
    b = rng.standard_normal(dim_M) + 1j * rng.standard_normal(dim_M)
    system = _slice_system(F, SliceSpec(A, b))
    sols = solve_all(system, replace(opts, seed=_slice_seed(opts.seed, GENERIC_SLICE_KEY)))
    return system, sols.points(), sols


def slice_sample(
    F: PolySystem,
    dim_M: int,
    n_slices: int,
    opts: TrackerOptions | None = None,
    method: str = "total-degree",
) -> PointCloud:
    """Real points of M on ``n_slices`` random real affine slices.

    The default solves every slice from scratch by total degree.
    method="parameter" solves one generic complex slice by total degree and
    moves its finite solutions to each real slice, tracking far fewer paths
    when most total-degree paths diverge.
    """
    opts = opts or TrackerOptions()
    n, s = F.nvars, len(F)
    if dim_M < 1 or s + dim_M != n:
        raise PolyError(
            f"need #equations + dim = #variables for slicing, got {s} + {dim_M} != {n}"
        )
    if method not in ("parameter", "total-degree"):
        raise ValueError(f"unknown slicing method {method!r}")
    points, residuals, prov, warnings = [], [], [], []
    if method == "parameter" and n_slices > 0:
        base, base_pts, base_sols = generic_slice_solutions(F, dim_M, opts)
        lost = base_sols.failed_count + base_sols.singular_count
        if lost:
            warnings.append(f"generic slice: {lost} paths failed or ended singular")
        log.info("generic slice has %d finite solutions", len(base_pts))
    for k in range(n_slices):
        seed_k = _slice_seed(opts.seed, k)
        rng = np.random.default_rng(seed_k)
        spec = SliceSpec.random(rng, dim_M, n)
        system = _slice_system(F, spec)
        if method == "parameter":
            gamma = complex(np.exp(2j * np.pi * rng.random()))
            paths = track_paths(system, base, gamma, base_pts, opts)
            sols = collect_solutions(paths, replace(opts, seed=seed_k), len(base_pts))
        else:
            sols = solve_all(system, replace(opts, seed=seed_k), raise_on_empty=False)
        if not len(sols):
            warnings.append(f"slice {k}: no path succeeded, skipped")
            continue
        for sol in sols.real_solutions():
            x = sol.point.real.copy()
            r = F.residual(x)
            if r >= ON_VARIETY_TOL or spec.residual(x) >= ON_VARIETY_TOL:
                warnings.append(f"slice {k}: dropped point with residual {r:.3g}")
                continue
            w = _rank_warning(F, x)
            if w:
                warnings.append(w)
            points.append(x)
            residuals.append(r)
            prov.append({"slice": k, "slice_seed": seed_k})
    return PointCloud(np.array(points).reshape(-1, n), np.array(residuals), F.var_names, prov, warnings)


def _fresh_names(taken, stem: str, k: int) -> list[str]:
    out = []
    i = 1
    while len(out) < k:
        name = f"{stem}{i}"
        if name not in taken:
            out.append(name)
        i += 1
    return out


def lagrange_system(F: PolySystem, q) -> PolySystem:
    """F(x) = 0 and JF(x)^T lam - (x - q) = 0 in the n + s unknowns (x, lam)."""
    n, s = F.nvars, len(F)
    q = np.asarray(q, dtype=float).ravel()
    if q.shape[0] != n:
        raise PolyError(f"query point has {q.shape[0]} coordinates, expected {n}")
    N = n + s
    X = [Polynomial.variable(N, i) for i in range(N)]
    xs, lam = X[:n], X[n:]
    lift = [f.substitute(xs) for f in F.polys]
    grads = [[g.substitute(xs) for g in gradient(f)] for f in F.polys]
    eqs = list(lift)
    for j in range(n):
        e = -(xs[j] - float(q[j]))
        for i in range(s):
            e = e + lam[i] * grads[i][j]
        eqs.append(e)
    names = F.var_names + tuple(_fresh_names(F.var_names, "lam", s))
    return PolySystem(names, tuple(eqs))


def nearest_point(F: PolySystem, q, opts: TrackerOptions | None = None) -> tuple[np.ndarray, float]:
    """Closest real point of ``{F = 0}`` to q among the Lagrange critical points."""
    opts = opts or TrackerOptions()
    n = F.nvars
    q = np.asarray(q, dtype=float).ravel()
    system = lagrange_system(F, q)
    try:
        sols = solve_all(system, opts)
    except NoSolutionsError as exc:
        raise NoRealPointError(str(exc)) from exc
    best = None
    for sol in sols.real_solutions():  # canonical order, so ties go to the first
        x = sol.point.real[:n]
        if F.residual(x) >= ON_VARIETY_TOL:
            continue
        d = float(np.linalg.norm(x - q))
        if best is None or d < best[1]:
            best = (x, d)
    if best is None:
        raise NoRealPointError(f"no real critical point of the distance to {q.tolist()}")
    return best


def nearest_sample(F: PolySystem, queries, opts: TrackerOptions | None = None) -> PointCloud:
    """Project each query point to M; queries with no real critical point are skipped."""
    opts = opts or TrackerOptions()
    pts, res, prov, warns = [], [], [], []
    for q in np.atleast_2d(np.asarray(queries, dtype=float)):
        try:
            x, d = nearest_point(F, q, opts)
        except NoRealPointError as exc:
            warns.append(str(exc))
            continue
        pts.append(x)
        res.append(F.residual(x))
        prov.append({"query": [float(v) for v in q], "distance": d})
    return PointCloud(np.array(pts).reshape(-1, F.nvars), np.array(res), F.var_names, prov, warns)


# ---------------------------------------------------------------- cyclooctane

NEIGHBOR_PAIRS = [(i, (i + 1) % 8) for i in range(8)]
SECOND_PAIRS = [(i, (i + 2) % 8) for i in range(8)]
SECOND_NEIGHBOR_RATIO = 8.0 / 3.0

REDUCED_NAMES = ("x3_1", "x3_2") + tuple(f"x{a}_{k}" for a in range(4, 9) for k in (1, 2, 3))
FULL_NAMES = tuple(f"x{a}_{k}" for a in range(1, 9) for k in (1, 2, 3))


def _ring_equations(atoms, c2):
    """The 16 distance equations for atom coordinate triples (polynomials or numbers)."""
    eqs = []
    for i, j in NEIGHBOR_PAIRS:
        eqs.append(sum((atoms[i][k] - atoms[j][k]) ** 2 for k in range(3)) - c2)
    for i, j in SECOND_PAIRS:
        eqs.append(sum((atoms[i][k] - atoms[j][k]) ** 2 for k in range(3)) - SECOND_NEIGHBOR_RATIO * c2)
    return eqs


@dataclass(frozen=True)
class CyclooctaneModel:
    """Eight-atom ring with bond length c, with rigid motions fixed.

    x1 = (0,0,0), x2 = (c,0,0), x3 = (u,v,0).  The bond equation between x1
    and x2 is then constant and dropped, leaving 15 quadratics in 17
    unknowns: a surface.
    """

    c: float
    system: PolySystem
    full: PolySystem

    @property
    def dim(self) -> int:
        return self.system.nvars - len(self.system)

    def embed(self, point) -> np.ndarray:
        z = np.asarray(point).ravel()
        if z.shape[0] != 17:
            raise ValueError("reduced cyclooctane points have 17 coordinates")
        head = np.array([0.0, 0.0, 0.0, self.c, 0.0, 0.0, z[0], z[1], 0.0], dtype=z.dtype)
        return np.concatenate([head, z[2:]])

    def full_residuals(self, point) -> np.ndarray:
        """All 16 ring equations at the embedded 24-coordinate configuration."""
        return np.abs(self.full.evaluate(self.embed(point)))

    def sample(self, n_slices: int, opts: TrackerOptions | None = None, method: str = "total-degree") -> PointCloud:
        cloud = slice_sample(self.system, self.dim, n_slices, opts, method)
        keep = [i for i, p in enumerate(cloud.points) if self.full_residuals(p).max() < ON_VARIETY_TOL]
        dropped = len(cloud) - len(keep)
        warns = list(cloud.warnings)
        if dropped:
            warns.append(f"{dropped} points failed the 24-coordinate check")
        full_pts = np.array([self.embed(cloud.points[i]) for i in keep]).reshape(-1, 24)
        res = np.array([self.full_residuals(cloud.points[i]).max() for i in keep])
        return PointCloud(full_pts, res, FULL_NAMES, [cloud.provenance[i] for i in keep], warns)


def build_cyclooctane(c: float | None = None, *, c2: float | None = None) -> CyclooctaneModel:
    """Reduced ring system from the bond length c or its square c2 (exactly one)."""
    if (c is None) == (c2 is None):
        raise ValueError("give exactly one of c and c2")
    if c2 is None:
        c2 = c * c
    else:
        c = math.sqrt(c2)
    if not (c > 0 and math.isfinite(c) and c2 > 0):
        raise ValueError(f"bond length must be positive and finite, got c={c}")
    N = 17
    V = [Polynomial.variable(N, i) for i in range(N)]
    zero = Polynomial.zero(N)
    atoms = [
        [zero, zero, zero],
        [zero + c, zero, zero],
        [V[0], V[1], zero],
    ] + [V[2 + 3 * a: 5 + 3 * a] for a in range(5)]
    eqs = _ring_equations(atoms, c2)
    constant = [e for e in eqs if e.is_constant()]
    assert len(constant) == 1 and abs(evaluate_constant(constant[0])) < 1e-12
    reduced = PolySystem(REDUCED_NAMES, tuple(e for e in eqs if not e.is_constant()))

    M = 24
    W = [Polynomial.variable(M, i) for i in range(M)]
    full = PolySystem(FULL_NAMES, tuple(_ring_equations([W[3 * a: 3 * a + 3] for a in range(8)], c2)))
    return CyclooctaneModel(float(c), reduced, full)


def evaluate_constant(p: Polynomial) -> complex:
    return sum((c for _, c in p.terms), 0j)

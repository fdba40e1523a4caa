"""Total-degree homotopy continuation for square polynomial systems.

The homotopy is ``H(x, t) = gamma (1 - t) G(x) + t F(x)`` with start system
``G_i = x_i^{d_i} - a_i``.  Every one of the ``D = prod(d_i)`` start
solutions is tracked from t=0 to t=1 with a fourth-order Runge-Kutta
predictor on the Davidenko equation and a Newton corrector, then polished
by Newton on F.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .poly import Polynomial, PolyError, PolySystem, bezout_number

log = logging.getLogger(__name__)

DEFAULT_SEED = 20200301
SINGULAR_COND = 1e12


class NoSolutionsError(RuntimeError):
    """Every path of a solve failed or diverged."""


class PathStatus(enum.Enum):
    SUCCESS = K.SUCCESS
    DIVERGED = K.DIVERGED
    STEPS_EXCEEDED = K.STEPS_EXCEEDED
    SINGULAR_ENDPOINT = K.SINGULAR
    FAILED = K.FAILED


@dataclass(frozen=True)
class TrackerOptions:
    step_initial: float = 0.05
    step_min: float = 1e-14
    step_max: float = 0.1
    newton_tol: float = 1e-10
    newton_max_iter: int = 10
    max_steps: int = 10000
    divergence_norm: float = 1e8
    final_refine_tol: float = 1e-12
    dedupe_tol: float = 1e-6
    real_tol: float = 1e-8
    seed: int = DEFAULT_SEED
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.step_min <= self.step_initial <= self.step_max <= 1:
            raise ValueError("need 0 < step_min <= step_initial <= step_max <= 1")
        for name in ("newton_tol", "divergence_norm", "final_refine_tol", "dedupe_tol", "real_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_max_iter < 1 or self.max_steps < 1 or self.workers < 1:
            raise ValueError("iteration counts and workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def kernel_vector(self) -> np.ndarray:
        v = np.empty(K.N_OPTS)
        v[K.OPT_STEP_INIT] = self.step_initial
        v[K.OPT_STEP_MIN] = self.step_min
        v[K.OPT_STEP_MAX] = self.step_max
        v[K.OPT_NEWTON_TOL] = self.newton_tol
        v[K.OPT_NEWTON_MAX_ITER] = self.newton_max_iter
        v[K.OPT_MAX_STEPS] = self.max_steps
        v[K.OPT_DIVERGENCE] = self.divergence_norm
        v[K.OPT_FINAL_TOL] = self.final_refine_tol
        v[K.OPT_SINGULAR_COND] = SINGULAR_COND
        return v

    def with_seed(self, seed: int) -> TrackerOptions:
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class StartSystem:
    degrees: tuple[int, ...]
    constants: np.ndarray
    gamma: complex
    system: PolySystem

    @property
    def count(self) -> int:
        return int(np.prod(self.degrees))

    def start_points(self) -> np.ndarray:
        """All D start solutions, row-major over root indices (last variable fastest)."""
        roots = [
            a ** (1.0 / d) * np.exp(2j * np.pi * np.arange(d) / d)
            for a, d in zip(self.constants, self.degrees)
        ]
        n = len(self.degrees)
        grids = np.meshgrid(*roots, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1).reshape(-1, n)


@dataclass
class PathResult:
    status: PathStatus
    endpoint: np.ndarray
    residual: float
    steps_used: int
    start_index: int
    norm: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status is PathStatus.SUCCESS


@dataclass
class Solution:
    point: np.ndarray
    residual: float
    is_real: bool

    @property
    def real_point(self) -> np.ndarray:
        return self.point.real.copy()


@dataclass
class SolutionSet:
    solutions: list[Solution]
    diverged_count: int = 0
    failed_count: int = 0
    singular_count: int = 0
    bezout: int = 0
    seed: int = DEFAULT_SEED
    paths: list[PathResult] = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.solutions)

    def real_solutions(self) -> list[Solution]:
        return [s for s in self.solutions if s.is_real]

    def points(self) -> np.ndarray:
        if not self.solutions:
            return np.zeros((0, 0), dtype=complex)
        return np.array([s.point for s in self.solutions])

    def to_dict(self) -> dict:
        return {
            "solutions": [
                {
                    "point_re": [float(v) for v in s.point.real],
                    "point_im": [float(v) for v in s.point.imag],
                    "residual": float(s.residual),
                    "is_real": bool(s.is_real),
                }
                for s in self.solutions
            ],
            "diverged": self.diverged_count,
            "failed": self.failed_count,
            "bezout": self.bezout,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _check_square(F: PolySystem):
    if not F.is_square():
        raise PolyError(f"system is not square: {len(F)} equations in {F.nvars} variables")


def _unit_phases(rng: np.random.Generator, k: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(k))


def make_start(F: PolySystem, seed: int = DEFAULT_SEED) -> tuple[StartSystem, np.ndarray]:
    _check_square(F)
    degrees = tuple(int(d) for d in F.degrees)
    if any(not d >= 1 for d in degrees):
        raise PolyError("every polynomial must have degree >= 1")
    rng = np.random.default_rng(seed)
    a = _unit_phases(rng, len(degrees))
    gamma = complex(_unit_phases(rng, 1)[0])
    n = F.nvars
    polys = []
    for i, d in enumerate(degrees):
        e = [0] * n
        e[i] = d
        polys.append(Polynomial(n, {tuple(e): 1.0, (0,) * n: -a[i]}))
    G = PolySystem(F.var_names, tuple(polys))
    start = StartSystem(degrees, a, gamma, G)
    return start, start.start_points()


def _run_chunk(args):
    Fs, Gs, gamma, starts, optv = args
    N, n = starts.shape
    status = np.empty(N, dtype=np.int64)
    ends = np.empty((N, n), dtype=np.complex128)
    res = np.empty(N)
    steps = np.empty(N, dtype=np.int64)
    norms = np.empty(N)
    K.track_many(Fs, Gs, gamma, starts, optv, status, ends, res, steps, norms, K.make_work(Fs, Gs, n))
    return status, ends, res, steps, norms


def track_paths(
    F: PolySystem, G: PolySystem, gamma: complex, starts: np.ndarray, opts: TrackerOptions
) -> list[PathResult]:
    """Track many start points; work is split into contiguous chunks per worker."""
    starts = np.ascontiguousarray(np.atleast_2d(starts), dtype=np.complex128)
    Fs = K.compile_system(F.polys, F.nvars)
    Gs = K.compile_system(G.polys, G.nvars)
    optv = opts.kernel_vector()
    workers = max(1, min(opts.workers, len(starts)))
    if workers == 1:
        parts = [_run_chunk((Fs, Gs, complex(gamma), starts, optv))]
    else:
        chunks = np.array_split(starts, workers)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_chunk, [(Fs, Gs, complex(gamma), c, optv) for c in chunks]))
    status, ends, res, steps, norms = (np.concatenate(x) for x in zip(*parts))
    return [
        PathResult(PathStatus(int(status[i])), ends[i], float(res[i]), int(steps[i]), i, float(norms[i]))
        for i in range(len(starts))
    ]


def track_path(
    F: PolySystem, G: PolySystem, gamma: complex, x0, opts: TrackerOptions | None = None
) -> PathResult:
    opts = opts or TrackerOptions()
    return track_paths(F, G, gamma, np.asarray(x0, dtype=complex).reshape(1, -1), replace(opts, workers=1))[0]


def newton_refine(F: PolySystem, x, tol: float = 1e-12, max_iter: int = 10) -> tuple[np.ndarray, float]:
    """Newton's method on a square system.  Returns (point, max-norm residual)."""
    _check_square(F)
    x = np.asarray(x, dtype=np.complex128).ravel().copy()
    Fs = K.compile_system(F.polys, F.nvars)
    out = np.empty_like(x)
    _, res, rc, _, _ = K.newton_system(Fs, x, tol, max_iter, out)
    if rc * SINGULAR_COND < 1.0:
        raise np.linalg.LinAlgError(f"singular Jacobian at Newton iterate (rcond {rc:.3g})")
    return out, float(res)


def is_real_point(x: np.ndarray, real_tol: float) -> bool:
    return bool(np.max(np.abs(x.imag), initial=0.0) < real_tol * (1.0 + np.max(np.abs(x), initial=0.0)))


def _canonical_key(x: np.ndarray):
    return tuple(itertools.chain.from_iterable((float(v.real), float(v.imag)) for v in x))


def dedupe_points(points: list[np.ndarray], tol: float) -> list[int]:
    """Indices of a maximal subset pairwise farther apart than tol (inf-norm on re/im)."""
    order = sorted(range(len(points)), key=lambda i: _canonical_key(points[i]))
    kept: list[int] = []
    for i in order:
        p = points[i]
        dup = False
        # kept is sorted by first real coordinate, so scan back while that stays within tol
        for j in reversed(kept):
            q = points[j]
            if p[0].real - q[0].real > tol:
                break
            d = max(np.max(np.abs(p.real - q.real)), np.max(np.abs(p.imag - q.imag)))
            if d < tol:
                dup = True
                break
        if not dup:
            kept.append(i)
    return kept


def collect_solutions(paths: list[PathResult], opts: TrackerOptions, bezout: int) -> SolutionSet:
    good = [p for p in paths if p.ok]
    kept = dedupe_points([p.endpoint for p in good], opts.dedupe_tol)
    sols = [
        Solution(good[i].endpoint.copy(), good[i].residual, is_real_point(good[i].endpoint, opts.real_tol))
        for i in kept
    ]
    sols.sort(key=lambda s: _canonical_key(s.point))
    counts = {st: 0 for st in PathStatus}
    for p in paths:
        counts[p.status] += 1
    return SolutionSet(
        solutions=sols,
        diverged_count=counts[PathStatus.DIVERGED],
        failed_count=counts[PathStatus.FAILED] + counts[PathStatus.STEPS_EXCEEDED],
        singular_count=counts[PathStatus.SINGULAR_ENDPOINT],
        bezout=bezout,
        seed=opts.seed,
        paths=paths,
    )


def solve_all(F: PolySystem, opts: TrackerOptions | None = None, *, raise_on_empty: bool = True) -> SolutionSet:
    """All isolated nonsingular solutions reachable by the total-degree homotopy."""
    opts = opts or TrackerOptions()
    _check_square(F)
    D = bezout_number(F)
    start, starts = make_start(F, opts.seed)
    log.debug("tracking %d paths in %d variables", D, F.nvars)
    paths = track_paths(F, start.system, start.gamma, starts, opts)
    sols = collect_solutions(paths, opts, D)
    if raise_on_empty and not any(p.ok for p in paths):
        raise NoSolutionsError(
            f"all {D} paths failed (diverged {sols.diverged_count}, "
            f"singular {sols.singular_count}, failed {sols.failed_count})"
        )
    return sols


def default_workers() -> int:
    return max(1, int(os.environ.get("REACHKIT_WORKERS", "1")))

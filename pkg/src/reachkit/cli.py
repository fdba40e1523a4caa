"""``reach-kit`` command line.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.  Errors
are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .homotopy import DEFAULT_SEED, NoSolutionsError, TrackerOptions, solve_all
from .poly import PolyError, PolySystem, parse_system
from .reach import DegenerateError, ReachReport, bottlenecks, max_curvature, reach
from .sampling import NoRealPointError, build_cyclooctane, nearest_sample, slice_sample

log = logging.getLogger(__name__)

BUILTIN_MODELS = ("fig2_curve", "ellipse", "circle", "circle_line", "cyclooctane")
COMMANDS = ("solve", "sample-slice", "sample-nearest", "cyclooctane", "bottlenecks", "curvature", "reach", "plot")
NEEDS_INPUT = set(COMMANDS) - {"cyclooctane"}
DEFAULT_FORMAT = {"sample-slice": "csv", "sample-nearest": "csv", "cyclooctane": "csv", "plot": "svg"}

# flag name -> TrackerOptions field
TRACKER_FLAGS = {
    "tol_newton": "newton_tol",
    "tol_final": "final_refine_tol",
    "dedupe_tol": "dedupe_tol",
    "real_tol": "real_tol",
    "max_steps": "max_steps",
    "step_init": "step_initial",
    "step_min": "step_min",
    "step_max": "step_max",
    "seed": "seed",
    "workers": "workers",
}


class UsageError(Exception):
    pass


class NumericalError(Exception):
    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    fmt: str | None = None
    opts: TrackerOptions = field(default_factory=TrackerOptions)
    n_slices: int = 10
    c2: float = 2.0
    dim: int | None = None
    queries: list[list[float]] = field(default_factory=list)
    method: str = "total-degree"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reach-kit", description="Homotopy continuation, variety sampling and reach.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("input", nargs="?", help="system file or builtin model: " + ", ".join(BUILTIN_MODELS))
    p.add_argument("-o", "--output", help="output path (default stdout)")
    p.add_argument("--format", dest="fmt", choices=("json", "csv", "svg"))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int)
    p.add_argument("--tol-newton", type=float)
    p.add_argument("--tol-final", type=float)
    p.add_argument("--dedupe-tol", type=float)
    p.add_argument("--real-tol", type=float)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--step-init", type=float)
    p.add_argument("--step-min", type=float)
    p.add_argument("--step-max", type=float)
    p.add_argument("--slices", type=int, default=10)
    p.add_argument("--dim", type=int, help="dimension of the variety (default: #vars - #equations)")
    p.add_argument("--c2", type=float, default=2.0, help="squared bond length for cyclooctane")
    p.add_argument("--query", action="append", default=[], help='query point "v1,v2,..." (repeatable)')
    p.add_argument("--method", choices=("total-degree", "parameter"), default="total-degree",
                   help="slicing homotopy: total degree per slice, or one generic slice moved to each")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _parse_query(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad query point {text!r}: expected comma-separated numbers") from None


def make_config(argv) -> RunConfig:
    a = build_parser().parse_args(argv)
    over = {fld: getattr(a, flag) for flag, fld in TRACKER_FLAGS.items() if getattr(a, flag) is not None}
    try:
        opts = replace(TrackerOptions(), **over)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if a.command in NEEDS_INPUT and not a.input:
        raise UsageError(f"{a.command} needs an input system")
    if a.output:
        parent = Path(a.output).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise UsageError(f"cannot write output {a.output}: directory missing or read-only")
    if a.slices < 0:
        raise UsageError("--slices must be non-negative")
    if a.command == "sample-nearest" and not a.query:
        raise UsageError("sample-nearest needs at least one --query")
    return RunConfig(
        command=a.command,
        input=a.input,
        output=a.output,
        fmt=a.fmt or DEFAULT_FORMAT.get(a.command, "json"),
        opts=opts,
        n_slices=a.slices,
        c2=a.c2,
        dim=a.dim,
        queries=[_parse_query(q) for q in a.query],
        method=a.method,
    )


def load_system(name: str) -> PolySystem:
    """A system file path, or the name of a builtin model (a path whose stem is one also works)."""
    path = Path(name)
    if path.is_file():
        return parse_system(path.read_text(encoding="utf-8"))
    stem = path.name[:-4] if path.name.endswith(".sys") else path.name
    if stem in BUILTIN_MODELS:
        text = resources.files("reachkit.models").joinpath(f"{stem}.sys").read_text(encoding="utf-8")
        return parse_system(text)
    raise UsageError(f"no such system file or builtin model: {name}")


def _curve(F: PolySystem):
    if F.nvars != 2 or len(F) != 1:
        raise UsageError("this command needs a single equation in two variables")
    return F.polys[0]


def _check_format(cfg: RunConfig, allowed):
    if cfg.fmt not in allowed:
        raise UsageError(f"{cfg.command} writes {'/'.join(allowed)}, not {cfg.fmt}")


def _cloud_text(cfg: RunConfig, cloud) -> str:
    _check_format(cfg, ("csv", "json"))
    if not len(cloud):
        raise NumericalError("no real points found", cloud.to_dict())
    return cloud.to_csv() if cfg.fmt == "csv" else cloud.to_json()


def execute(cfg: RunConfig) -> str:
    opts = cfg.opts
    if cfg.command == "cyclooctane":
        model = build_cyclooctane(c2=cfg.c2)
        return _cloud_text(cfg, model.sample(cfg.n_slices, opts, cfg.method))
    F = load_system(cfg.input)
    if cfg.command == "solve":
        _check_format(cfg, ("json",))
        return solve_all(F, opts).to_json() + "\n"
    if cfg.command == "sample-slice":
        dim = cfg.dim if cfg.dim is not None else F.nvars - len(F)
        return _cloud_text(cfg, slice_sample(F, dim, cfg.n_slices, opts, cfg.method))
    if cfg.command == "sample-nearest":
        return _cloud_text(cfg, nearest_sample(F, np.array(cfg.queries), opts))
    if cfg.command == "bottlenecks":
        _check_format(cfg, ("json",))
        warns: list[str] = []
        pairs = bottlenecks(F, opts, warns)
        rho = min((p.width for p in pairs), default=None)
        return json.dumps({"rho": rho, "bottlenecks": [p.to_dict() for p in pairs], "warnings": warns}, indent=1) + "\n"
    if cfg.command == "curvature":
        _check_format(cfg, ("json",))
        warns = []
        sigma, pts = max_curvature(_curve(F), opts, warns)
        return json.dumps({"sigma": sigma, "curvature_points": [c.to_dict() for c in pts], "warnings": warns}, indent=1) + "\n"
    if cfg.command in ("reach", "plot"):
        if cfg.command == "plot":
            _curve(F)
        report = reach(F, opts)
        if cfg.fmt == "svg":
            from .svg import render

            return render(_curve(F), report)
        _check_format(cfg, ("json", "svg"))
        return report.to_json() + "\n"
    raise UsageError(f"unknown command {cfg.command}")


def _fail(code: int, kind: str, msg: str, partial=None) -> int:
    err = {"error": kind, "message": msg}
    if partial is not None:
        err["partial"] = partial
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = make_config(argv)
    except UsageError as exc:
        return _fail(1, "usage", str(exc))
    if "-v" in argv or "--verbose" in argv:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        text = execute(cfg)
    except UsageError as exc:
        return _fail(1, "usage", str(exc))
    except PolyError as exc:
        return _fail(1, "input", str(exc))
    except DegenerateError as exc:
        return _fail(2, "degenerate", str(exc), exc.report.to_dict() if isinstance(exc.report, ReachReport) else None)
    except (NoSolutionsError, NoRealPointError) as exc:
        return _fail(2, "no-solutions", str(exc))
    except NumericalError as exc:
        return _fail(2, "no-solutions", str(exc), exc.partial)
    if cfg.output:
        try:
            Path(cfg.output).write_text(text, encoding="utf-8")
        except OSError as exc:
            return _fail(1, "output", f"cannot write {cfg.output}: {exc}")
    else:
        sys.stdout.write(text)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

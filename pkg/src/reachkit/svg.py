"""SVG rendering of a planar curve with its bottlenecks and curvature witnesses.

Two panels side by side: the curve with bottleneck segments (narrowest in
red), and the curve with critical points of curvature (the maximum in red).
"""

from __future__ import annotations

import numpy as np
from skimage.measure import find_contours

from .poly import Polynomial
from .reach import ReachReport

GRID = 800
PAD = 0.2
PANEL = 480
MARGIN = 20
HIGHLIGHT = "#d62728"
MUTED = "#1f77b4"


def _viewport(report: ReachReport, pad: float = PAD):
    pts = [p for b in report.bottlenecks for p in (b.x, b.y)] + [c.x for c in report.curvature_points]
    if not pts:
        return (-1.0, 1.0, -1.0, 1.0)
    P = np.array(pts, dtype=float)
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - pad * span, hi + pad * span
    # square viewport so circles stay circles
    c, half = (lo + hi) / 2, (hi - lo).max() / 2
    return (c[0] - half, c[0] + half, c[1] - half, c[1] + half)


def curve_polylines(f: Polynomial, box, grid: int = GRID) -> list[np.ndarray]:
    """Zero set of f in box = (xmin, xmax, ymin, ymax) as (k, 2) arrays of points."""
    xmin, xmax, ymin, ymax = box
    xs = np.linspace(xmin, xmax, grid)
    ys = np.linspace(ymin, ymax, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    Z = np.zeros_like(X)
    for e, c in f.terms:
        Z += c.real * X ** e[0] * Y ** e[1]
    lines = []
    for seg in find_contours(Z, 0.0):
        # grid indices to coordinates
        px = xmin + seg[:, 0] * (xmax - xmin) / (grid - 1)
        py = ymin + seg[:, 1] * (ymax - ymin) / (grid - 1)
        lines.append(np.column_stack([px, py]))
    return lines


class _Panel:
    def __init__(self, box, x0: float):
        self.box = box
        self.x0 = x0

    def map(self, p):
        xmin, xmax, ymin, ymax = self.box
        u = self.x0 + (p[0] - xmin) / (xmax - xmin) * PANEL
        v = MARGIN + (ymax - p[1]) / (ymax - ymin) * PANEL
        return u, v

    def polyline(self, pts, color, width, opacity=1.0):
        coords = " ".join("%.2f,%.2f" % self.map(p) for p in pts)
        return (
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}" stroke-opacity="{opacity}"/>'
        )

    def dot(self, p, color, r=3.5):
        u, v = self.map(p)
        return f'<circle cx="{u:.2f}" cy="{v:.2f}" r="{r}" fill="{color}"/>'


def render(f: Polynomial, report: ReachReport, grid: int = GRID) -> str:
    box = _viewport(report)
    lines = curve_polylines(f, box, grid)
    left, right = _Panel(box, MARGIN), _Panel(box, 2 * MARGIN + PANEL)
    width, height = 3 * MARGIN + 2 * PANEL, 2 * MARGIN + PANEL
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for panel in (left, right):
        out.append(
            f'<rect x="{panel.x0}" y="{MARGIN}" width="{PANEL}" height="{PANEL}" '
            'fill="none" stroke="#999" stroke-width="0.5"/>'
        )
        out.extend(panel.polyline(seg, "black", 1.2) for seg in lines)
    narrow = min(report.bottlenecks, key=lambda b: b.width, default=None)
    for b in report.bottlenecks:
        if b is not narrow:
            out.append(left.polyline([b.x, b.y], MUTED, 0.6, 0.5))
            out.append(left.dot(b.x, MUTED, 2))
            out.append(left.dot(b.y, MUTED, 2))
    if narrow is not None:
        # drawn last so it stays visible however short it is
        out.append(left.polyline([narrow.x, narrow.y], HIGHLIGHT, 2.5))
        out.append(left.dot(narrow.x, HIGHLIGHT, 4))
        out.append(left.dot(narrow.y, HIGHLIGHT, 4))
    top = max(report.curvature_points, key=lambda c: c.kappa, default=None)
    for c in report.curvature_points:
        if c is not top:
            out.append(right.dot(c.x, MUTED, 2.5))
    if top is not None:
        out.append(right.dot(top.x, HIGHLIGHT, 4.5))
    out.append("</svg>")
    return "\n".join(out) + "\n"

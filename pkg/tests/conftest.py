import itertools
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from reachkit.poly import Polynomial, PolySystem, jacobian

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_dense_system(rng, degrees, names=None):
    """Dense system with coefficients uniform in the complex unit disc."""
    n = len(degrees)
    names = names or tuple("xyzwuv"[:n])
    polys = []
    for d in degrees:
        terms = {}
        for e in itertools.product(range(d + 1), repeat=n):
            if sum(e) <= d:
                terms[e] = np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        polys.append(Polynomial(n, terms))
    return PolySystem(names, tuple(polys))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crown_conformation(c2):
    """Crown ring: alternating heights over a regular octagon, full 8x3 coordinates."""
    r2 = 4.0 / 3.0 * c2
    h = 0.5 * np.sqrt(c2 - 2 * r2 * (1 - np.cos(np.pi / 4)))
    k = np.arange(8)
    r = np.sqrt(r2)
    return np.column_stack([r * np.cos(k * np.pi / 4), r * np.sin(k * np.pi / 4), h * (-1.0) ** k])


def reduce_conformation(P):
    """Move atom 1 to the origin, atom 2 onto the x axis, atom 3 into the xy plane."""
    P = P - P[0]
    e1 = P[1] / np.linalg.norm(P[1])
    w = P[2] - (P[2] @ e1) * e1
    e2 = w / np.linalg.norm(w)
    R = np.array([e1, e2, np.cross(e1, e2)])
    Q = P @ R.T
    return np.concatenate([Q[2, :2], Q[3:].ravel()])


def cyclooctane_point(model, rng, step=0.3):
    """A real point on the reduced cyclooctane surface away from the crown."""
    rows = jacobian(model.system)

    def J(z):
        return np.array([[complex(g(z)).real for g in row] for row in rows])

    x = reduce_conformation(crown_conformation(model.c**2))
    for _ in range(3):
        _, _, Vt = np.linalg.svd(J(x))
        x = x + step * (Vt[-2:].T @ rng.standard_normal(2))
        for _ in range(50):
            f = model.system.evaluate(x).real
            if np.max(np.abs(f)) < 1e-14:
                break
            x = x - np.linalg.lstsq(J(x), f, rcond=None)[0]
    return x


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

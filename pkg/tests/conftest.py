import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from euler2c.coords import cartesian_to_delaunay
from euler2c.core import CartesianState, DomainError, MassParams
from euler2c.dynamics import eval_h


def random_state(rng, rprime=2.0, bound=True, min_dist=0.3, with_yprime=False):
    """Random non-collision state with x' on a random direction of length rprime."""
    p = MassParams(m=1.0, eps=0.1)
    while True:
        x = rng.normal(size=3)
        x *= rng.uniform(0.5, 1.5) / np.linalg.norm(x)
        y = rng.normal(size=3) * 0.6
        xp = rng.normal(size=3)
        xp *= rprime / np.linalg.norm(xp)
        yp = rng.normal(size=3) * 0.3 if with_yprime else np.zeros(3)
        s = CartesianState(y=y, x=x, xprime=xp, yprime=yp)
        if np.linalg.norm(xp - x) < min_dist:
            continue
        if bound and float(y @ y) / 2 - 1 / np.linalg.norm(x) >= -0.05:
            continue
        if not bound or eval_h(s, p) < 0:
            return s


def spatial_state(rng, p=MassParams(eps=0.1)):
    """Random bound 12-D state with every node non-degenerate."""
    while True:
        s = random_state(rng, with_yprime=True)
        try:
            d = cartesian_to_delaunay(s, p)
        except DomainError:
            continue
        if not d.flags and 0.05 < d.eccentricity < 0.95:
            return s


def sym_state(rng, x0):
    while True:
        x, y = rng.normal(size=3), rng.normal(size=3)
        if min(np.linalg.norm(x - x0), np.linalg.norm(x + x0)) > 0.2:
            return y, x


def min_distance(Lambda, G, g, rprime, m, n=4000):
    """Closest approach of the ellipse to x' = (r', 0): dense eccentric-anomaly scan, then refinement."""
    a = Lambda**2 / m
    e = math.sqrt(max(0.0, 1 - (G / Lambda) ** 2))
    b = a * math.sqrt(1 - e * e)
    # cos(angle(x', pericentre)) = -cos g
    c, s = math.cos(math.pi + g), math.sin(math.pi + g)

    def dist(z):
        px, py = a * (np.cos(z) - e), b * np.sin(z)
        return np.hypot(c * px - s * py - rprime, s * px + c * py)

    z = 2 * np.pi * np.arange(n) / n
    i = int(np.argmin(dist(z)))
    h = 2 * np.pi / n
    res = minimize_scalar(dist, bounds=(z[i] - h, z[i] + h), method="bounded", options={"xatol": 1e-13})
    return float(res.fun)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def circular():
    return CartesianState(y=[0, 1, 0], x=[1, 0, 0], xprime=[2, 0, 0])


@pytest.fixture
def eccentric():
    return CartesianState(y=[0, 1.2, 0], x=[1, 0, 0], xprime=[2, 0, 0])

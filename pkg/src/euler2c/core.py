"""State containers, finite-difference gradients and Poisson brackets.

Phase space is always the twelve-dimensional space of the moving body
``(y, x)`` and the second centre ``(yprime, xprime)``.  Scalar fields are
plain callables ``f(state) -> float``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

ScalarField = Callable[["CartesianState"], float]


class DomainError(ValueError):
    """Raised when a quantity is evaluated outside its domain (collisions, e >= 1, ...)."""


class StencilError(DomainError):
    """A finite-difference stencil touched a point where the field is undefined."""


def as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite vector component in {a!r}")
    return a


@dataclass(frozen=True)
class MassParams:
    """Mass parameters.

    ``m`` is the reduced mass of the attracted body, ``eps`` the ratio of the
    two centre masses.  ``mu`` is the asteroid mass, only used by the
    Sun-Earth-Asteroid Hamiltonian.
    """

    m: float = 1.0
    eps: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("m must be positive")
        if self.eps < 0 or self.mu < 0:
            raise ValueError("eps and mu must be non-negative")

    @property
    def rho(self) -> float:
        if self.eps == 0:
            raise DomainError("rho = mu/eps is undefined for eps = 0")
        return self.mu / self.eps

    @property
    def mprime(self) -> float:
        return 1.0 / (1.0 + self.eps)

    @classmethod
    def sea(cls, eps: float, mu: float) -> "MassParams":
        """Sun-Earth-Asteroid masses 1, eps, mu with m = 1/(1+mu)."""
        if eps <= 0:
            raise DomainError("SEA needs eps > 0")
        return cls(m=1.0 / (1.0 + mu), eps=eps, mu=mu)


@dataclass(frozen=True)
class CartesianState:
    y: np.ndarray
    x: np.ndarray
    xprime: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yprime: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("y", "x", "xprime", "yprime"):
            object.__setattr__(self, name, as_vec3(getattr(self, name)))

    def to_array(self) -> np.ndarray:
        """Flatten as ``(y, yprime, x, xprime)``: momenta first, then positions."""
        return np.concatenate([self.y, self.yprime, self.x, self.xprime])

    @classmethod
    def from_array(cls, a) -> "CartesianState":
        a = np.asarray(a, dtype=float)
        return cls(y=a[0:3], yprime=a[3:6], x=a[6:9], xprime=a[9:12])

    def replace(self, **kw) -> "CartesianState":
        return replace(self, **kw)


def _step(value: float, h_rel: float) -> float:
    return h_rel * max(1.0, abs(value))


def grad_canonical(f: ScalarField, s: CartesianState, h_rel: float = 1e-6):
    """Central-difference gradient of ``f`` at ``s``.

    Returns ``(dy, dx)``, each of shape ``(2, 3)``: row 0 is the moving body,
    row 1 the second centre.
    """
    if not h_rel > 0:
        raise ValueError("h_rel must be positive")
    base = s.to_array()
    grad = np.empty(12)
    for i in range(12):
        h = _step(base[i], h_rel)
        up, dn = base.copy(), base.copy()
        up[i] += h
        dn[i] -= h
        try:
            fp = f(CartesianState.from_array(up))
            fm = f(CartesianState.from_array(dn))
        except DomainError as exc:
            raise StencilError(f"stencil hit a singular point along coordinate {i}") from exc
        grad[i] = (fp - fm) / ((up[i] - base[i]) + (base[i] - dn[i]))
    return grad[0:6].reshape(2, 3), grad[6:12].reshape(2, 3)


def poisson_bracket(f: ScalarField, g: ScalarField, s: CartesianState, h_rel: float = 1e-6) -> float:
    """{f, g} = sum_i df/dx_i dg/dy_i - df/dy_i dg/dx_i over both canonical pairs."""
    fy, fx = grad_canonical(f, s, h_rel)
    gy, gx = grad_canonical(g, s, h_rel)
    return float(np.sum(fx * gy) - np.sum(fy * gx))


def poisson_bracket_richardson(f: ScalarField, g: ScalarField, s: CartesianState, h_rel: float = 1e-4) -> float:
    """Bracket extrapolated from stencils ``h_rel`` and ``h_rel/2`` (second-order error removed)."""
    coarse = poisson_bracket(f, g, s, h_rel)
    fine = poisson_bracket(f, g, s, h_rel / 2)
    return (4.0 * fine - coarse) / 3.0

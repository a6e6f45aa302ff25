"""Closed-form first integrals of the two-centre problem."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CartesianState, DomainError, MassParams

K_HAT = np.array([0.0, 0.0, 1.0])
COLLISION_EPS = 1e-12
# Below this eccentricity the pericentre direction is undefined.
CIRCULAR_EPS = 1e-12
NODE_EPS = 1e-12


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def angular_momentum(s: CartesianState) -> np.ndarray:
    return np.cross(s.x, s.y)


def eccentricity_vector(s: CartesianState, m: float) -> np.ndarray:
    """L = y x C - m x/|x|, equal to m e P."""
    r = _norm(s.x)
    if r < COLLISION_EPS:
        raise DomainError("eccentricity vector undefined at x = 0")
    C = angular_momentum(s)
    return np.cross(s.y, C) - m * s.x / r


def euler_G0(s: CartesianState, m: float) -> float:
    C = angular_momentum(s)
    L = eccentricity_vector(s, m)
    if _norm(L) / m < CIRCULAR_EPS:
        return float(C @ C)
    return float(C @ C - s.xprime @ L)


def euler_G1(s: CartesianState, m: float) -> float:
    d = s.xprime - s.x
    r = _norm(d)
    if r < COLLISION_EPS:
        raise DomainError("G1 undefined at x = x'")
    return float(m * (d @ s.xprime) / r)


def euler_G(s: CartesianState, p: MassParams) -> float:
    """Euler integral G0 + eps*G1 of the two-centre Hamiltonian."""
    g1 = euler_G1(s, p.m) if p.eps else 0.0
    return euler_G0(s, p.m) + p.eps * g1


def euler_G_sym(y, x, x0, m_plus: float, m_minus: float) -> float:
    """Euler integral of the symmetric Hamiltonian with centres at -x0 (m_plus) and +x0 (m_minus)."""
    y, x, x0 = (np.asarray(v, dtype=float) for v in (y, x, x0))
    rp = _norm(x + x0)
    rm = _norm(x - x0)
    if rp < COLLISION_EPS or rm < COLLISION_EPS:
        raise DomainError("collision with a centre")
    c = np.cross(x, y)
    return float(c @ c + (x0 @ y) ** 2 + 2.0 * (x @ x0) * (m_plus / rp - m_minus / rm))


@dataclass(frozen=True)
class IntegralSet:
    Z: float
    Gtot: float
    Theta: float
    rprime: float
    G_norm: float
    G0: float
    G1: float
    G: float
    energy: float
    degenerate: frozenset = field(default_factory=frozenset)


def total_angular_momentum(s: CartesianState) -> np.ndarray:
    return np.cross(s.xprime, s.yprime) + np.cross(s.x, s.y)


def node_degeneracies(s: CartesianState) -> frozenset:
    """Names of the vectors among C_t, C, x', x, n0, n1, n that vanish."""
    Ct = total_angular_momentum(s)
    C = angular_momentum(s)
    vecs = {
        "Ct": Ct,
        "C": C,
        "xprime": s.xprime,
        "x": s.x,
        "n0": np.cross(K_HAT, Ct),
        "n1": np.cross(Ct, s.xprime),
        "n": np.cross(s.xprime, C),
    }
    out = set()
    for name, v in vecs.items():
        if _norm(v) < NODE_EPS:
            out.add(name)
    return frozenset(out)


def commuting_set(s: CartesianState, p: MassParams) -> IntegralSet:
    from .dynamics import eval_h

    rprime = _norm(s.xprime)
    if rprime == 0:
        raise DomainError("commuting set needs x' != 0")
    Ct = total_angular_momentum(s)
    C = angular_momentum(s)
    g0 = euler_G0(s, p.m)
    g1 = euler_G1(s, p.m)
    return IntegralSet(
        Z=float(Ct @ K_HAT),
        Gtot=_norm(Ct),
        Theta=float(C @ s.xprime) / rprime,
        rprime=rprime,
        G_norm=_norm(C),
        G0=g0,
        G1=g1,
        G=g0 + p.eps * g1,
        energy=eval_h(s, p),
        degenerate=node_degeneracies(s),
    )


def conservation_report(traj) -> dict:
    """Max relative drift |f(t) - f(0)| / max(1, |f(0)|) of each monitored integral."""
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    C = np.cross(traj.x, traj.y)
    Ct = C + np.cross(traj.xprime, traj.yprime)
    rprime = np.linalg.norm(traj.xprime, axis=1)
    safe_r = np.where(rprime > 0, rprime, 1.0)
    series = {
        "energy": traj.energy,
        "G": traj.G,
        "C1": C[:, 0],
        "C2": C[:, 1],
        "C3": C[:, 2],
        "Z": Ct[:, 2],
        "Gtot": np.linalg.norm(Ct, axis=1),
        "Theta": np.einsum("ij,ij->i", C, traj.xprime) / safe_r,
        "rprime": rprime,
    }
    report = {}
    for name, v in series.items():
        v = np.asarray(v, dtype=float)
        report[name] = float(np.max(np.abs(v - v[0])) / max(1.0, abs(v[0])))
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

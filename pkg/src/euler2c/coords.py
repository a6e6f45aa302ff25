"""Canonical charts: Kepler solver, Delaunay-type K-chart, P-chart and elliptic coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CartesianState, DomainError, MassParams
from .integrals import CIRCULAR_EPS, K_HAT, NODE_EPS, angular_momentum, eccentricity_vector

TWO_PI = 2.0 * math.pi
I_HAT = np.array([1.0, 0.0, 0.0])


class ChartDegenerate(DomainError):
    """The requested chart is singular at this point (vanishing node, e = 0, boundary of elliptic chart)."""


def wrap(angle):
    return np.mod(angle, TWO_PI)


def oriented_angle(w, u, v) -> float:
    """Angle in [0, 2pi) from u to v, positively oriented around w (right-hand rule)."""
    w = np.asarray(w, dtype=float)
    w = w / np.linalg.norm(w)
    return float(wrap(math.atan2(float(w @ np.cross(u, v)), float(np.dot(u, v)))))


def rotate(v, axis, angle: float) -> np.ndarray:
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    v = np.asarray(v, dtype=float)
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(k, v) * s + k * float(k @ v) * (1.0 - c)


def _unit(v) -> np.ndarray:
    return np.asarray(v, dtype=float) / np.linalg.norm(v)


# --- Kepler's equation ---

def solve_kepler(e: float, ell, tol: float = 1e-15, max_iter: int = 100):
    """Eccentric anomaly zeta with zeta - e sin(zeta) = ell.

    Safeguarded Newton: the root is bracketed in [ell - e, ell + e] and a
    bisection step replaces Newton whenever the derivative 1 - e cos(zeta)
    drops below 1e-3 or the Newton iterate leaves the bracket.
    Accepts scalars or arrays.
    """
    if not 0.0 <= e < 1.0:
        raise DomainError(f"eccentricity {e} outside [0, 1)")
    ell_arr = np.asarray(ell, dtype=float)
    scalar = ell_arr.ndim == 0
    M = np.atleast_1d(ell_arr).astype(float)
    if e == 0.0:
        return float(M[0]) if scalar else M.copy()
    lo = M - e
    hi = M + e
    z = M + e * np.sin(M)
    for _ in range(max_iter):
        f = z - e * np.sin(z) - M
        lo = np.where(f < 0, z, lo)
        hi = np.where(f > 0, z, hi)
        fp = 1.0 - e * np.cos(z)
        newton = z - f / fp
        bad = (fp < 1e-3) | (newton <= lo) | (newton >= hi)
        z_new = np.where(bad, 0.5 * (lo + hi), newton)
        done = np.abs(z_new - z) <= tol * np.maximum(1.0, np.abs(z))
        z = z_new
        if np.all(done):
            break
    # final polishing step
    z = z - (z - e * np.sin(z) - M) / (1.0 - e * np.cos(z))
    return float(z[0]) if scalar else z


def true_from_eccentric(e: float, zeta):
    return np.arctan2(math.sqrt(1.0 - e * e) * np.sin(zeta), np.cos(zeta) - e)


def eccentric_from_true(e: float, nu):
    return np.arctan2(math.sqrt(1.0 - e * e) * np.sin(nu), e + np.cos(nu))


def mean_from_eccentric(e: float, zeta):
    return zeta - e * np.sin(zeta)


def mean_from_true(e: float, nu):
    return mean_from_eccentric(e, eccentric_from_true(e, nu))


# --- K-chart ---

@dataclass(frozen=True)
class DelaunayElements:
    """Coordinates of the K-chart.

    Angles that are undefined at the given point are ``None`` and the reason is
    listed in ``flags`` (``"circular"``, ``"n0"``, ``"n1"``, ``"n"``).
    """

    Lambda: float
    G: float
    ell: Optional[float]
    g: Optional[float]
    Theta: float
    vartheta: Optional[float]
    rprime: float
    Rprime: float = 0.0
    Z: float = 0.0
    Gtot: float = 0.0
    z: Optional[float] = None
    gamma: Optional[float] = None
    flags: frozenset = field(default_factory=frozenset)

    def semi_major_axis(self, m: float) -> float:
        return self.Lambda**2 / m

    @property
    def eccentricity(self) -> float:
        return math.sqrt(max(0.0, 1.0 - (self.G / self.Lambda) ** 2))


def cartesian_to_delaunay(s: CartesianState, p: MassParams) -> DelaunayElements:
    m = p.m
    r = float(np.linalg.norm(s.x))
    kep = float(s.y @ s.y) / (2 * m) - 1.0 / r
    if kep >= 0:
        raise DomainError("Keplerian energy is not negative (unbound orbit)")
    rprime = float(np.linalg.norm(s.xprime))
    if rprime == 0:
        raise DomainError("x' must not vanish")
    a = -1.0 / (2.0 * kep)
    Lam = math.sqrt(m * a)
    C = angular_momentum(s)
    G = float(np.linalg.norm(C))
    if G == 0:
        raise ChartDegenerate("C vanishes")
    Ct = C + np.cross(s.xprime, s.yprime)
    xp_hat = s.xprime / rprime
    n0 = np.cross(K_HAT, Ct)
    n1 = np.cross(Ct, s.xprime)
    n = np.cross(s.xprime, C)
    flags = set()
    ok = {}
    for name, v in (("n0", n0), ("n1", n1), ("n", n)):
        ok[name] = np.linalg.norm(v) > NODE_EPS
        if not ok[name]:
            flags.add(name)

    L = eccentricity_vector(s, m)
    e = float(np.linalg.norm(L)) / m
    g = ell = None
    if e < CIRCULAR_EPS:
        flags.add("circular")
    else:
        P = L / np.linalg.norm(L)
        if ok["n"]:
            g = oriented_angle(C, n, np.cross(C, P))
        nu = oriented_angle(C, P, s.x)
        ell = float(wrap(mean_from_true(e, nu)))

    z = oriented_angle(K_HAT, I_HAT, n0) if ok["n0"] else None
    gamma = oriented_angle(Ct, n0, n1) if (ok["n0"] and ok["n1"]) else None
    vartheta = oriented_angle(s.xprime, n1, n) if (ok["n1"] and ok["n"]) else None
    return DelaunayElements(
        Lambda=Lam, G=G, ell=ell, g=g,
        Theta=float(C @ xp_hat), vartheta=vartheta, rprime=rprime,
        Rprime=float(s.yprime @ xp_hat),
        Z=float(Ct @ K_HAT), Gtot=float(np.linalg.norm(Ct)), z=z, gamma=gamma,
        flags=frozenset(flags),
    )


def orbit_frame(C_hat, n_hat, g: float):
    """Pericentre direction P and Q = C x P for argument of pericentre g measured from node n."""
    CxP = rotate(n_hat, C_hat, g)
    P = np.cross(CxP, C_hat)
    return _unit(P), _unit(CxP)


def kepler_position_velocity(Lambda: float, G: float, ell, P, Q, m: float):
    """Positions and impulses on the Kepler ellipse at mean anomaly ``ell`` (array-friendly)."""
    a = Lambda**2 / m
    e = math.sqrt(max(0.0, 1.0 - (G / Lambda) ** 2))
    zeta = np.atleast_1d(solve_kepler(e, ell))
    b = math.sqrt(1.0 - e * e)
    cz, sz = np.cos(zeta), np.sin(zeta)
    x = a * ((cz - e)[:, None] * P + (b * sz)[:, None] * Q)
    nmean = 1.0 / math.sqrt(m * a**3)
    fac = nmean * a / (1.0 - e * cz)
    y = m * fac[:, None] * ((-sz)[:, None] * P + (b * cz)[:, None] * Q)
    return x, y


def delaunay_to_cartesian(d: DelaunayElements, p: MassParams) -> CartesianState:
    for name in ("z", "gamma", "vartheta", "g", "ell"):
        if getattr(d, name) is None:
            raise ChartDegenerate(f"angle {name} undefined; flags={sorted(d.flags)}")
    m = p.m
    # total angular momentum from (Z, Gtot, z)
    n0_hat = np.array([math.cos(d.z), math.sin(d.z), 0.0])
    Ct = d.Z * K_HAT + math.sqrt(max(0.0, d.Gtot**2 - d.Z**2)) * np.cross(n0_hat, K_HAT)
    Ct_hat = _unit(Ct)
    # second centre
    n1_hat = rotate(n0_hat, Ct_hat, d.gamma)
    c = d.Theta / d.Gtot
    xp_hat = c * Ct_hat + math.sqrt(max(0.0, 1.0 - c * c)) * np.cross(n1_hat, Ct_hat)
    xprime = d.rprime * xp_hat
    # angular momentum of the moving body
    n_hat = rotate(n1_hat, xp_hat, d.vartheta)
    C = d.Theta * xp_hat + math.sqrt(max(0.0, d.G**2 - d.Theta**2)) * np.cross(n_hat, xp_hat)
    Cprime = Ct - C
    yprime = d.Rprime * xp_hat + np.cross(Cprime, xprime) / d.rprime**2
    P, Q = orbit_frame(_unit(C), n_hat, d.g)
    x, y = kepler_position_velocity(d.Lambda, d.G, d.ell, P, Q, m)
    return CartesianState(y=y[0], x=x[0], xprime=xprime, yprime=yprime)


def reference_frame(G: float, Theta: float, rprime: float):
    """Fixed frame used when only (G, Theta, r') matter: x' on the x axis, C in the x-z plane.

    Returns ``(xprime, C_hat, n_hat)``.  For Theta = 0 the orbit lies in the
    x-y plane with C along +z.
    """
    s = Theta / G
    C_hat = np.array([s, 0.0, math.sqrt(max(0.0, 1.0 - s * s))])
    xprime = np.array([rprime, 0.0, 0.0])
    n = np.cross(xprime, C_hat)
    if np.linalg.norm(n) < NODE_EPS:
        raise ChartDegenerate("|Theta| = G: node x' x C vanishes")
    return xprime, C_hat, _unit(n)


def elements_to_state(Lambda: float, G: float, g: float, ell: float, rprime: float, m: float,
                      Theta: float = 0.0) -> CartesianState:
    """Cartesian state in the reference frame for the reduced elements (Lambda, G, g, ell; Theta, r')."""
    xprime, C_hat, n_hat = reference_frame(G, Theta, rprime)
    P, Q = orbit_frame(C_hat, n_hat, g)
    x, y = kepler_position_velocity(Lambda, G, ell, P, Q, m)
    return CartesianState(y=y[0], x=x[0], xprime=xprime)


def orbit_positions(Lambda: float, G: float, g: float, rprime: float, m: float, ells, Theta: float = 0.0):
    """Kepler positions over an array of mean anomalies plus the second-centre position."""
    xprime, C_hat, n_hat = reference_frame(G, Theta, rprime)
    P, Q = orbit_frame(C_hat, n_hat, g)
    x, _ = kepler_position_velocity(Lambda, G, ells, P, Q, m)
    return x, xprime


def g0_in_chart(d: DelaunayElements, m: float) -> float:
    """Leading Euler integral written in K-chart coordinates."""
    if d.G == 0:
        raise DomainError("G = 0 is singular")
    if d.g is None:
        if "circular" in d.flags:
            return d.G**2
        raise ChartDegenerate("g undefined")
    return g0_formula(d.rprime, d.Lambda, d.Theta, d.G, d.g, m)


def g0_formula(rprime, Lambda, Theta, G, g, m):
    return G**2 + m * rprime * np.sqrt(1.0 - Theta**2 / G**2) * np.sqrt(np.maximum(0.0, 1.0 - G**2 / Lambda**2)) * np.cos(g)


# --- P-chart and elliptic coordinates ---

@dataclass(frozen=True)
class PChartState:
    """(R, Phi, r, phi) of the moving body with the carried (Theta, r0)."""

    R: float
    Phi: float
    r: float
    phi: float
    Theta: float
    r0: float


@dataclass(frozen=True)
class EllipticState:
    p_lambda: float
    p_mu: float
    lam: float
    mu: float
    Theta: float
    r0: float


def cartesian_to_pchart(y, x, x0) -> PChartState:
    """P-chart quadruplet for the symmetric problem with centres at -x0 and +x0.

    phi is measured from the node n = x0 x C to C x x, so that
    x0 . x = -r0 r sqrt(1 - Theta^2/Phi^2) cos(phi).
    """
    y, x, x0 = (np.asarray(v, dtype=float) for v in (y, x, x0))
    C = np.cross(x, y)
    r = float(np.linalg.norm(x))
    r0 = float(np.linalg.norm(x0))
    n = np.cross(x0, C)
    if np.linalg.norm(n) < NODE_EPS or np.linalg.norm(C) < NODE_EPS:
        raise ChartDegenerate("node x0 x C vanishes")
    return PChartState(
        R=float(y @ x) / r,
        Phi=float(np.linalg.norm(C)),
        r=r,
        phi=oriented_angle(C, n, np.cross(C, x)),
        Theta=float(C @ x0) / r0,
        r0=r0,
    )


def pchart_distances(ps: PChartState):
    """Distances (r_plus, r_minus) to the centres at -x0 and +x0."""
    s = math.sqrt(max(0.0, 1.0 - ps.Theta**2 / ps.Phi**2))
    cross = 2.0 * ps.r0 * ps.r * s * math.cos(ps.phi)
    base = ps.r0**2 + ps.r**2
    return math.sqrt(max(0.0, base - cross)), math.sqrt(max(0.0, base + cross))


def eval_h_pchart(ps: PChartState, m_plus: float, m_minus: float) -> float:
    rp, rm = pchart_distances(ps)
    if rp == 0 or rm == 0:
        raise DomainError("collision")
    return 0.5 * ps.R**2 + ps.Phi**2 / (2.0 * ps.r**2) - m_plus / rp - m_minus / rm


_EDGE = 1e-12


def _check_interior(lam: float, mu: float):
    if lam - 1.0 <= _EDGE or 1.0 - abs(mu) <= _EDGE:
        raise ChartDegenerate(f"elliptic chart boundary (lambda={lam}, mu={mu})")


def to_elliptic(ps: PChartState) -> EllipticState:
    rp, rm = pchart_distances(ps)
    lam = (rp + rm) / (2.0 * ps.r0)
    mu = (rp - rm) / (2.0 * ps.r0)
    _check_interior(lam, mu)
    q = lam * lam + mu * mu - 1.0
    D = (1.0 - mu * mu) * (lam * lam - 1.0) * ps.Phi**2 - q * ps.Theta**2
    root = math.copysign(math.sqrt(max(D, 0.0)), math.sin(ps.phi))
    sq = math.sqrt(q)
    p_lam = ps.r0 * lam * ps.R / sq - mu * root / (q * (lam * lam - 1.0))
    p_mu = ps.r0 * mu * ps.R / sq + lam * root / (q * (1.0 - mu * mu))
    return EllipticState(p_lambda=p_lam, p_mu=p_mu, lam=lam, mu=mu, Theta=ps.Theta, r0=ps.r0)


def from_elliptic(es: EllipticState) -> PChartState:
    lam, mu, pl, pm = es.lam, es.mu, es.p_lambda, es.p_mu
    _check_interior(lam, mu)
    q = lam * lam + mu * mu - 1.0
    l2, m2 = lam * lam - 1.0, 1.0 - mu * mu
    diff = lam * lam - mu * mu
    R = (lam * l2 * pl + mu * m2 * pm) / (es.r0 * diff * math.sqrt(q))
    ang = lam * pm - mu * pl
    Phi2 = ang**2 * l2 * m2 / diff**2 + q * es.Theta**2 / (m2 * l2)
    Phi = math.sqrt(Phi2)
    r = es.r0 * math.sqrt(q)
    s = math.sqrt(max(0.0, 1.0 - es.Theta**2 / Phi2))
    cphi = -lam * mu / (math.sqrt(q) * s)
    phi = math.acos(min(1.0, max(-1.0, cphi)))
    if ang < 0:
        phi = TWO_PI - phi
    return PChartState(R=R, Phi=Phi, r=r, phi=phi, Theta=es.Theta, r0=es.r0)


def eval_h_elliptic(es: EllipticState, m_plus: float, m_minus: float) -> float:
    """Symmetric two-centre Hamiltonian in elliptic coordinates."""
    lam, mu = es.lam, es.mu
    _check_interior(lam, mu)
    den = 2.0 * es.r0**2 * (lam * lam - mu * mu)
    kin = (es.p_lambda**2 * (lam * lam - 1.0) + es.p_mu**2 * (1.0 - mu * mu)) / den
    rot = es.Theta**2 / den * (1.0 / (1.0 - mu * mu) + 1.0 / (lam * lam - 1.0))
    pot = ((m_plus + m_minus) * lam - (m_plus - m_minus) * mu) / (es.r0 * (lam * lam - mu * mu))
    return kin + rot - pot


def hj_split(es: EllipticState, E: float, m_plus: float, m_minus: float):
    """Separated Hamilton-Jacobi functions (F_mu, F_lambda) at energy E."""
    lam, mu = es.lam, es.mu
    _check_interior(lam, mu)
    F_mu = (es.p_mu**2 * (1.0 - mu * mu) + es.Theta**2 / (1.0 - mu * mu)
            + 2.0 * es.r0 * (m_plus - m_minus) * mu + 2.0 * es.r0**2 * mu * mu * E)
    F_lam = (-es.p_lambda**2 * (lam * lam - 1.0) - es.Theta**2 / (lam * lam - 1.0)
             + 2.0 * es.r0 * (m_plus + m_minus) * lam + 2.0 * es.r0**2 * lam * lam * E)
    return F_mu, F_lam

"""Averaged perturbing potential and the first-order secular flow.

The averaged potential is the mean-anomaly average of ``U = -1/|x' - x|``
over a Keplerian ellipse.  It depends on the slow elements only through
``(r', Lambda, Theta, G0)``; three evaluations are offered:

``u_avg``
    the eccentric-anomaly quadrature with ``g = pi/2`` (spectral trapezoid),
``u_avg_direct``
    the literal mean-anomaly average over a Cartesian orbit, valid for any
    ``(G, g)`` and used as the oracle,
``u_avg_series``
    the small ``r'/a`` expansion.

All values follow the sign of ``U`` itself, so they are negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .core import DomainError, MassParams
from .coords import cartesian_to_delaunay, elements_to_state, g0_formula, orbit_positions
from .dynamics import dormand_prince, evaluate_dense, integrate, write_csv_rows

QUAD_RTOL = 1e-11
MIN_NODES = 16
MAX_NODES = 1 << 16
# Smallest admissible |x' - x| anywhere on the averaged ellipse.
DISTANCE_GUARD = 1e-6
# Step for dU/dG0, in units of Lambda**2.
DG0_STEP = 1e-5
SEPARATRIX_GUARD = 1e-6
FROZEN_RATE = 1e-14


@dataclass(frozen=True)
class SecularPoint:
    rprime: float
    Lambda: float
    Theta: float
    G0: float

    def __post_init__(self):
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")
        if not self.rprime >= 0:
            raise ValueError("rprime must be non-negative")

    @property
    def E(self) -> float:
        return math.sqrt(self.Lambda**2 - self.G0) / self.Lambda

    @property
    def I(self) -> float:  # noqa: E743
        return math.sqrt(self.G0 - self.Theta**2) / self.Lambda

    @property
    def in_quadrature_domain(self) -> bool:
        return self.Theta**2 <= self.G0 <= self.Lambda**2


@dataclass(frozen=True)
class SecularState:
    rprime: float
    Lambda: float
    Theta: float
    Rprime: float
    G: float
    g: float
    ell: float
    vartheta: float

    def __post_init__(self):
        if not 0 < self.G <= self.Lambda:
            raise ValueError("need 0 < G <= Lambda")
        if abs(self.Theta) > self.G:
            raise ValueError("need |Theta| <= G")


def _trapezoid_periodic(f, rtol: float = QUAD_RTOL):
    """Mean of a smooth 2*pi-periodic f by node doubling; returns (value, nodes)."""
    n = MIN_NODES
    prev = float(np.mean(f(2 * np.pi * np.arange(n) / n)))
    while n < MAX_NODES:
        n *= 2
        # Reuse the old nodes: only the odd ones are new.
        odd = float(np.mean(f(2 * np.pi * (np.arange(n // 2) + 0.5) / (n // 2))))
        cur = 0.5 * (prev + odd)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur, n
        prev = cur
    raise DomainError("averaging quadrature did not converge (orbit close to the second centre?)")


def u_avg(pt: SecularPoint, a: float, n_nodes: int | None = None) -> float:
    """Averaged potential from the eccentric-anomaly integral.

    With ``n_nodes`` the trapezoid rule uses exactly that many nodes,
    otherwise nodes double until the relative change is below 1e-11.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not pt.in_quadrature_domain:
        raise DomainError("G0 outside [Theta^2, Lambda^2]; use u_avg_direct")
    E, I, rp = pt.E, pt.I, pt.rprime

    def integrand(z):
        w = 1.0 - E * np.cos(z)
        d2 = rp * rp - 2.0 * a * rp * I * np.sin(z) + (a * w) ** 2
        if np.min(d2) < DISTANCE_GUARD**2:
            raise DomainError("averaged orbit passes through the second centre")
        return -w / np.sqrt(d2)

    if n_nodes is not None:
        return float(np.mean(integrand(2 * np.pi * np.arange(n_nodes) / n_nodes)))
    return _trapezoid_periodic(integrand)[0]


def u_avg_direct(rprime: float, Lambda: float, Theta: float, G: float, g: float, m: float,
                 n_nodes: int | None = None) -> float:
    """Mean-anomaly average of -1/|x' - x| over the Kepler orbit with elements (Lambda, G, g)."""

    def integrand(ells):
        x, xp = orbit_positions(Lambda, G, g, rprime, m, ells, Theta)
        d = np.linalg.norm(x - xp, axis=1)
        if np.min(d) < DISTANCE_GUARD:
            raise DomainError("orbit passes through the second centre")
        return -1.0 / d

    if n_nodes is not None:
        return float(np.mean(integrand(2 * np.pi * np.arange(n_nodes) / n_nodes)))
    return _trapezoid_periodic(integrand)[0]


def u_avg_series(pt: SecularPoint, a: float) -> float:
    """Second-order small-r'/a expansion, negative like ``u_avg``.

    The correction is ``(r'^2 / 4a^2) Lambda^3 (G0 - 3 Theta^2) / G0^(5/2)``.
    """
    if pt.G0 <= 0:
        raise DomainError("series needs G0 > 0")
    corr = pt.rprime**2 / (4 * a * a) * pt.Lambda**3 * (pt.G0 - 3 * pt.Theta**2) / pt.G0**2.5
    return -(1.0 + corr) / a


def u_level(rprime: float, Lambda: float, Theta: float, G0: float, m: float,
            n_nodes: int | None = None) -> float:
    """Averaged potential on the G0 level, whatever the sign of G0 - Theta^2."""
    a = Lambda**2 / m
    pt = SecularPoint(rprime, Lambda, Theta, G0)
    if pt.in_quadrature_domain:
        return u_avg(pt, a, n_nodes)
    G, g = level_representative(rprime, Lambda, Theta, G0, m)
    return u_avg_direct(rprime, Lambda, Theta, G, g, m, n_nodes)


def _converged_nodes(rprime, Lambda, Theta, G0, m) -> int:
    a = Lambda**2 / m
    pt = SecularPoint(rprime, Lambda, Theta, G0)
    if pt.in_quadrature_domain:
        E, I = pt.E, pt.I
        f = lambda z: -(1 - E * np.cos(z)) / np.sqrt(  # noqa: E731
            rprime**2 - 2 * a * rprime * I * np.sin(z) + (a * (1 - E * np.cos(z))) ** 2)
    else:
        G, g = level_representative(rprime, Lambda, Theta, G0, m)
        f = lambda l: -1 / np.linalg.norm(np.subtract(*orbit_positions(Lambda, G, g, rprime, m, l, Theta)), axis=1)  # noqa: E731
    return _trapezoid_periodic(f)[1]


def level_representative(rprime, Lambda, Theta, G0, m, g: float = math.pi):
    """A point (G, g) on the G0 level, found along the line of fixed g."""
    lo = max(abs(Theta), 1e-12 * Lambda)
    f = lambda G: g0_formula(rprime, Lambda, Theta, G, g, m) - G0  # noqa: E731
    grid = np.linspace(lo, Lambda, 201)
    vals = [f(G) for G in grid]
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            return float(grid[i]), g
        if vals[i] * vals[i + 1] < 0:
            return brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15), g
    raise DomainError(f"no point of the G0 = {G0} level along g = {g}")


def du_dG0(rprime, Lambda, Theta, G0, m, step: float = DG0_STEP) -> float:
    """Central difference in G0; both sides share one node count so quadrature noise cancels."""
    h = step * Lambda**2
    n = 2 * _converged_nodes(rprime, Lambda, Theta, G0, m)
    up = u_level(rprime, Lambda, Theta, G0 + h, m, n)
    dn = u_level(rprime, Lambda, Theta, G0 - h, m, n)
    return (up - dn) / (2 * h)


def u_fixed_points(rprime: float, Lambda: float, Theta: float, a: float, n_grid: int = 200):
    """G0 roots of dU/dG0 on (Theta^2, Lambda^2], located by bracketing then brentq."""
    if Theta == 0:
        raise DomainError("fixed points need Theta != 0")
    m = Lambda**2 / a
    h = DG0_STEP * Lambda**2
    lo, hi = Theta**2 + 2 * h, Lambda**2 - 2 * h
    if lo >= hi:
        return []
    d = lambda G0: du_dG0(rprime, Lambda, Theta, G0, m)  # noqa: E731
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([d(G0) for G0 in grid])
    roots = []
    for i in range(n_grid - 1):
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(d, grid[i], grid[i + 1], xtol=1e-13))
    return [r for r in roots if abs(d(r)) < 1e-8]


def _g0_partials(rprime, Lambda, Theta, G, g, m):
    """Partials of G0 in (G, g, r', Lambda, Theta)."""
    s = math.sqrt(max(0.0, 1.0 - Theta**2 / G**2))
    w = math.sqrt(max(0.0, 1.0 - G**2 / Lambda**2))
    c = math.cos(g)
    k = m * rprime
    ds = Theta**2 / (G**3 * s) if s > 0 else math.inf
    dw = -G / (Lambda**2 * w) if w > 0 else -math.inf
    return {
        "G": 2 * G + k * c * (ds * w + s * dw),
        "g": -k * s * w * math.sin(g),
        "rprime": m * s * w * c,
        "Lambda": k * s * c * G**2 / (Lambda**3 * w) if w > 0 else 0.0,
        "Theta": -k * w * c * Theta / (G**2 * s) if s > 0 else 0.0,
    }


def _u_partial(name, st: SecularState, G0, m, step=1e-6):
    """dU/d(name) at fixed G0, by central differences (a follows Lambda)."""
    args = {"rprime": st.rprime, "Lambda": st.Lambda, "Theta": st.Theta}
    h = step * max(1.0, abs(args[name]))
    up, dn = dict(args), dict(args)
    up[name] += h
    dn[name] -= h
    n = 2 * _converged_nodes(G0=G0, m=m, **args)
    return (u_level(G0=G0, m=m, n_nodes=n, **up) - u_level(G0=G0, m=m, n_nodes=n, **dn)) / (2 * h)


def _check_off_separatrix(s0: SecularState, m: float) -> float:
    G0 = g0_formula(s0.rprime, s0.Lambda, s0.Theta, s0.G, s0.g, m)
    if abs(G0 - m * s0.rprime) / s0.Lambda**2 < SEPARATRIX_GUARD:
        raise DomainError("initial data on the collision/separatrix level G0 = m r'")
    return G0


def secular_track(s0: SecularState, p: MassParams, rho: float, times, tol: float = 1e-12):
    """(G, g) of the first-order flow at each of ``times`` (all >= 0, one integration)."""
    m = p.m
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    G0 = _check_off_separatrix(s0, m)
    speed = rho * p.eps * du_dG0(s0.rprime, s0.Lambda, s0.Theta, G0, m)
    G = np.full(times.shape, s0.G)
    g = np.full(times.shape, s0.g)
    if abs(speed) <= FROZEN_RATE or not np.any(times > 0):
        return G, g

    # G0 flow in its own time tau: dG/dtau = -dG0/dg, dg/dtau = dG0/dG.
    def fun(_tau, u):
        d = _g0_partials(s0.rprime, s0.Lambda, s0.Theta, u[0], u[1], m)
        return np.array([-d["g"], d["G"]])

    res = dormand_prince(fun, (0.0, speed * float(times.max())), np.array([s0.G, s0.g]), tol=tol)
    moving = times > 0
    out = evaluate_dense(res.dense, speed * times[moving])
    G[moving], g[moving] = out[:, 0], out[:, 1]
    return G, g


def first_order_flow(s0: SecularState, p: MassParams, rho: float, t: float, t0: float = 0.0) -> SecularState:
    """First-order secular state at time ``t >= t0``.

    ``(G, g)`` move along their G0 level with the speed of the G0 flow scaled
    by ``rho * eps * dU/dG0``; ``(R', ell, vartheta)`` drift linearly, with
    every rate frozen at the initial point.  ``rho = 1`` gives the plain
    two-centre problem.
    """
    m, eps = p.m, p.eps
    G0 = _check_off_separatrix(s0, m)
    dt = t - t0
    Gt, gt = secular_track(s0, p, rho, [dt])

    uG = du_dG0(s0.rprime, s0.Lambda, s0.Theta, G0, m)
    part = _g0_partials(s0.rprime, s0.Lambda, s0.Theta, s0.G, s0.g, m)
    kepler_rate = rho * m / s0.Lambda**3
    ell_rate = kepler_rate + rho * eps * (_u_partial("Lambda", s0, G0, m) + uG * part["Lambda"])
    th_rate = rho * eps * (_u_partial("Theta", s0, G0, m) + uG * part["Theta"]) if s0.Theta else 0.0
    h0_prime = 1.0 / s0.rprime**2
    R_rate = -(h0_prime + rho * eps * (_u_partial("rprime", s0, G0, m) + uG * part["rprime"]))
    return replace(
        s0,
        G=float(Gt[0]),
        g=float(gt[0]),
        Rprime=s0.Rprime + R_rate * dt,
        ell=s0.ell + ell_rate * dt,
        vartheta=s0.vartheta + th_rate * dt,
    )


def secular_rates(s0: SecularState, p: MassParams, rho: float = 1.0) -> dict:
    """Initial rates dG/dt and dg/dt of the first-order flow."""
    G0 = _check_off_separatrix(s0, p.m)
    uG = du_dG0(s0.rprime, s0.Lambda, s0.Theta, G0, p.m)
    part = _g0_partials(s0.rprime, s0.Lambda, s0.Theta, s0.G, s0.g, p.m)
    k = rho * p.eps * uG
    return {"G": -k * part["g"], "g": k * part["G"], "dU_dG0": uG, "G0": G0}


def compare_with_direct(s0: SecularState, p: MassParams, T: float, n_out: int = 21,
                        samples_per_orbit: int = 64, tol: float = 1e-11) -> dict:
    """First-order flow against a direct two-centre integration.

    Direct elements are osculating (G, g) averaged over one Kepler period
    centred at each output time, which removes the short-period terms.
    """
    if s0.Theta != 0:
        raise DomainError("comparison is planar")
    m = p.m
    period = 2 * np.pi * s0.Lambda**3 / m
    state = elements_to_state(s0.Lambda, s0.G, s0.g, s0.ell, s0.rprime, m)
    dt = period / samples_per_orbit
    n_samp = int(np.ceil((T + period) / dt)) + 1
    t_samp = np.arange(n_samp) * dt
    traj = integrate(state, p, (0.0, t_samp[-1]), tol=tol, t_eval=t_samp)
    if traj.collided:
        raise DomainError("direct integration hit the collision guard")
    G_osc = np.empty(len(traj))
    g_osc = np.empty(len(traj))
    for i in range(len(traj)):
        d = cartesian_to_delaunay(traj.state(i), p)
        G_osc[i], g_osc[i] = d.G, d.g
    g_osc = np.unwrap(g_osc)
    # Put the osculating branch next to the initial g.
    g_osc += 2 * np.pi * np.round((s0.g - g_osc[0]) / (2 * np.pi))

    half = samples_per_orbit // 2
    t_out = np.linspace(0.0, T, n_out)
    G_dir, g_dir = np.empty(n_out), np.empty(n_out)
    for k, tk in enumerate(t_out):
        c = int(round(tk / dt))
        lo = max(0, c - half)
        win = slice(lo, lo + samples_per_orbit)
        G_dir[k] = np.mean(G_osc[win])
        g_dir[k] = np.mean(g_osc[win])
    G_sec, g_sec = secular_track(s0, p, 1.0, t_out)
    return {
        "t": t_out,
        "g_secular": g_sec,
        "g_direct": g_dir,
        "G_secular": G_sec,
        "G_direct": G_dir,
        "abs_err_g": np.abs(g_sec - g_dir),
    }


COMPARISON_HEADER = ["t", "g_secular", "g_direct", "G_secular", "G_direct", "abs_err_g"]


def write_comparison_csv(cmp: dict, path) -> None:
    rows = zip(*(cmp[k] for k in COMPARISON_HEADER))
    write_csv_rows(path, COMPARISON_HEADER, rows)

"""Hamiltonians, Hamilton's equations and an adaptive Dormand-Prince integrator.

Three models share one twelve-component state vector ``(y, y', x, x')``:

``two_centre``
    One body attracted by masses at the origin and at a fixed ``x'``.
``symmetric``
    The same problem with centres at ``-x0`` (mass ``m_plus``) and ``+x0``
    (mass ``m_minus``); ``x'`` is ignored.
``sea``
    Rescaled heliocentric Sun-Earth-Asteroid Hamiltonian; ``x'`` is Earth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CartesianState, DomainError, MassParams
from .integrals import COLLISION_EPS, euler_G, euler_G_sym

MODES = ("two_centre", "symmetric", "sea")
CSV_HEADER = ["t", "y1", "y2", "y3", "x1", "x2", "x3", "energy", "G", "dist_c1", "dist_c2"]
SEA_EXTRA_HEADER = ["yp1", "yp2", "yp3", "xp1", "xp2", "xp3"]


class IntegratorError(RuntimeError):
    """Step size underflow or step budget exhausted."""


@dataclass(frozen=True)
class SymmetricParams:
    x0: np.ndarray
    m_plus: float
    m_minus: float

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(3))

    @classmethod
    def from_two_centre(cls, xprime, p: MassParams) -> "SymmetricParams":
        """Masses and offset reached from the two-centre form by rescaling y -> y/m and shifting by x'/2."""
        return cls(x0=0.5 * np.asarray(xprime, dtype=float), m_plus=1.0 / p.m, m_minus=p.eps / p.m)


def _dist(v) -> float:
    return math.sqrt(float(v @ v))


# --- Hamiltonians ---

def eval_h(s: CartesianState, p: MassParams) -> float:
    """|y|^2/(2m) - 1/|x| - eps/|x' - x|."""
    r = _dist(s.x)
    d = _dist(s.xprime - s.x)
    if r < COLLISION_EPS or (p.eps and d < COLLISION_EPS):
        raise DomainError("collision with a centre")
    out = float(s.y @ s.y) / (2.0 * p.m) - 1.0 / r
    if p.eps:
        out -= p.eps / d
    return out


def eval_h_sim(y, x, x0, m_plus: float, m_minus: float) -> float:
    y, x, x0 = (np.asarray(v, dtype=float) for v in (y, x, x0))
    rp = _dist(x + x0)
    rm = _dist(x - x0)
    out = 0.5 * float(y @ y)
    if m_plus:
        if rp < COLLISION_EPS:
            raise DomainError("collision with the centre at -x0")
        out -= m_plus / rp
    if m_minus:
        if rm < COLLISION_EPS:
            raise DomainError("collision with the centre at +x0")
        out -= m_minus / rm
    return out


@dataclass(frozen=True)
class SeaSplit:
    """H = h0 + rho*h1 + rho^2*f, each part stored already scaled."""

    total: float
    h0: float
    rho_h1: float
    rho2_f: float


def eval_sea(s: CartesianState, p: MassParams) -> SeaSplit:
    if p.eps == 0:
        raise DomainError("SEA Hamiltonian needs eps > 0")
    rho = p.rho
    rp = _dist(s.xprime)
    if rp < COLLISION_EPS:
        raise DomainError("Earth at the Sun")
    h0 = -1.0 / rp
    h1 = eval_h(s, MassParams(m=p.m, eps=p.eps))
    f = float(s.yprime @ s.yprime) / (2.0 * p.mprime) + p.eps * float(s.yprime @ s.y)
    return SeaSplit(total=h0 + rho * h1 + rho * rho * f, h0=h0, rho_h1=rho * h1, rho2_f=rho * rho * f)


def eval_sea_direct(s: CartesianState, p: MassParams) -> float:
    """Heliocentric three-body Hamiltonian with masses 1, eps, mu, rescaled by 1/eps and y -> mu*y."""
    eps, mu = p.eps, p.mu
    mprime = 1.0 / (1.0 + eps)
    m = 1.0 / (1.0 + mu)
    yp = mu * s.yprime
    y = mu * s.y
    hbar = (
        float(yp @ yp) / (2.0 * eps * mprime)
        - eps / _dist(s.xprime)
        + float(y @ y) / (2.0 * mu * m)
        - mu / _dist(s.x)
        - mu * eps / _dist(s.xprime - s.x)
        + float(yp @ y)
    )
    return hbar / eps


def hamiltonian(s: CartesianState, p, mode: str = "two_centre") -> float:
    if mode == "two_centre":
        return eval_h(s, p)
    if mode == "symmetric":
        return eval_h_sim(s.y, s.x, p.x0, p.m_plus, p.m_minus)
    if mode == "sea":
        return eval_sea(s, p).total
    raise ValueError(f"unknown mode {mode!r}")


# --- Hamilton's equations ---

def _check_mode(mode, p):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "symmetric" and not isinstance(p, SymmetricParams):
        raise TypeError("symmetric mode needs SymmetricParams")
    if mode == "sea" and p.eps == 0:
        raise DomainError("SEA mode rejects eps = 0 (rho undefined)")


def _rhs(mode: str, p) -> Callable[[float, np.ndarray], np.ndarray]:
    """Vector field on the packed state (y, y', x, x')."""
    _check_mode(mode, p)

    if mode == "two_centre":
        m, eps = p.m, p.eps

        def f(t, u):
            y, x, xp = u[0:3], u[6:9], u[9:12]
            r = _dist(x)
            d = xp - x
            rd = _dist(d)
            if r < COLLISION_EPS or (eps and rd < COLLISION_EPS):
                raise DomainError("collision")
            out = np.zeros(12)
            acc = -x / r**3
            if eps:
                acc = acc + eps * d / rd**3
            out[0:3] = acc
            out[6:9] = y / m
            return out

        return f

    if mode == "symmetric":
        x0, mp, mm = p.x0, p.m_plus, p.m_minus

        def f(t, u):
            y, x = u[0:3], u[6:9]
            a, b = x + x0, x - x0
            ra, rb = _dist(a), _dist(b)
            if ra < COLLISION_EPS or rb < COLLISION_EPS:
                raise DomainError("collision")
            out = np.zeros(12)
            out[0:3] = -mp * a / ra**3 - mm * b / rb**3
            out[6:9] = y
            return out

        return f

    m, eps, rho, mprime = p.m, p.eps, p.rho, p.mprime

    def f(t, u):
        y, yp, x, xp = u[0:3], u[3:6], u[6:9], u[9:12]
        r = _dist(x)
        rp = _dist(xp)
        d = xp - x
        rd = _dist(d)
        if min(r, rp, rd) < COLLISION_EPS:
            raise DomainError("collision")
        out = np.empty(12)
        out[0:3] = -rho * (x / r**3 - eps * d / rd**3)
        out[3:6] = -xp / rp**3 - rho * eps * d / rd**3
        out[6:9] = rho * y / m + rho * rho * eps * yp
        out[9:12] = rho * rho * (yp / mprime + eps * y)
        return out

    return f


def eom(s: CartesianState, p, which: str = "two_centre") -> CartesianState:
    """Time derivative (dH/dt of each coordinate) packaged as a CartesianState."""
    du = _rhs(which, p)(0.0, s.to_array())
    return CartesianState.from_array(du)


# --- Dormand-Prince 5(4) ---

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
_D = np.array([
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423,
])


@dataclass
class DenseStep:
    """Fourth-order continuous extension over one accepted step."""

    t0: float
    h: float
    coeffs: np.ndarray  # shape (5, n)

    def __call__(self, t: float) -> np.ndarray:
        th = (t - self.t0) / self.h
        th1 = 1.0 - th
        r = self.coeffs
        return r[0] + th * (r[1] + th1 * (r[2] + th * (r[3] + th1 * r[4])))


@dataclass
class SolverResult:
    t: list
    u: list
    dense: list
    n_accepted: int
    n_rejected: int
    error_estimate: float
    status: str = "completed"


def dormand_prince(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t_span: Sequence[float],
    u0,
    tol: float = 1e-10,
    h0: Optional[float] = None,
    event: Optional[Callable[[np.ndarray], float]] = None,
    max_steps: int = 2_000_000,
) -> SolverResult:
    """Adaptive embedded RK5(4) with PI step control.

    ``event(u)`` is checked after each accepted step; when it turns negative
    the crossing is located on the dense output and integration stops with
    status ``"event"``.  The last returned sample then has ``event >= 0``.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    direction = 1.0 if t1 >= t0 else -1.0
    u = np.array(u0, dtype=float)
    n = u.size
    t = t0
    span = abs(t1 - t0)
    ts, us, dense = [t], [u.copy()], []
    if span == 0:
        return SolverResult(ts, us, dense, 0, 0, 0.0)

    k1 = fun(t, u)
    if h0 is None:
        scale = tol + tol * np.abs(u)
        d0 = np.sqrt(np.mean((u / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h0 = min(h0, span)
    h = abs(h0)
    hmin = 1e-14 * max(1.0, abs(t0), abs(t1))
    err_old = 1e-4
    safety, alpha, beta = 0.9, 0.17, 0.04
    n_acc = n_rej = 0
    err_sum = 0.0
    last_rejected = False
    K = np.empty((7, n))

    while True:
        if n_acc + n_rej > max_steps:
            raise IntegratorError("step budget exhausted")
        if h < hmin:
            raise IntegratorError(f"step size underflow at t={t:.17g}")
        remaining = abs(t1 - t)
        final = h >= remaining * (1 - 1e-12)
        if final:
            h = remaining
        hs = direction * h
        K[0] = k1
        try:
            for i in range(1, 7):
                ui = u + hs * np.dot(_A[i], K[:i])
                K[i] = fun(t + _C[i] * hs, ui)
        except DomainError:
            n_rej += 1
            h *= 0.25
            last_rejected = True
            continue
        u_new = u + hs * (_B @ K)
        err_vec = hs * (_E @ K)
        scale = tol + tol * np.maximum(np.abs(u), np.abs(u_new))
        err = float(np.max(np.abs(err_vec / scale)))

        if err <= 1.0:
            t_new = t1 if final else t + hs
            ydiff = u_new - u
            bspl = hs * K[0] - ydiff
            coeffs = np.stack([
                u,
                ydiff,
                bspl,
                ydiff - hs * K[6] - bspl,
                hs * (_D @ K),
            ])
            step = DenseStep(t, hs, coeffs)
            n_acc += 1
            err_sum += float(np.max(np.abs(err_vec)))
            if event is not None and event(u_new) < 0:
                t_ev, u_ev = _locate_event(step, event, t, t_new)
                ts.append(t_ev)
                us.append(u_ev)
                dense.append(step)
                return SolverResult(ts, us, dense, n_acc, n_rej, err_sum, status="event")
            t, u, k1 = t_new, u_new, K[6].copy()
            ts.append(t)
            us.append(u.copy())
            dense.append(step)
            if final:
                return SolverResult(ts, us, dense, n_acc, n_rej, err_sum)
            fac = safety * max(err, 1e-10) ** -alpha * err_old**beta
            fac = min(5.0, max(0.2, fac))
            if last_rejected:
                fac = min(fac, 1.0)
            h *= fac
            err_old = max(err, 1e-4)
            last_rejected = False
        else:
            n_rej += 1
            h *= max(0.2, safety * err**-alpha)
            last_rejected = True


def _locate_event(step: DenseStep, event, t_lo: float, t_hi: float):
    """Bisect on the dense output; keeps the side where event >= 0."""
    lo, hi = t_lo, t_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if event(step(mid)) >= 0:
            lo = mid
        else:
            hi = mid
    return lo, step(lo)


# --- trajectories ---

@dataclass(frozen=True)
class IntegratorMeta:
    mode: str
    tol: float
    guard_radius: float
    n_accepted: int
    n_rejected: int
    error_estimate: float
    status: str  # "completed" or "collision"


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    x: np.ndarray
    xprime: np.ndarray
    yprime: np.ndarray
    energy: np.ndarray
    G: np.ndarray
    dist_c1: np.ndarray
    dist_c2: np.ndarray
    meta: IntegratorMeta
    dense: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def collided(self) -> bool:
        return self.meta.status == "collision"

    def state(self, i: int) -> CartesianState:
        return CartesianState(y=self.y[i], x=self.x[i], xprime=self.xprime[i], yprime=self.yprime[i])

    @property
    def final(self) -> CartesianState:
        return self.state(-1)

    def sample(self, times) -> np.ndarray:
        """Packed states at arbitrary times inside the integrated span, from the dense output."""
        return evaluate_dense(self.dense, times)

    def to_csv(self, path) -> None:
        sea = self.meta.mode == "sea"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER + (SEA_EXTRA_HEADER if sea else []))
            for i in range(len(self.t)):
                row = [self.t[i], *self.y[i], *self.x[i], self.energy[i], self.G[i], self.dist_c1[i], self.dist_c2[i]]
                if sea:
                    row += [*self.yprime[i], *self.xprime[i]]
                w.writerow([f"{v:.17g}" for v in row])


def evaluate_dense(dense: list, times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    starts = np.array([d.t0 for d in dense])
    ends = np.array([d.t0 + d.h for d in dense])
    forward = dense[-1].h > 0
    key = ends if forward else -ends
    out = np.empty((times.size, dense[0].coeffs.shape[1]))
    for j, tt in enumerate(times):
        i = int(np.searchsorted(key, tt if forward else -tt, side="left"))
        i = min(i, len(dense) - 1)
        lo, hi = sorted((starts[i], ends[i]))
        if not lo - 1e-12 <= tt <= hi + 1e-12:
            raise ValueError(f"time {tt} outside integrated span")
        out[j] = dense[i](tt)
    return out


def _distances(mode: str, p, U: np.ndarray):
    x, xp = U[:, 6:9], U[:, 9:12]
    if mode == "symmetric":
        return np.linalg.norm(x + p.x0, axis=1), np.linalg.norm(x - p.x0, axis=1)
    return np.linalg.norm(x, axis=1), np.linalg.norm(x - xp, axis=1)


def _guard_function(mode: str, p, guard_radius: float):
    if mode == "symmetric":
        x0 = p.x0
        return lambda u: min(_dist(u[6:9] + x0), _dist(u[6:9] - x0)) - guard_radius
    if mode == "sea":
        return lambda u: min(_dist(u[6:9]), _dist(u[9:12] - u[6:9]), _dist(u[9:12])) - guard_radius
    if p.eps:
        return lambda u: min(_dist(u[6:9]), _dist(u[9:12] - u[6:9])) - guard_radius
    return lambda u: _dist(u[6:9]) - guard_radius


def _diagnostic(mode: str, p, s: CartesianState):
    if mode == "symmetric":
        e = eval_h_sim(s.y, s.x, p.x0, p.m_plus, p.m_minus)
        g = euler_G_sym(s.y, s.x, p.x0, p.m_plus, p.m_minus)
    elif mode == "sea":
        e = eval_sea(s, p).total
        g = euler_G(s, MassParams(m=p.m, eps=p.eps))
    else:
        e = eval_h(s, p)
        g = euler_G(s, p)
    return e, g


def integrate(
    s0: CartesianState,
    p,
    t_span: Sequence[float],
    tol: float = 1e-10,
    guard_radius: float = 1e-6,
    mode: str = "two_centre",
    t_eval=None,
) -> Trajectory:
    """Integrate Hamilton's equations from ``s0``.

    Samples are the accepted steps unless ``t_eval`` is given, in which case
    the dense output is evaluated there.  A guard-radius approach to any
    centre ends the run with ``meta.status == "collision"``.
    """
    if not 1e-13 <= tol <= 1e-3:
        raise ValueError("tol must lie in [1e-13, 1e-3]")
    _check_mode(mode, p)
    guard = _guard_function(mode, p, guard_radius)
    u0 = s0.to_array()
    if guard(u0) < 0:
        raise DomainError("initial state inside the guard radius")
    res = dormand_prince(_rhs(mode, p), t_span, u0, tol=tol, event=guard)
    status = "collision" if res.status == "event" else "completed"

    if t_eval is None:
        T = np.asarray(res.t)
        U = np.asarray(res.u)
    else:
        t_eval = np.asarray(t_eval, dtype=float)
        last = res.t[-1]
        inside = t_eval <= last + 1e-12 if t_span[1] >= t_span[0] else t_eval >= last - 1e-12
        T = t_eval[inside]
        U = evaluate_dense(res.dense, T) if T.size else np.empty((0, 12))

    energy = np.empty(len(T))
    G = np.empty(len(T))
    for i in range(len(T)):
        energy[i], G[i] = _diagnostic(mode, p, CartesianState.from_array(U[i]))
    d1, d2 = _distances(mode, p, U)
    meta = IntegratorMeta(mode=mode, tol=tol, guard_radius=guard_radius, n_accepted=res.n_accepted,
                          n_rejected=res.n_rejected, error_estimate=res.error_estimate, status=status)
    return Trajectory(t=T, y=U[:, 0:3], yprime=U[:, 3:6], x=U[:, 6:9], xprime=U[:, 9:12],
                      energy=energy, G=G, dist_c1=d1, dist_c2=d2, meta=meta, dense=res.dense)


def read_trajectory_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.empty((0, len(header)))
    return {name: data[:, j] for j, name in enumerate(header)}


def write_csv_rows(path, header: Sequence[str], rows) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in r])

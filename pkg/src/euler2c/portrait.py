"""Planar phase portrait of the normalised Euler integral.

With ``q = G/Lambda`` and ``delta = r'/a`` the planar integral reads

    Ghat0(q, g) = q**2 + delta * sqrt(1 - q**2) * cos(g)

and in ``w = sqrt(1 - q**2)`` each level is the root ``w_plus`` of
``w**2 - delta*w*cos(g) - 1 + Ghat0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .core import DomainError

LEVEL_ATOL = 1e-12


@dataclass(frozen=True)
class PortraitSpec:
    delta: float
    level: float
    Lambda: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")


@dataclass(frozen=True)
class Equilibrium:
    g: float
    G_over_Lambda: float
    kind: str
    level: float


@dataclass
class LevelCurve:
    """Upper (G >= 0) branch of one level; the lower branch is its mirror in G."""

    level: float
    delta: float
    g: np.ndarray
    G_over_Lambda: np.ndarray
    w: np.ndarray
    label: str = ""
    reason: str = ""

    @property
    def empty(self) -> bool:
        return self.g.size == 0


def ghat0(q, g, delta):
    return q * q + delta * np.sqrt(1.0 - q * q) * np.cos(g)


def quadratic_residual(w, g, delta, level):
    return w * w - delta * w * np.cos(g) - 1.0 + level


def w_roots(delta, level, g):
    """Both roots ``(w_plus, w_minus)`` of the level equation in w."""
    c = delta * np.cos(g)
    disc = np.sqrt(c * c + 4.0 - 4.0 * level)
    wp = 0.5 * (c + disc)
    # Vieta keeps the small root accurate.
    wm = (level - 1.0) / wp
    return wp, wm


def equilibria(delta: float) -> tuple[list[Equilibrium], bool]:
    """Critical points of Ghat0 and whether delta is the transition value 2.

    Stability is read off the Hessian: definite means a local extremum of
    the integral, hence a stable equilibrium of its flow.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    transition = abs(delta - 2.0) < LEVEL_ATOL
    pts = [(0.0, 0.0), (math.pi, 0.0)]
    if delta < 2.0:
        pts.append((0.0, math.sqrt(1.0 - delta * delta / 4.0)))
    out = []
    for g, q in pts:
        H = _hessian(g, q, delta)
        det = float(np.linalg.det(H))
        kind = "stable" if det > 0 else "unstable"
        if transition and q == 0.0 and g == 0.0:
            kind = "degenerate"
        out.append(Equilibrium(g, q, kind, float(ghat0(q, g, delta))))
    return out, transition


def _hessian(g, q, delta):
    w = math.sqrt(1.0 - q * q)
    c, s = math.cos(g), math.sin(g)
    fgg = -delta * w * c
    fqq = 2.0 - delta * c / w**3
    fgq = delta * q * s / w
    return np.array([[fgg, fgq], [fgq, fqq]])


def classify_motion(spec: PortraitSpec) -> str:
    d, lv = spec.delta, spec.level
    if not 0 < d < 1:
        raise DomainError("classification covers 0 < delta < 1")
    if abs(lv - d) <= LEVEL_ATOL:
        return "separatrix"
    if abs(lv - 1.0) <= LEVEL_ATOL:
        return "boundary_level"
    if lv < -d - LEVEL_ATOL:
        return "forbidden_below"
    if lv < d:
        return "libration"
    if lv < 1.0:
        return "rotation"
    return "above_window"


def admissible_arc(delta: float, level: float):
    """g-interval on which 0 <= w_plus <= 1, or None.

    Returns ``(g_lo, g_hi)`` with ``g_lo <= g_hi`` inside ``[0, 2 pi]``.
    """
    ratio = level / delta
    if ratio >= 1.0:
        return (0.0, 2 * math.pi)
    if ratio < -1.0 - LEVEL_ATOL:
        return None
    g_star = math.acos(max(-1.0, ratio))
    return (g_star, 2 * math.pi - g_star)


def level_curve(spec: PortraitSpec, n_points: int = 401) -> list[LevelCurve] | LevelCurve:
    """Points (g, G/Lambda) of the level, sampled uniformly in g on the admissible arc.

    The split level Ghat0 = 1 returns a list of its two components.
    """
    d, lv = spec.delta, spec.level
    if abs(lv - 1.0) <= LEVEL_ATOL:
        return _split_level(d, n_points)
    if lv > 1.0:
        return _empty(spec, "level above the studied window")
    arc = admissible_arc(d, lv)
    if arc is None:
        return _empty(spec, f"level {lv} is below the global minimum {-d}")
    g = np.linspace(arc[0], arc[1], n_points)
    if arc[0] == arc[1]:
        g = g[:1]
    w, _ = w_roots(d, lv, g)
    w = np.minimum(w, 1.0)
    q = np.sqrt(1.0 - w * w)
    kind = classify_motion(spec) if d < 1 else ""
    return LevelCurve(lv, d, g, q, w, label=kind)


def _empty(spec, reason):
    z = np.empty(0)
    return LevelCurve(spec.level, spec.delta, z, z, z, reason=reason)


def _split_level(delta, n_points):
    """Level 1 = {G = Lambda} union {w = delta cos g, cos g >= 0}."""
    g = np.linspace(0.0, 2 * np.pi, n_points)
    top = LevelCurve(1.0, delta, g, np.ones_like(g), np.zeros_like(g), label="G=Lambda")
    g2 = np.linspace(-np.pi / 2, np.pi / 2, n_points)
    w2 = delta * np.cos(g2)
    inner = LevelCurve(1.0, delta, np.mod(g2, 2 * np.pi), np.sqrt(1.0 - w2 * w2), w2, label="w=delta*cos(g)")
    return [top, inner]


def homoclinic(delta: float, Lambda: float, t, t0: float = 0.0, branch: int = 1):
    """Separatrix solution ``(G, g)``; ``branch`` picks the sign of g."""
    if not 0 < delta < 1:
        raise DomainError("homoclinic solution needs 0 < delta < 1")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    sigma = math.sqrt(delta * (2.0 - delta))
    beta2 = 2.0 - delta
    tau = sigma * Lambda * (np.asarray(t, dtype=float) - t0)
    # u = sech^2 without overflow for large |tau|.
    sech = 1.0 / np.cosh(np.minimum(np.abs(tau), 700.0))
    u = sech * sech
    G = sigma * Lambda * sech
    root = np.sqrt(1.0 - sigma * sigma * u)
    cos_g = (1.0 - beta2 * u) / root
    # sin^2 g simplifies to beta^4 u (1 - u) / (1 - sigma^2 u) since 2 beta^2 - sigma^2 = beta^4.
    sin_g = beta2 * np.sqrt(u * (1.0 - u)) / root
    g = branch * np.arctan2(sin_g, cos_g)
    return G, g


def _g_of_arc(spec, g):
    w, _ = w_roots(spec.delta, spec.level, g)
    return spec.Lambda * np.sqrt(np.maximum(0.0, 1.0 - np.minimum(w, 1.0) ** 2))


def action_A0(spec: PortraitSpec, epsabs: float = 1e-10) -> float:
    """(1/2 pi) times the area integral of G dg around the level (adaptive quadrature)."""
    kind = classify_motion(spec)
    if kind == "separatrix":
        raise DomainError("action not defined by design on the separatrix")
    if kind not in ("libration", "rotation"):
        raise DomainError(f"no closed orbit for a {kind} level")
    if kind == "rotation":
        val, _ = quad(lambda g: _g_of_arc(spec, g), 0.0, 2 * np.pi, epsabs=epsabs, epsrel=epsabs, limit=200)
        return val / (2 * np.pi)
    half, theta_of = _libration_substitution(spec)
    val, _ = quad(theta_of, -np.pi / 2, np.pi / 2, epsabs=epsabs, epsrel=epsabs, limit=200)
    return 2.0 * val / (2 * np.pi)


def _libration_substitution(spec):
    """g = pi + L sin(theta) removes the square-root endpoints of the libration arc."""
    g_lo, _ = admissible_arc(spec.delta, spec.level)
    half = math.pi - g_lo
    return half, lambda th: _g_of_arc(spec, math.pi + half * np.sin(th)) * half * np.cos(th)


def action_A0_trapezoid(spec: PortraitSpec, n: int = 10_000) -> float:
    """Fixed-node trapezoid version of ``action_A0``, independent of the adaptive rule."""
    kind = classify_motion(spec)
    if kind == "rotation":
        g = 2 * np.pi * np.arange(n) / n
        return float(np.mean(_g_of_arc(spec, g)))
    if kind == "libration":
        _, f = _libration_substitution(spec)
        th = np.linspace(-np.pi / 2, np.pi / 2, n + 1)
        y = f(th)
        integral = (th[1] - th[0]) * (y.sum() - 0.5 * (y[0] + y[-1]))
        return float(2.0 * integral / (2 * np.pi))
    raise DomainError(f"no closed orbit for a {kind} level")


# --- export ---

@dataclass
class PortraitReport:
    delta: float
    curves: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def build_portrait(delta: float, levels, n_points: int = 401) -> PortraitReport:
    if not 0 < delta < 1:
        raise DomainError("portrait export needs 0 < delta < 1")
    rep = PortraitReport(delta)
    for lv in levels:
        res = level_curve(PortraitSpec(delta, float(lv)), n_points)
        for c in res if isinstance(res, list) else [res]:
            if c.empty:
                rep.warnings.append(f"level {lv}: {c.reason}")
            else:
                rep.curves.append(c)
    return rep


def write_level_csv(curve: LevelCurve, path) -> None:
    with open(path, "w") as fh:
        fh.write("g,G_over_Lambda\n")
        for g, q in zip(curve.g, curve.G_over_Lambda):
            fh.write(f"{g:.17g},{q:.17g}\n")


_STYLE = {
    "separatrix": 'stroke="#c0392b" stroke-width="2.2" stroke-dasharray="6 3"',
    "libration": 'stroke="#2e6da4" stroke-width="1.2"',
    "rotation": 'stroke="#2a8c4a" stroke-width="1.2"',
}
_DEFAULT_STYLE = 'stroke="#555555" stroke-width="1.2"'


def render_svg(rep: PortraitReport, width: int = 800, height: int = 420) -> str:
    """Curves in the (g, G/Lambda) plane, g in [0, 2 pi], G/Lambda in [-1, 1], both G branches."""
    pad = 40
    sx = (width - 2 * pad) / (2 * np.pi)
    sy = (height - 2 * pad) / 2.0

    def pt(g, q):
        return f"{pad + g * sx:.2f},{height / 2 - q * sy:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="14">g</text>',
        f'<text x="12" y="{height / 2}" font-size="14">G/&#923;</text>',
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="14">'
        f"&#948; = {rep.delta:g}</text>",
    ]
    for c in rep.curves:
        style = _STYLE.get(c.label, _DEFAULT_STYLE)
        for sign in (1.0, -1.0):
            d = " ".join(pt(g, sign * q) for g, q in zip(c.g, c.G_over_Lambda))
            parts.append(
                f'<polyline class="{c.label or "level"}" data-level="{c.level:g}" fill="none" {style} points="{d}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def export_portrait(rep: PortraitReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, c in enumerate(rep.curves):
        suffix = f"_{i}" if sum(1 for k in rep.curves if k.level == c.level) > 1 else ""
        path = out / f"level_{c.level:+.6g}{suffix}.csv"
        write_level_csv(c, path)
        written.append(path)
    svg = out / "portrait.svg"
    svg.write_text(render_svg(rep))
    written.append(svg)
    return written

"""Collision set of the two-centre problem and a risk classifier.

An ellipse passes through the second centre exactly when the Euler integral
sits on the level ``G0 = m r'``, which is also the separatrix of the planar
portrait.  Distances from that level are measured in units of ``Lambda**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .coords import DelaunayElements, g0_in_chart, mean_from_true, wrap

LEVEL_ATOL = 1e-12
PLANAR_ATOL = 1e-12


def separatrix_level(m: float, rprime: float) -> float:
    if not (m > 0 and rprime > 0):
        raise ValueError("m and rprime must be positive")
    return m * rprime


@dataclass(frozen=True)
class Crossing:
    """Where the conic reaches radius r'.

    ``theta`` is the true anomaly of the crossing in ``[0, pi]`` (the mirror
    point is ``-theta``) and ``ell`` its mean anomaly.  ``on_centre`` tells
    whether the actual angle between x' and the pericentre equals ``theta``,
    i.e. whether the orbit really passes through the second centre.
    """

    theta: float
    ell: float
    on_centre: bool


def _is_planar(d: DelaunayElements) -> bool:
    return abs(d.Theta) <= PLANAR_ATOL * max(1.0, d.G)


def conic_crossing(d: DelaunayElements, m: float) -> Optional[Crossing]:
    if not _is_planar(d):
        raise ValueError("conic crossing is only defined for planar elements (Theta = 0)")
    a = d.semi_major_axis(m)
    e = d.eccentricity
    p = a * (1.0 - e * e)
    if e == 0.0 or "circular" in d.flags:
        if abs(a - d.rprime) > LEVEL_ATOL * max(1.0, a):
            return None
        return Crossing(theta=0.0, ell=0.0, on_centre=True)
    c = (p / d.rprime - 1.0) / e
    if abs(c) > 1.0 + LEVEL_ATOL:
        return None
    theta = math.acos(max(-1.0, min(1.0, c)))
    ell = float(wrap(mean_from_true(e, theta)))
    on_centre = False
    if d.g is not None:
        # cos(angle(x', P)) = -cos g on the plane.
        actual = math.acos(max(-1.0, min(1.0, -math.cos(d.g))))
        on_centre = abs(actual - theta) <= 1e-9
    return Crossing(theta=theta, ell=ell, on_centre=on_centre)


def risk_classify(d: DelaunayElements, m: float, margin: float) -> dict:
    """Risk report; ``at_risk`` iff the normalised distance to ``m r'`` is within ``margin``."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    g0 = g0_in_chart(d, m)
    level = separatrix_level(m, d.rprime)
    dist = abs(g0 - level) / d.Lambda**2
    report = {"g0": g0, "level": level, "distance_normalized": dist}
    if not _is_planar(d):
        report["classification"] = "unsupported"
        return report
    report["classification"] = "at_risk" if dist <= margin + LEVEL_ATOL else "safe"
    crossing = conic_crossing(d, m)
    if crossing is not None:
        report["crossing_anomaly"] = {"theta": crossing.theta, "ell": crossing.ell, "on_centre": crossing.on_centre}
    return report

import math

import numpy as np
import pytest

from euler2c.collision import conic_crossing, risk_classify, separatrix_level
from euler2c.coords import DelaunayElements
from euler2c.portrait import equilibria

from conftest import min_distance


def elements(Lambda, G, g, rprime, Theta=0.0):
    circ = G == Lambda
    return DelaunayElements(Lambda=Lambda, G=G, ell=None if circ else 0.0, g=None if circ else g,
                            Theta=Theta, vartheta=None, rprime=rprime,
                            flags=frozenset({"circular"}) if circ else frozenset())


def test_separatrix_level():
    assert separatrix_level(1.0, 0.5) == 0.5
    with pytest.raises(ValueError):
        separatrix_level(0.0, 1.0)
    for m, a, rp in [(1.0, 1.0, 0.5), (0.7, 2.0, 0.3), (2.0, 0.5, 0.1)]:
        Lam2 = m * a
        saddle = [q for q in equilibria(rp / a)[0] if q.kind == "unstable"][0]
        assert separatrix_level(m, rp) / Lam2 == pytest.approx(saddle.level, abs=1e-12)


def test_crossing_examples():
    assert conic_crossing(elements(1.0, 1.0, 0.0, 0.5), 1.0) is None
    assert conic_crossing(elements(1.0, 1.0, 0.0, 1.0), 1.0) is not None
    G = math.sqrt(1 - 0.44**2)
    cr = conic_crossing(elements(1.0, G, 1.0, 1.0), 1.0)
    assert math.cos(cr.theta) == pytest.approx((0.8064 - 1) / 0.44, abs=1e-12)
    assert conic_crossing(elements(1.0, G, 1.0, 2.0), 1.0) is None
    with pytest.raises(ValueError):
        conic_crossing(elements(1.0, G, 1.0, 1.0, Theta=0.3), 1.0)


def test_crossing_confirmed_by_sampling():
    G = math.sqrt(1 - 0.44**2)
    cr = conic_crossing(elements(1.0, G, 1.0, 1.0), 1.0)
    # orient the orbit so that the crossing lands on x'
    g_hit = math.pi - cr.theta
    assert min_distance(1.0, G, g_hit, 1.0, 1.0) < 1e-9
    d = elements(1.0, G, g_hit, 1.0)
    assert conic_crossing(d, 1.0).on_centre
    rep = risk_classify(d, 1.0, 0.0)
    assert rep["classification"] == "at_risk" and rep["distance_normalized"] < 1e-12


def test_risk_examples():
    rep = risk_classify(elements(1.0, 1.0, 0.0, 0.5), 1.0, 0.3)
    assert rep["g0"] == pytest.approx(1.0) and rep["classification"] == "safe"
    assert rep["distance_normalized"] == pytest.approx(0.5)
    assert risk_classify(elements(1.0, 1.0, 0.0, 0.5), 1.0, 0.6)["classification"] == "at_risk"
    rep = risk_classify(elements(1.0, 0.8, 0.3, 0.5, Theta=0.2), 1.0, 0.1)
    assert rep["classification"] == "unsupported"
    with pytest.raises(ValueError):
        risk_classify(elements(1.0, 0.8, 0.3, 0.5), 1.0, -0.1)


def on_separatrix(rng, m):
    while True:
        Lam = rng.uniform(0.7, 1.4)
        G = rng.uniform(0.3, 0.98) * Lam
        rp = rng.uniform(0.1, 2.0) * Lam**2 / m
        w = math.sqrt(1 - (G / Lam) ** 2)
        c = (m * rp - G * G) / (m * rp * w)
        if abs(c) < 0.99:
            return Lam, G, rng.choice([-1, 1]) * math.acos(c) % (2 * math.pi), rp


def test_membership_equivalence(rng):
    m = 1.0
    agree = 0
    for i in range(100):
        if i % 2:
            Lam, G, g, rp = on_separatrix(rng, m)
        else:
            Lam = rng.uniform(0.7, 1.4)
            G = rng.uniform(0.3, 0.98) * Lam
            g = rng.uniform(0, 2 * np.pi)
            rp = rng.uniform(0.1, 2.0) * Lam**2 / m
        # the refined scan resolves hits to ~1e-7; misses sit above 1e-2
        in_s = min_distance(Lam, G, g, rp, m) < 1e-6
        flagged = risk_classify(elements(Lam, G, g, rp), m, 0.0)["classification"] == "at_risk"
        assert flagged == in_s
        agree += in_s
    assert agree == 50

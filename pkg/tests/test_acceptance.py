"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from euler2c.collision import risk_classify
from euler2c.coords import (
    DelaunayElements,
    cartesian_to_delaunay,
    cartesian_to_pchart,
    delaunay_to_cartesian,
    eval_h_elliptic,
    eval_h_pchart,
    from_elliptic,
    g0_in_chart,
    hj_split,
    to_elliptic,
)
from euler2c.core import CartesianState, MassParams, poisson_bracket_richardson
from euler2c.dynamics import SymmetricParams, eval_h, eval_h_sim, eval_sea, eval_sea_direct, integrate
from euler2c.integrals import conservation_report, euler_G, euler_G0, euler_G_sym
from euler2c.portrait import (
    PortraitSpec,
    classify_motion,
    equilibria,
    ghat0,
    homoclinic,
    level_curve,
    quadratic_residual,
)
from euler2c.secular import (
    SecularPoint,
    SecularState,
    compare_with_direct,
    level_representative,
    u_avg,
    u_avg_direct,
    u_avg_series,
    u_fixed_points,
)

from conftest import min_distance, random_state, spatial_state, sym_state


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


def test_criterion_01_conservation(verdict):
    s = CartesianState(y=[0, 1.1, 0.1], x=[-1, 0, 0], xprime=[2, 0, 0])
    tr = integrate(s, MassParams(m=1.0, eps=0.1), (0, 100), tol=1e-10)
    rep = conservation_report(tr)
    ok = not tr.collided and rep["energy"] < 1e-8 and rep["G"] < 1e-6
    verdict(1, ok, f"energy drift {rep['energy']:.2e} (< 1e-8), G drift {rep['G']:.2e} (< 1e-6)")


def test_criterion_02_commutation(verdict, rng):
    p = MassParams(m=1.0, eps=0.1)
    worst = 0.0
    for _ in range(100):
        s = random_state(rng, bound=False)
        b = poisson_bracket_richardson(lambda z: eval_h(z, p), lambda z: euler_G(z, p), s)
        worst = max(worst, abs(b))
    verdict(2, worst < 1e-6, f"max |{{h, G}}| over 100 states {worst:.2e} (< 1e-6)")


def test_criterion_03_charts(verdict, rng):
    p = MassParams(m=1.0, eps=0.1)
    g0_err = rt_err = 0.0
    for _ in range(1000):
        s = spatial_state(rng, p)
        d = cartesian_to_delaunay(s, p)
        g0_err = max(g0_err, abs(g0_in_chart(d, p.m) - euler_G0(s, p.m)))
        back = delaunay_to_cartesian(d, p)
        rt_err = max(rt_err, float(np.max(np.abs(back.to_array() - s.to_array()))))
    el_err = 0.0
    x0 = np.array([0.4, -0.3, 0.2])
    for _ in range(1000):
        y, x = sym_state(rng, x0)
        ps = cartesian_to_pchart(y, x, x0)
        back = from_elliptic(to_elliptic(ps))
        dphi = abs(math.remainder(back.phi - ps.phi, 2 * math.pi))
        el_err = max(el_err, abs(back.Phi - ps.Phi), abs(back.R - ps.R), abs(back.r - ps.r), dphi)
    ok = g0_err < 1e-9 and rt_err < 1e-9 and el_err < 1e-9
    verdict(3, ok, f"G0 chart {g0_err:.1e}, Delaunay roundtrip {rt_err:.1e}, elliptic roundtrip {el_err:.1e} (< 1e-9)")


def test_criterion_04_separation(verdict):
    x0 = np.array([0.5, 0.0, 0.0])
    mp, mm = 1.0, 0.3
    p = SymmetricParams(x0=x0, m_plus=mp, m_minus=mm)
    s = CartesianState(y=[0, 0.9, 0.2], x=[0.2, 0.9, 0.1])
    tr = integrate(s, p, (0, 40), tol=1e-11, mode="symmetric")
    split = sym = h_err = 0.0
    for i in range(0, len(tr), max(1, len(tr) // 200)):
        y, x = tr.y[i], tr.x[i]
        ps = cartesian_to_pchart(y, x, x0)
        es = to_elliptic(ps)
        E = eval_h_sim(y, x, x0, mp, mm)
        Fm, Fl = hj_split(es, E, mp, mm)
        Gs = euler_G_sym(y, x, x0, mp, mm)
        split = max(split, abs(Fm - Fl))
        sym = max(sym, abs(Fm - Gs), abs(Fl - Gs))
        h_err = max(h_err, abs(eval_h_elliptic(es, mp, mm) - eval_h_pchart(ps, mp, mm)))
    ok = split < 1e-8 and sym < 1e-8 and h_err < 1e-10
    verdict(4, ok, f"|F_mu - F_lam| {split:.1e}, vs G_sym {sym:.1e} (< 1e-8); elliptic vs P-chart h {h_err:.1e} (< 1e-10)")


def test_criterion_05_portrait(verdict):
    res = eq_err = 0.0
    class_ok = True
    for delta in np.linspace(0.02, 0.98, 50):
        for lv in np.linspace(-delta, 1.0 - 1e-3, 50):
            spec = PortraitSpec(delta, lv)
            c = level_curve(spec, n_points=64)
            res = max(res, float(np.max(np.abs(quadratic_residual(c.w, c.g, delta, lv)))))
            # interior points obey cos g < level/delta; rotation iff the arc is the full circle
            full = c.g[0] == 0.0 and abs(c.g[-1] - 2 * np.pi) < 1e-12
            kind = classify_motion(spec)
            class_ok &= kind == ("rotation" if full else ("separatrix" if abs(lv - delta) < 1e-12 else "libration"))
            class_ok &= bool(np.all(np.cos(c.g[1:-1]) < lv / delta)) or full
        eqs, _ = equilibria(delta)
        levels = sorted(e.level for e in eqs)
        expect = sorted([delta, -delta, 1 + delta**2 / 4])
        eq_err = max(eq_err, max(abs(a - b) for a, b in zip(levels, expect)))
    ok = res < 1e-12 and class_ok and eq_err < 1e-12
    verdict(5, ok, f"level residual {res:.1e} (< 1e-12), classification {'consistent' if class_ok else 'MISMATCH'}, "
                   f"equilibrium levels {eq_err:.1e} (< 1e-12)")


def test_criterion_06_homoclinic(verdict):
    res = tail = 0.0
    for delta in (0.1, 0.5, 0.9):
        t = np.linspace(-10, 10, 4001)
        G, g = homoclinic(delta, 1.0, t)
        res = max(res, float(np.max(np.abs(ghat0(G, g, delta) - delta))))
        sigma = math.sqrt(delta * (2 - delta))
        for branch in (1, -1):
            Ge, ge = homoclinic(delta, 1.0, np.array([-20 / sigma, 20 / sigma]), branch=branch)
            tail = max(tail, float(np.max(np.abs(Ge))), float(np.max(np.abs(ge))))
    verdict(6, res < 1e-9 and tail < 1e-6, f"level residual {res:.1e} (< 1e-9), |(G, g)| at sigma*Lambda*|t| = 20 {tail:.1e} (< 1e-6)")


def test_criterion_07_averaging(verdict):
    zero = max(abs(u_avg(SecularPoint(0.0, 1.0, 0.0, G0), 1.0) + 1.0) for G0 in (0.1, 0.5, 0.9))
    resid = []
    for ratio in (0.1, 0.05):
        pt = SecularPoint(ratio, 1.0, 0.0, 0.64)
        resid.append(abs(u_avg(pt, 1.0) - u_avg_series(pt, 1.0)))
    shrink = resid[0] / resid[1]
    Theta = 0.2
    target = math.sqrt(5) * Theta
    devs = []
    for ratio in (0.1, 0.05, 0.025):
        roots = u_fixed_points(ratio, 1.0, Theta, 1.0, n_grid=60)
        devs.append(min(abs(math.sqrt(r) - target) / target for r in roots) if roots else math.inf)
    ok = zero < 1e-11 and abs(shrink / 16 - 1) < 0.1 and devs[1] < 0.10 and devs[0] > devs[1] > devs[2]
    verdict(7, ok, f"|U(r'=0) + 1/a| {zero:.1e} (< 1e-11), residual shrink x{shrink:.2f} (about 16), "
                   f"fixed-point deviation {devs[0]:.1%} -> {devs[1]:.1%} -> {devs[2]:.1%} (< 10% at 0.05, decreasing)")


def test_criterion_08_level_constancy(verdict):
    rp, Lam, Theta, G0, m = 0.3, 1.0, 0.2, 0.55, 1.0
    vals = []
    for g in np.linspace(0.2, 2 * np.pi - 0.2, 20):
        G, gg = level_representative(rp, Lam, Theta, G0, m, g=g)
        vals.append(u_avg_direct(rp, Lam, Theta, G, gg, m))
    spread = float(np.ptp(vals))
    verdict(8, len(vals) == 20 and spread < 1e-8, f"variation over 20 level representatives {spread:.1e} (< 1e-8)")


def test_criterion_09_secular_vs_direct(verdict):
    s0 = SecularState(rprime=0.3, Lambda=1.0, Theta=0.0, Rprime=0.0, G=math.sqrt(0.75), g=math.pi / 2,
                      ell=0.0, vartheta=0.0)
    cmp = compare_with_direct(s0, MassParams(m=1.0, eps=1e-3), 200.0, n_out=11)
    gs, gd = cmp["g_secular"][-1], cmp["g_direct"][-1]
    rel = abs(gs - gd) / abs(gd)
    verdict(9, rel < 0.05, f"g(T=200) secular {gs:.6f} vs direct {gd:.6f}, relative error {rel:.2%} (< 5%)")


def _tilted(rng, y, x, yp, xp):
    R = Rotation.random(random_state=rng)
    return CartesianState(y=R.apply(y), x=R.apply(x), xprime=R.apply(xp), yprime=R.apply(yp))


def test_criterion_10_sea_invariance(verdict, rng):
    p = MassParams.sea(eps=1e-3, mu=1e-5)
    xp, yp = [1.0, 0, 0], [0, 1.0, 0]
    worst = 0.0
    retro = True
    for y, x in [([0, -0.9, 0], [0.6, 0, 0]), ([0.2, -1.0, 0], [0, 0.7, 0])]:
        s = _tilted(rng, y, x, yp, xp)
        C = np.cross(s.x, s.y)
        Ct = C + np.cross(s.xprime, s.yprime)
        retro &= float(C @ Ct) < 0
        tr = integrate(s, p, (0, 50), tol=1e-11, mode="sea")
        C = np.cross(tr.x, tr.y)
        theta = np.einsum("ij,ij->i", C, tr.xprime) / np.linalg.norm(tr.xprime, axis=1)
        worst = max(worst, float(np.max(np.abs(theta))))
        retro &= not tr.collided and tr.t[-1] == pytest.approx(50.0)
    split = 0.0
    for _ in range(100):
        s = random_state(rng, rprime=1.0, bound=False, with_yprime=True)
        sp = eval_sea(s, p)
        split = max(split, abs(sp.h0 + sp.rho_h1 + sp.rho2_f - sp.total), abs(sp.total - eval_sea_direct(s, p)) / max(1, abs(sp.total)))
    ok = retro and worst < 1e-8 and split < 1e-12
    verdict(10, ok, f"max |Theta(t)| on the retrograde plane up to t = 50 {worst:.1e} (< 1e-8), split re-sum {split:.1e} (< 1e-12)")


def test_criterion_11_collision_equivalence(verdict, rng):
    m = 1.0
    agree = hits = 0
    for i in range(100):
        Lam = rng.uniform(0.7, 1.4)
        G = rng.uniform(0.3, 0.98) * Lam
        rp = rng.uniform(0.1, 2.0) * Lam**2 / m
        w = math.sqrt(1 - (G / Lam) ** 2)
        c = (m * rp - G * G) / (m * rp * w)
        if i % 2 and abs(c) < 0.99:
            g = float(rng.choice([-1, 1]) * math.acos(c)) % (2 * math.pi)
        else:
            g = rng.uniform(0, 2 * np.pi)
        d = DelaunayElements(Lambda=Lam, G=G, ell=0.0, g=g, Theta=0.0, vartheta=None, rprime=rp, flags=frozenset())
        flagged = risk_classify(d, m, 0.0)["classification"] == "at_risk"
        in_s = min_distance(Lam, G, g, rp, m) < 1e-6
        agree += flagged == in_s
        hits += in_s
    verdict(11, agree == 100, f"{agree}/100 element sets agree with the sampling oracle ({hits} in S)")

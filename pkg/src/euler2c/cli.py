"""euler2c command line: simulate, portrait, secular, risk.

Every command reads one JSON config (or a JSON list of configs, run in a
thread pool capped by ``EULER2C_THREADS``).  Exit codes: 0 ok, 1 usage or
config error, 2 a simulation stopped on the collision guard.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .collision import risk_classify
from .coords import DelaunayElements, elements_to_state
from .core import CartesianState, DomainError, MassParams
from .dynamics import MODES, SymmetricParams, integrate
from .integrals import conservation_report, write_report
from .portrait import build_portrait, export_portrait
from .secular import MAX_NODES, MIN_NODES, QUAD_RTOL, SecularState, compare_with_direct, write_comparison_csv

log = logging.getLogger("euler2c")

EXIT_OK, EXIT_CONFIG, EXIT_COLLISION = 0, 1, 2
DEFAULT_MARGIN = 0.05


class ConfigError(ValueError):
    pass


def _need(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where}: missing key {key!r}")
    return cfg[key]


def _masses(cfg: dict) -> MassParams:
    m = cfg.get("masses", {})
    try:
        if cfg.get("mode") == "sea":
            return MassParams.sea(eps=float(_need(m, "eps", "masses")), mu=float(_need(m, "mu", "masses")))
        return MassParams(m=float(m.get("m", 1.0)), eps=float(m.get("eps", 0.0)), mu=float(m.get("mu", 0.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"masses: {exc}") from exc


def _delaunay_block(d: dict) -> dict:
    out = {k: float(_need(d, k, "initial_state.delaunay")) for k in ("Lambda", "G", "g", "rprime")}
    out["ell"] = float(d.get("ell", 0.0))
    out["Theta"] = float(d.get("Theta", 0.0))
    return out


def _initial_state(cfg: dict, p: MassParams) -> CartesianState:
    init = _need(cfg, "initial_state")
    if "cartesian" in init:
        c = init["cartesian"]
        try:
            return CartesianState(
                y=_need(c, "y", "initial_state.cartesian"),
                x=_need(c, "x", "initial_state.cartesian"),
                xprime=c.get("xprime", [0.0, 0.0, 0.0]),
                yprime=c.get("yprime", [0.0, 0.0, 0.0]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"initial_state.cartesian: {exc}") from exc
    if "delaunay" in init:
        d = _delaunay_block(init["delaunay"])
        return elements_to_state(d["Lambda"], d["G"], d["g"], d["ell"], d["rprime"], p.m, d["Theta"])
    raise ConfigError("initial_state needs a 'cartesian' or 'delaunay' block")


def _integrator(cfg: dict):
    it = cfg.get("integrator", {})
    span = it.get("t_span", [0.0, 100.0])
    if len(span) != 2:
        raise ConfigError("integrator.t_span must have two entries")
    return float(it.get("tol", 1e-10)), (float(span[0]), float(span[1])), float(it.get("guard", 1e-6))


def _out_dir(cfg: dict, override) -> Path:
    d = Path(override) if override else Path(cfg.get("output", {}).get("dir", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_metadata(out: Path, command: str, cfg: dict, extra: dict) -> None:
    meta = {"command": command, "version": __version__, "config": cfg, **extra}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


# --- commands ---

def cmd_simulate(cfg: dict, out_override=None, margin=None) -> int:
    mode = cfg.get("mode", "two_centre")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    p = _masses(cfg)
    s0 = _initial_state(cfg, p)
    tol, span, guard = _integrator(cfg)
    params = p
    if mode == "symmetric":
        sym = cfg.get("symmetric", {})
        params = SymmetricParams(x0=_need(sym, "x0", "symmetric"), m_plus=float(_need(sym, "m_plus", "symmetric")),
                                 m_minus=float(_need(sym, "m_minus", "symmetric")))
    traj = integrate(s0, params, span, tol=tol, guard_radius=guard, mode=mode)
    out = _out_dir(cfg, out_override)
    traj.to_csv(out / "trajectory.csv")
    report = conservation_report(traj)
    report["status"] = traj.meta.status
    report["truncated"] = traj.collided
    report["t_final"] = float(traj.t[-1])
    write_report(report, out / "conservation.json")
    _write_metadata(out, "simulate", cfg, {
        "n_accepted": traj.meta.n_accepted,
        "n_rejected": traj.meta.n_rejected,
        "error_estimate": traj.meta.error_estimate,
    })
    if traj.collided:
        log.warning("collision guard triggered at t = %.6g; trajectory truncated", traj.t[-1])
        return EXIT_COLLISION
    return EXIT_OK


def cmd_portrait(cfg: dict, out_override=None, margin=None) -> int:
    pc = _need(cfg, "portrait")
    delta = float(_need(pc, "delta", "portrait"))
    if not 0 < delta < 1:
        raise ConfigError("portrait.delta must lie in (0, 1)")
    levels = [float(v) for v in pc.get("levels", [-delta / 2, delta / 2, delta, (1 + delta) / 2])]
    n_points = int(pc.get("n_points", 401))
    rep = build_portrait(delta, levels, n_points)
    for w in rep.warnings:
        log.warning(w)
    out = _out_dir(cfg, out_override)
    files = export_portrait(rep, out)
    _write_metadata(out, "portrait", cfg, {
        "n_points": n_points,
        "files": [f.name for f in files],
        "warnings": rep.warnings,
    })
    return EXIT_OK


def cmd_secular(cfg: dict, out_override=None, margin=None) -> int:
    p = _masses(cfg)
    d = _delaunay_block(_need(_need(cfg, "initial_state"), "delaunay", "initial_state"))
    if d["Theta"] != 0:
        raise ConfigError("secular comparison is planar (Theta = 0)")
    sc = cfg.get("secular", {})
    T = float(sc.get("T", 200.0))
    n_out = int(sc.get("n_out", 21))
    tol, _, _ = _integrator(cfg)
    s0 = SecularState(rprime=d["rprime"], Lambda=d["Lambda"], Theta=0.0, Rprime=0.0,
                      G=d["G"], g=d["g"], ell=d["ell"], vartheta=0.0)
    cmp = compare_with_direct(s0, p, T, n_out=n_out, tol=tol)
    out = _out_dir(cfg, out_override)
    write_comparison_csv(cmp, out / "secular_comparison.csv")
    g_T, g_dir = cmp["g_secular"][-1], cmp["g_direct"][-1]
    _write_metadata(out, "secular", cfg, {
        "quadrature": {"rule": "trapezoid", "rtol": QUAD_RTOL, "min_nodes": MIN_NODES, "max_nodes": MAX_NODES},
        "rel_err_g_final": abs(g_T - g_dir) / abs(g_dir),
    })
    return EXIT_OK


def cmd_risk(cfg: dict, out_override=None, margin=None) -> int:
    p = _masses(cfg)
    d = _delaunay_block(_need(_need(cfg, "initial_state"), "delaunay", "initial_state"))
    if not 0 < d["G"] <= d["Lambda"]:
        raise ConfigError("need 0 < G <= Lambda")
    if margin is None:
        margin = float(cfg.get("risk", {}).get("margin", DEFAULT_MARGIN))
    circular = math.isclose(d["G"], d["Lambda"], rel_tol=0, abs_tol=1e-15)
    el = DelaunayElements(
        Lambda=d["Lambda"], G=d["G"], ell=None if circular else d["ell"], g=None if circular else d["g"],
        Theta=d["Theta"], vartheta=None, rprime=d["rprime"],
        flags=frozenset({"circular"}) if circular else frozenset(),
    )
    report = risk_classify(el, p.m, margin)
    report["margin"] = margin
    out = _out_dir(cfg, out_override)
    (out / "risk.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_metadata(out, "risk", cfg, {})
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "portrait": cmd_portrait, "secular": cmd_secular, "risk": cmd_risk}


def _run_one(command, cfg, out, margin) -> int:
    try:
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        return COMMANDS[command](cfg, out, margin)
    except (ConfigError, DomainError, ValueError, TypeError, KeyError) as exc:
        log.error("%s: %s", command, exc)
        return EXIT_CONFIG


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EULER2C_THREADS", "1")))
    except ValueError:
        return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="euler2c", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON config file (object or list of objects)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--margin", type=float, help="risk margin in normalised G0 units")
    ap.add_argument("-v", "--verbose", action="store_true")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG

    if isinstance(cfg, list):
        if not cfg:
            log.error("empty config list")
            return EXIT_CONFIG
        base = Path(args.out) if args.out else None
        outs = []
        for i, c in enumerate(cfg):
            if base is not None:
                outs.append(base / f"run_{i:03d}")
            elif isinstance(c, dict) and "dir" in c.get("output", {}):
                outs.append(None)
            else:
                outs.append(Path(f"run_{i:03d}"))
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            codes = list(pool.map(lambda ic: _run_one(args.command, ic[1], outs[ic[0]], args.margin), enumerate(cfg)))
        if EXIT_CONFIG in codes:
            return EXIT_CONFIG
        return EXIT_COLLISION if EXIT_COLLISION in codes else EXIT_OK
    return _run_one(args.command, cfg, args.out, args.margin)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Verbs: simulate, match-check, stability, invariants, compare. Errors are
reported on one line prefixed with ``epmatch: error:`` and a nonzero exit.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import BACKEND
from .dynamics import SystemParams
from .integrate import IntegratorConfig
from .invariants import (
    default_grids,
    first_variation_solve,
    hessian_definiteness,
    stability_region,
)
from .matching import ShapingGains, matching_residuals
from .scenarios import (
    SCENARIOS,
    Scenario,
    Trajectory,
    compare_trajectories,
    equilibrium_deviation,
    free_fall_fit,
    simulate,
    simulate_implicit,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGEBRAIC_TOL = 1e-12
TRAJECTORY_TOL = 1e-9

CONFIG_KEYS = {
    "scenario", "mode", "out", "gains.rho", "stability.c",
    "integrator.dt", "integrator.t_end", "integrator.renormalize_gamma",
    "params.m", "params.M", "params.l", "params.g", "params.I1", "params.I2", "params.I3",
}


class CliError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message.replace("\n", " "))


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in tree.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


def load_config(path) -> dict:
    """Flat ``key = value`` document with dotted keys, e.g. ``params.m = 0.14``."""
    try:
        with open(path, "rb") as fh:
            cfg = _flatten(tomllib.load(fh))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from None
    unknown = sorted(set(cfg) - CONFIG_KEYS)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def build_run(args) -> tuple[Scenario, IntegratorConfig, dict]:
    """Merge config file and flags (flags win) into a scenario and integrator."""
    cfg = load_config(args.config) if args.config else {}
    name = args.scenario or cfg.get("scenario", "sp")
    if name not in SCENARIOS:
        raise CliError(f"unknown scenario {name!r}")
    mode = args.mode or cfg.get("mode", "full")
    sc = SCENARIOS[name](mode=mode)

    p = sc.params
    over = {}
    for key, attr in (("params.m", "m"), ("params.M", "M"), ("params.l", "l"), ("params.g", "grav")):
        if key in cfg:
            over[attr] = float(cfg[key])
    inertia = list(p.inertia)
    for i in range(3):
        if f"params.I{i + 1}" in cfg:
            inertia[i] = float(cfg[f"params.I{i + 1}"])
    if p.degenerate:
        if any(f"params.I{i}" in cfg for i in (1, 2, 3)):
            raise CliError("the spherical pendulum derives its inertia from m and l")
        if over:
            mm, ll = over.get("m", p.m), over.get("l", p.l)
            params = SystemParams.spherical_pendulum(mm, over.get("M", p.M), ll, over.get("grav", p.grav))
        else:
            params = p
    else:
        params = replace(p, inertia=tuple(inertia), **over)

    rho = args.rho if args.rho is not None else cfg.get("gains.rho")
    if rho is None:
        rho = _default_rho(name, params)
    sc = sc.with_(params=params, rho=float(rho))

    t_end = args.t_end if args.t_end is not None else cfg.get("integrator.t_end", sc.t_end)
    dt = args.dt if args.dt is not None else cfg.get("integrator.dt", 1e-3)
    integ = IntegratorConfig(float(dt), float(t_end), bool(cfg.get("integrator.renormalize_gamma", False)))
    extra = {
        "c": float(args.c if args.c is not None else cfg.get("stability.c", 1.0)),
        "out": Path(args.out or cfg.get("out", ".")),
    }
    return sc, integ, extra


def _default_rho(name: str, params: SystemParams) -> float:
    if name == "sp":
        return 0.9 * params.m
    return 0.9 * (params.m * params.l) ** 2 / params.inertia[0]


def _summary(traj: Trajectory, sc: Scenario) -> dict:
    dev = equilibrium_deviation(traj, sc.equilibrium, sc.params)
    accel, r2 = free_fall_fit(traj)
    return {
        "scenario": sc.name,
        "mode": sc.mode,
        "rho": sc.rho,
        "dt": traj.dt,
        "t_end": float(traj.t[-1]),
        "rows": int(len(traj.t)),
        "backend": BACKEND,
        "drift": {k: (v if np.isfinite(v) else None) for k, v in traj.drifts().items()},
        "max_deviation": float(dev.max()),
        "initial_deviation": float(dev[0]),
        "h_accel": float(accel),
        "h_fit_r2": r2,
        "free_fall": bool(accel < -0.5 * sc.params.grav and r2 > 0.999),
    }


def cmd_simulate(args) -> int:
    sc, integ, extra = build_run(args)
    traj = simulate(sc, integ)
    out = extra["out"]
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{sc.name}_{sc.mode}"
    traj.to_csv(out / f"{stem}.csv")
    summary = _summary(traj, sc)
    (out / f"{stem}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.plot:
        (out / f"{stem}.gp").write_text(gnuplot_script(f"{stem}.csv", f"{stem}.png"))
    print(json.dumps(summary, indent=2))
    return 0


def gnuplot_script(csv_name: str, png_name: str) -> str:
    """Three stacked panels (Omega, v, Gamma against t) read from the trajectory CSV."""
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 800,900",
        f"set output '{png_name}'",
        "set multiplot layout 3,1",
        "set xlabel 't'",
    ]
    for name, first in (("Omega", 2), ("v", 5), ("Gamma", 8)):
        curves = ", ".join(f"'{csv_name}' using 1:{first + i} skip 1 with lines title '{name}{i + 1}'"
                           for i in range(3))
        lines += [f"set title '{name}'", f"plot {curves}"]
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def match_report(sc: Scenario, integ: IntegratorConfig, gains: ShapingGains | None = None) -> dict:
    """Residuals of the matching conditions and matched-vs-implicit deviation.

    ``gains`` overrides the solved gains (used to inject corrupted values).
    """
    gains = gains or sc.gains
    res = matching_residuals(sc.params, gains)
    report = {"residuals": res, "kinetic_shaping": gains.kinetic_shaping}
    report["algebraic_ok"] = bool(max(res.values()) < ALGEBRAIC_TOL)
    if gains.kinetic_shaping:
        full = sc.with_(mode="full")
        dev, _ = compare_trajectories(simulate(full, integ), simulate_implicit(full, integ))
    else:
        dev = 0.0
    report["trajectory_deviation"] = float(dev)
    report["pass"] = bool(report["algebraic_ok"] and dev < TRAJECTORY_TOL)
    return report


def cmd_match_check(args) -> int:
    sc, integ, _ = build_run(args)
    rep = match_report(sc, integ)
    for key, val in rep["residuals"].items():
        print(f"{key:6s} {val:.3e}")
    if not rep["kinetic_shaping"]:
        print("note: rho equals m_bar, kinetic shaping vanishes (u_k = 0)")
    print(f"trajectory deviation {rep['trajectory_deviation']:.3e}")
    print("PASS" if rep["pass"] else "FAIL")
    return 0 if rep["pass"] else 1


def cmd_stability(args) -> int:
    sc, _, extra = build_run(args)
    params, gains, eq = sc.params, sc.gains, sc.equilibrium
    jet = first_variation_solve(eq, extra["c"], gains, params)
    res = hessian_definiteness(eq, jet, gains, params)
    np.set_printoptions(precision=6, linewidth=120)
    print(f"rho {sc.rho:.9g}  c {jet.c:.6g}")
    print(f"D_Phi {jet.D}  phi1 {jet.phi1:.6g}  gradient_norm {jet.gradient_norm:.3e}")
    print("hessian")
    print(res.hessian)
    print(f"minors {res.minors}")
    print("verdict", "STABLE" if res.positive_definite else "NOT-DEFINITE")

    rho_grid, c_grid = default_grids(params)
    row = stability_region(params, c_grid, [sc.rho], eq.omega3_0)
    n_def = sum(p.definite for p in row)
    if n_def == 0:
        print("c grid: NOT-DEFINITE for all c")
    else:
        print(f"c grid: definite for {n_def}/{len(row)} values of c")
    if args.grid:
        out = extra["out"]
        out.mkdir(parents=True, exist_ok=True)
        pts = stability_region(params, c_grid, rho_grid, eq.omega3_0)
        table = np.array([[p.rho, p.c, p.definite, p.predicted] for p in pts], dtype=float)
        path = out / f"{sc.name}_stability.csv"
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header="rho,c,definite,predicted", comments="")
        bad = sum(p.definite != p.predicted for p in pts)
        print(f"grid written to {path} ({bad} disagreements with the predicted interval)")
    return 0


def cmd_invariants(args) -> int:
    sc, integ, _ = build_run(args)
    traj = simulate(sc, integ)
    for name, val in traj.drifts().items():
        print(f"{name:10s} {val:.3e}")
    return 0


def cmd_compare(args) -> int:
    try:
        a, b = Trajectory.from_csv(args.a), Trajectory.from_csv(args.b)
    except OSError as exc:
        raise CliError(str(exc)) from None
    dev, per = compare_trajectories(a, b)
    for name, val in per.items():
        print(f"{name:6s} {val:.3e}")
    print(f"max    {dev:.3e}")
    return 0


def make_parser() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--scenario", choices=sorted(SCENARIOS))
    common.add_argument("--mode", choices=["none", "potential", "full"])
    common.add_argument("--dt", type=float)
    common.add_argument("--t-end", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--c", type=float)
    common.add_argument("--out")
    common.add_argument("--config")

    parser = Parser(prog="epmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=Parser)
    sim = sub.add_parser("simulate", parents=[common], help="run a scenario, write CSV and summary")
    sim.add_argument("--plot", action="store_true", help="also write a gnuplot script for the CSV")
    sim.set_defaults(fn=cmd_simulate)
    sub.add_parser("match-check", parents=[common], help="matching residuals and theorem check").set_defaults(fn=cmd_match_check)
    st = sub.add_parser("stability", parents=[common], help="energy-Casimir definiteness report")
    st.add_argument("--grid", action="store_true", help="also write the (rho, c) region CSV")
    st.set_defaults(fn=cmd_stability)
    sub.add_parser("invariants", parents=[common], help="invariant drift report").set_defaults(fn=cmd_invariants)
    cmp_ = sub.add_parser("compare", help="compare two trajectory CSVs")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.set_defaults(fn=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return args.fn(args)
    except (CliError, ValueError, FloatingPointError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"epmatch: error: {msg}", file=sys.stderr)
        return 2 if isinstance(exc, CliError) else 1


if __name__ == "__main__":
    sys.exit(main())

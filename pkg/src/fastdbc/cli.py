"""Command line interface: single runs, the verification battery and well
depth estimation.

Exit codes: 0 success / all checks pass, 1 solver failure, 2 configuration
error, 3 verification failure.

``run`` writes to the configured output directory:

* ``series.csv``  -- one row per output time with columns
  t, Y, phi1, phi2, J, linf_bulk, linf_boundary, mass_residual,
  energy_violation, newton_iters, step_residual.  Row k > 0 carries the
  statistics of the step ending at that time; the t = 0 row carries zeros.
* ``meta.txt``    -- config echo, well report, extinction report, membership
  flags per output time and ``CHECK <name> PASS|FAIL <measured>`` lines.
* ``final_state.txt`` -- snapshot of the last state, reusable via
  ``init.kind = file``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .config import (
    ConfigError,
    RunConfig,
    config_mesh,
    initial_state,
    load_config,
    problem_params,
    serialize_config,
    solver_options,
    write_state,
)
from .energy import estimate_best_constant, stable_set_check
from .grid import trace_residual
from .model import TOL_POS
from .stepper import NegativityViolation, NonConvergence, run
from .verify import run_battery


def _fmt(x):
    return format(float(x), ".17g")


def _output_rows(traj, params):
    """Row tuples for series.csv, one per trajectory index."""
    mass = diagnostics.mass_identity_residual(traj, params)
    J = np.array([r.J for r in traj.reports])
    diss = np.array([s.dissipation for s in traj.step_stats])
    energy_exc = J[1:] + diss - J[:-1] if len(traj) > 1 else np.zeros(0)
    rows = []
    for k in range(len(traj)):
        z = traj.states[k]
        rep = traj.reports[k]
        if k == 0:
            stat = (0.0, 0.0, 0, 0.0)
        else:
            st = traj.step_stats[k - 1]
            stat = (mass[k - 1], energy_exc[k - 1], st.newton_iters, st.residual)
        linf_bulk = float(np.max(np.abs(z.bulk), initial=0.0))
        linf_bdry = float(np.max(np.abs(z.boundary), initial=0.0)) if z.boundary.size else 0.0
        rows.append(
            (traj.times[k], rep.Y, rep.phi1, rep.phi2, rep.J, linf_bulk, linf_bdry) + stat
        )
    return rows


_CSV_HEADER = (
    "t,Y,phi1,phi2,J,linf_bulk,linf_boundary,"
    "mass_residual,energy_violation,newton_iters,step_residual"
)


def _selected_indices(n, every):
    idx = list(range(0, n, every))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


def write_series(path, traj, params, every=1):
    rows = _output_rows(traj, params)
    with open(path, "w") as fh:
        fh.write(_CSV_HEADER + "\n")
        for k in _selected_indices(len(rows), every):
            r = rows[k]
            fh.write(
                ",".join(
                    [_fmt(v) if i != 9 else str(int(v)) for i, v in enumerate(r)]
                )
                + "\n"
            )


def _well_for(cfg, mesh, params):
    if params.p_star == 0 or params.alpha * params.p_star <= 1.0:
        return None
    return estimate_best_constant(mesh, params, n_samples=8, seed=0)


def cmd_run(cfg: RunConfig, quiet=False):
    params = problem_params(cfg)
    mesh = config_mesh(cfg)
    init = initial_state(cfg, mesh)
    opts = solver_options(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    well = _well_for(cfg, mesh, params)
    try:
        traj = run(init, cfg.dt, cfg.t_end, mesh, params, opts, stop_eps_rel=cfg.eps_rel)
    except (NonConvergence, NegativityViolation) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 1

    write_series(out / "series.csv", traj, params, cfg.output_every)
    write_state(out / "final_state.txt", traj.final)

    ext = diagnostics.detect_extinction(traj, cfg.eps_rel)
    checks = []
    j0 = abs(traj.reports[0].J)
    excess = diagnostics.check_energy_monotonicity(traj, params)
    bound = max(1e-8, 10 * cfg.tol) * (1.0 + j0)
    checks.append(("energy_inequality", excess <= bound, excess))
    lo = min(float(np.min(z.bulk, initial=0.0)) for z in traj.states)
    checks.append(("nonnegativity", lo >= -TOL_POS, lo))
    tr = max(trace_residual(mesh, z) for z in traj.states)
    checks.append(("trace_consistency", tr == 0.0, tr))
    L = params.lipschitz_bound()
    if L is not None and L > 0:
        ok, margin = diagnostics.check_linf_bound(traj, params, L)
        checks.append(("linf_recursion", ok, margin))
    if traj.cutoff_violation_time is not None:
        checks.append(("cutoff_window", False, traj.cutoff_violation_time))
    elif params.mode.__class__.__name__ == "CutoffPower":
        checks.append(("cutoff_window", True, 0.0))

    member_lines = []
    invariance = None
    if well is not None:
        flags = [stable_set_check(traj.states[k], well, mesh, params) for k in range(len(traj))]
        if flags[0].member:
            try:
                invariance = diagnostics.check_invariance(traj, well, mesh, params)
                checks.append(
                    (
                        "invariance",
                        invariance.first_violation_time is None,
                        invariance.first_violation_time or 0.0,
                    )
                )
            except diagnostics.NotInitiallyMember:
                pass
        for k in _selected_indices(len(traj), cfg.output_every):
            f = flags[k]
            member_lines.append(
                f"member t={_fmt(traj.times[k])} member={int(f.member)} "
                f"nonneg={int(f.nonneg)} below_depth={int(f.below_depth)} "
                f"nehari={int(f.nehari_strict)} is_zero={int(f.is_zero)} "
                f"margin={_fmt(f.margin) if np.isfinite(f.margin) else 'nan'}"
            )

    mass = diagnostics.mass_identity_residual(traj, params)
    max_mass = float(np.max(np.abs(mass))) if mass.size else 0.0

    with open(out / "meta.txt", "w") as fh:
        fh.write("[config]\n")
        for line in serialize_config(cfg).splitlines():
            fh.write(f"  {line}\n")
        fh.write("[well]\n")
        if well is None:
            fh.write("  not applicable (no forcing exponent active)\n")
        else:
            fh.write(
                f"  C_est={_fmt(well.C_est)} d_est={_fmt(well.d_est)} "
                f"samples={well.samples} seed={well.seed}\n"
            )
            fh.write(f"  min_scaled_J={_fmt(well.min_scaled_J)}\n")
        fh.write("[extinction]\n")
        fh.write(f"  t_ext={'none' if ext.t_ext_num is None else _fmt(ext.t_ext_num)}\n")
        fh.write(
            "  exponent="
            + ("none" if ext.fitted_exponent is None else _fmt(ext.fitted_exponent))
            + "\n"
        )
        if ext.fitted_exponent is not None:
            fh.write(
                f"  window=({_fmt(ext.fit_window[0])}, {_fmt(ext.fit_window[1])}) "
                f"r2={_fmt(ext.fit_r2)}\n"
            )
        fh.write(f"  stopped_early={int(traj.stopped_early)}\n")
        fh.write("[membership]\n")
        for line in member_lines:
            fh.write(f"  {line}\n")
        fh.write("[info]\n")
        fh.write(f"  max_mass_identity_residual={_fmt(max_mass)}\n")
        fh.write(f"  steps={len(traj) - 1}\n")
        fh.write("[checks]\n")
        for name, ok, measured in checks:
            fh.write(f"CHECK {name} {'PASS' if ok else 'FAIL'} {_fmt(measured)}\n")

    if not quiet:
        t_ext = "none" if ext.t_ext_num is None else f"{ext.t_ext_num:.6g}"
        print(f"run finished: {len(traj) - 1} steps, t_ext={t_ext}, output in {out}")
    return 0


def cmd_verify(cfg: RunConfig):
    checks = run_battery(cfg)
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"CHECK {c.name:<{width}} {status} {c.measured:.6e}  ({c.detail})")
    return 0 if all(c.passed for c in checks) else 3


def cmd_depth(cfg: RunConfig, n_samples, seed):
    params = problem_params(cfg)
    mesh = config_mesh(cfg)
    if params.p_star == 0 or params.alpha * params.p_star <= 1.0:
        print("depth is undefined: no forcing exponent active (alpha p* <= 1)", file=sys.stderr)
        return 2
    well = estimate_best_constant(mesh, params, n_samples=n_samples, seed=seed)
    lines = [
        f"C_est = {_fmt(well.C_est)}",
        f"d_est = {_fmt(well.d_est)}",
        f"samples = {well.samples}",
        f"seed = {well.seed}",
        f"min_scaled_J = {_fmt(well.min_scaled_J)}",
    ]
    for line in lines:
        print(line)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "well.txt").write_text("\n".join(lines) + "\n")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fastdbc",
        description="Implicit solver for perturbed fast diffusion with dynamic boundary conditions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="simulate one configuration")
    p_run.add_argument("config", help="path to the config file")
    p_run.add_argument("--quiet", action="store_true")
    p_verify = sub.add_parser("verify", help="run the invariant battery")
    p_verify.add_argument("config", help="path to the config file")
    p_depth = sub.add_parser("depth", help="estimate the potential well depth")
    p_depth.add_argument("config", help="path to the config file")
    p_depth.add_argument("--samples", type=int, default=16)
    p_depth.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    try:
        if args.command == "run":
            return cmd_run(cfg, quiet=args.quiet)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_depth(cfg, args.samples, args.seed)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

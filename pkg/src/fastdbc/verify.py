"""Deterministic invariant battery behind the ``verify`` command.

Every check reports a measured violation and a pass/fail verdict.  Checks
that exercise the solver take the solver options from the supplied
configuration, so degraded tolerances surface as failures; geometry-level
and algebraic checks are canonical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import diagnostics, oracle
from .config import RunConfig, config_mesh, initial_state, problem_params, solver_options
from .energy import depth_from_constant, evaluate, nehari_scale, q_ratio
from .grid import Mesh, constant_pair, interval_mesh, pair_from_bulk, pair_norm
from .model import CutoffPower, ProblemParams, fundamental_inequality_margins, gamma
from .stepper import NonConvergence, SolverOptions, run, step


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    detail: str


def _smooth_random_bulk(mesh: Mesh, rng):
    if mesh.coords.ndim == 1:
        span = mesh.coords[-1] - mesh.coords[0]
        xi = [(mesh.coords - mesh.coords[0]) / (span if span > 0 else 1.0)]
    else:
        xi = [
            (mesh.coords[:, d] - mesh.coords[:, d].min())
            / max(mesh.coords[:, d].max() - mesh.coords[:, d].min(), 1e-300)
            for d in range(mesh.coords.shape[1])
        ]
    z = np.full(mesh.n_bulk, rng.uniform(0.05, 0.8))
    for k in range(1, 4):
        amp = rng.uniform(-1.0, 1.0) / k
        mode = np.ones(mesh.n_bulk)
        for c in xi:
            mode = mode * np.sin(k * np.pi * c)
        z += amp * mode
    return np.clip(z, 0.0, None)


def check_appendix_inequalities(n_samples=100_000, seed=0):
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, 10.0, n_samples)
    s = rng.uniform(0.0, 10.0, n_samples)
    alpha = rng.uniform(1.0, 10.0, n_samples)
    margins = fundamental_inequality_margins(r, s, alpha)
    from .model import _inequality_scales

    scales = _inequality_scales(r, s, alpha)
    worst = max(float(np.max(-m / sc)) for m, sc in zip(margins, scales))
    return CheckResult(
        "appendix_inequalities",
        worst <= 1e-12,
        worst,
        f"worst normalized violation over {n_samples} samples",
    )


def check_nehari_depth_identity(mesh: Mesh, params: ProblemParams, n_fields=1000, seed=1):
    if params.p_star == 0:
        params = replace(params, lam=0, mu=1)
    s = params.alpha * params.p_star
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fields):
        bulk = _smooth_random_bulk(mesh, rng)
        z = pair_from_bulk(mesh, bulk)
        rep = evaluate(z, mesh, params)
        if rep.phi1 <= 0 or rep.phi2 <= 0:
            continue
        t_star = nehari_scale(z, mesh, params)
        scaled = evaluate(pair_from_bulk(mesh, t_star * bulk), mesh, params)
        d = depth_from_constant(q_ratio(z, mesh, params), s)
        worst = max(worst, abs(scaled.J - d) / (abs(d) + 1e-300))
    return CheckResult(
        "nehari_depth_identity", worst <= 1e-10, worst, f"max relative gap over {n_fields} fields"
    )


def check_step_uniqueness(mesh: Mesh, params: ProblemParams, opts: SolverOptions, n_steps=30, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_steps):
        prev = pair_from_bulk(mesh, _smooth_random_bulk(mesh, rng))
        h = float(rng.choice([1e-3, 1e-2]))
        sols = [
            step(prev, h, mesh, params, opts, newton_guess=g).state.bulk
            for g in (None, np.zeros(mesh.n_bulk), 2.0 * prev.bulk)
        ]
        for other in sols[1:]:
            worst = max(worst, float(np.max(np.abs(other - sols[0]))))
    bound = 10 * opts.tol
    return CheckResult(
        "step_uniqueness", worst <= bound, worst, f"max state spread, bound {bound:.1e}"
    )


def check_energy_inequality(cfg: RunConfig):
    params = problem_params(cfg)
    mesh = config_mesh(cfg)
    init = initial_state(cfg, mesh)
    opts = solver_options(cfg)
    try:
        traj = run(init, cfg.dt, cfg.t_end, mesh, params, opts, stop_eps_rel=cfg.eps_rel)
    except NonConvergence as err:
        return CheckResult("energy_inequality", False, float("inf"), f"solver failed: {err}")
    excess = diagnostics.check_energy_monotonicity(traj, params)
    j0 = abs(traj.reports[0].J)
    bound = max(1e-8, 10 * cfg.tol) * (1.0 + j0)
    return CheckResult(
        "energy_inequality", excess <= bound, excess, f"max per-step excess, bound {bound:.2e}"
    )


def check_linf_recursion(cfg: RunConfig):
    base = problem_params(cfg)
    lam, mu = base.lam, base.mu
    if (lam, mu) == (0, 0):
        lam, mu = 0, 1
    mesh = config_mesh(cfg)
    init = initial_state(cfg, mesh)
    M = max(1.0, 2.0 * init.sup_norm)
    params = ProblemParams(
        m=base.m, p=base.p, q=base.q, a=base.a, b=base.b, lam=lam, mu=mu, mode=CutoffPower(M)
    )
    opts = solver_options(cfg)
    t_end = min(cfg.t_end, 0.3)
    try:
        traj = run(init, cfg.dt, t_end, mesh, params, opts, stop_eps_rel=cfg.eps_rel)
    except NonConvergence as err:
        return CheckResult("linf_recursion", False, float("inf"), f"solver failed: {err}")
    ok, margin = diagnostics.check_linf_bound(traj, params, params.lipschitz_bound())
    return CheckResult("linf_recursion", ok, margin, "min relative margin to the bound")


def check_oracle_extinction(cfg: RunConfig):
    mesh = interval_mesh(1.0, 16)
    params = ProblemParams(m=0.5, a=1, b=1, lam=0, mu=0)
    opts = solver_options(cfg)
    init = constant_pair(mesh, 1.0)
    try:
        traj = run(init, 1e-3, 3.0, mesh, params, opts)
    except NonConvergence as err:
        return CheckResult("oracle_extinction", False, float("inf"), f"solver failed: {err}")
    rep = diagnostics.detect_extinction(traj, 1e-14)
    if rep.t_ext_num is None:
        return CheckResult("oracle_extinction", False, float("inf"), "no extinction detected")
    t_err = abs(rep.t_ext_num - 2.0)
    u_exact = oracle.ode_extinction(1.0, 0.5, traj.times)
    node_err = max(
        float(np.max(np.abs(gamma(z.bulk, 2.0) - u_exact[k])))
        for k, z in enumerate(traj.states)
    )
    measured = max(t_err, node_err)
    ok = t_err <= 0.04 and node_err <= 2e-3
    return CheckResult(
        "oracle_extinction", ok, measured, f"t_err={t_err:.2e} node_err={node_err:.2e}"
    )


def check_oracle_linear(cfg: RunConfig):
    mesh = interval_mesh(1.0, 16)
    params = ProblemParams(m=1.0, a=1, b=0, lam=0, mu=0)
    opts = solver_options(cfg)
    bulk = np.sin(np.pi * mesh.coords) + 0.2
    init = pair_from_bulk(mesh, bulk)
    try:
        traj = run(init, 1e-4, 0.1, mesh, params, opts, stop_eps_rel=None)
    except NonConvergence as err:
        return CheckResult("oracle_linear", False, float("inf"), f"solver failed: {err}")
    ref = oracle.linear_reference(mesh, params, init, 0.1)
    diff = traj.final.copy()
    diff.bulk = traj.final.bulk - ref.bulk
    diff.boundary = traj.final.boundary - ref.boundary
    rel = pair_norm(mesh, diff) / pair_norm(mesh, ref)
    return CheckResult("oracle_linear", rel <= 1e-3, rel, "relative weighted-L2 error at t=0.1")


def check_comparison_contraction(cfg: RunConfig):
    base = problem_params(cfg)
    params = ProblemParams(m=base.m, p=base.p, q=base.q, a=base.a, b=base.b, lam=0, mu=0)
    mesh = config_mesh(cfg)
    opts = solver_options(cfg)
    lo = initial_state(cfg, mesh)
    hi = lo.copy()
    hi.bulk = hi.bulk + 0.1
    hi.boundary = hi.bulk[mesh.trace_map].copy()
    t_end = min(cfg.t_end, 0.2)
    try:
        ta = run(lo, cfg.dt, t_end, mesh, params, opts, stop_eps_rel=None)
        tb = run(hi, cfg.dt, t_end, mesh, params, opts, stop_eps_rel=None)
    except NonConvergence as err:
        return CheckResult("comparison_contraction", False, float("inf"), f"solver failed: {err}")
    rep = diagnostics.compare_runs(ta, tb, mesh, params)
    worst = float(np.max(rep.series))
    return CheckResult(
        "comparison_contraction", worst <= 1e-12, worst, "max ordered-part mass (should stay 0)"
    )


def run_battery(cfg: RunConfig):
    params = problem_params(cfg)
    mesh = config_mesh(cfg)
    opts = solver_options(cfg)
    checks = [
        check_appendix_inequalities(),
        check_nehari_depth_identity(mesh, params),
        check_step_uniqueness(mesh, params, opts),
        check_energy_inequality(cfg),
        check_linf_recursion(cfg),
        check_oracle_extinction(cfg),
        check_oracle_linear(cfg),
        check_comparison_contraction(cfg),
    ]
    return checks

"""Post-processing of trajectories into testable statements.

All checks are pure functions of the trajectory (which carries its mesh and
parameters), so rerunning them yields identical reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import WellReport, stable_set_check
from .grid import Mesh
from .model import ProblemParams, gamma
from .stepper import Trajectory


class NotInitiallyMember(ValueError):
    """Invariance scan requested for data outside the stable set."""


@dataclass(frozen=True)
class ExtinctionReport:
    t_ext_num: float | None
    fitted_exponent: float | None
    fit_window: tuple
    fit_r2: float


@dataclass(frozen=True)
class InvarianceReport:
    first_violation_time: float | None
    margins: np.ndarray
    members: np.ndarray


@dataclass(frozen=True)
class ComparisonReport:
    times: np.ndarray
    series: np.ndarray
    bound_ok: bool | None


def check_energy_monotonicity(traj: Trajectory, params: ProblemParams):
    """Max over steps of J(next) + dissipation - J(prev); <= 0 means the
    dissipation-augmented energy inequality holds up to solver slack."""
    if len(traj) < 2:
        return 0.0
    J = np.array([r.J for r in traj.reports])
    diss = np.array([s.dissipation for s in traj.step_stats])
    return float(np.max(J[1:] + diss - J[:-1]))


def mass_identity_residual(traj: Trajectory, params: ProblemParams):
    """Per-step residual of the decay identity dY/dt + 2 phi1 = (alpha p*+1) phi2.

    The identity is exact for the continuous flow, so the discrete residual
    is O(h) per unit time.
    """
    if len(traj) < 2:
        return np.zeros(0)
    Y = np.array([r.Y for r in traj.reports])
    phi1 = np.array([r.phi1 for r in traj.reports])
    phi2 = np.array([r.phi2 for r in traj.reports])
    s = params.alpha * params.p_star
    return (Y[1:] - Y[:-1]) / traj.h + 2.0 * phi1[1:] - (s + 1.0) * phi2[1:]


def detect_extinction(traj: Trajectory, eps_rel=1e-14):
    """First time Y falls to eps_rel of its initial value, plus a decay fit.

    The exponent is the least-squares slope of log Y against
    log(t_ext - t) over the window Y in [1e3 eps_rel, 1e-2] relative to Y0;
    it is reported only when the window holds at least 10 samples.
    """
    if not 0.0 < eps_rel < 1.0:
        raise ValueError("eps_rel must lie in (0, 1)")
    Y = np.array([r.Y for r in traj.reports])
    t = traj.times
    y0 = Y[0]
    if y0 <= 0.0:
        return ExtinctionReport(0.0, None, (float("nan"), float("nan")), float("nan"))
    below = np.nonzero(Y <= eps_rel * y0)[0]
    if below.size == 0:
        return ExtinctionReport(None, None, (float("nan"), float("nan")), float("nan"))
    t_ext = float(t[below[0]])
    lo, hi = 1e3 * eps_rel * y0, 1e-2 * y0
    sel = (t < t_ext) & (Y >= lo) & (Y <= hi)
    if np.count_nonzero(sel) < 10:
        return ExtinctionReport(t_ext, None, (lo, hi), float("nan"))
    x = np.log(t_ext - t[sel])
    y = np.log(Y[sel])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExtinctionReport(t_ext, float(slope), (lo, hi), r2)


def check_linf_bound(traj: Trajectory, params: ProblemParams, L):
    """Sup-norm bound (1 + L h)^(k/alpha) (sup v0 + sup v_Gamma0) at every step.

    The discrete bound implies the continuous e^(L t / alpha) envelope.
    Returns (holds, min relative margin) with slack 1e-6.
    """
    if L is None:
        raise ValueError("the sup-norm recursion needs a finite Lipschitz constant")
    alpha = params.alpha
    init = traj.states[0]
    base = float(np.max(init.bulk, initial=0.0))
    if init.boundary.size:
        base += float(np.max(init.boundary, initial=0.0))
    sup = np.array([z.sup_norm for z in traj.states])
    k = np.arange(len(traj))
    bound = (1.0 + L * traj.h) ** (k / alpha) * base
    slack = 1e-6
    ok = bool(np.all(sup <= bound * (1.0 + slack) + 1e-300))
    denom = np.where(bound > 0, bound, 1.0)
    margin = float(np.min((bound * (1.0 + slack) - sup) / denom))
    return ok, margin


def holder_quotient(traj: Trajectory):
    """Max ratio of the paired L2 distance to |t - s|^(1/(alpha+1)).

    Pairs are sampled at dyadic index offsets to avoid the quadratic blowup;
    stability of the value under time refinement is the testable content.
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 states")
    mesh = traj.mesh
    alpha = traj.params.alpha
    bulk = np.stack([z.bulk for z in traj.states])
    wb = mesh.bulk_weights
    has_bdry = mesh.n_boundary > 0
    if has_bdry:
        bdry = np.stack([z.boundary for z in traj.states])
        wg = mesh.boundary_weights
    t = traj.times
    best = 0.0
    offset = 1
    n = len(traj)
    while offset < n:
        db = bulk[offset:] - bulk[:-offset]
        num = np.sqrt(db**2 @ wb)
        if has_bdry:
            dg = bdry[offset:] - bdry[:-offset]
            num = num + np.sqrt(dg**2 @ wg)
        dt = t[offset:] - t[:-offset]
        best = max(best, float(np.max(num / dt ** (1.0 / (alpha + 1.0)))))
        offset *= 2
    return best


def check_invariance(traj: Trajectory, well: WellReport, mesh: Mesh, params: ProblemParams):
    """Scan stable-set membership along the trajectory.

    Raises :class:`NotInitiallyMember` when the initial state fails the
    membership test.  The recorded margins 1 - (alpha p*+1) phi2 / (2 phi1)
    are the realized strictness of the scaling inequality (NaN once
    phi1 = 0).
    """
    checks = [stable_set_check(z, well, mesh, params) for z in traj.states]
    if not checks[0].member:
        raise NotInitiallyMember("initial state is not a member of the stable set")
    members = np.array([c.member for c in checks])
    margins = np.array([c.margin for c in checks])
    first_violation = None
    bad = np.nonzero(~members)[0]
    if bad.size:
        first_violation = float(traj.times[bad[0]])
    return InvarianceReport(first_violation, margins, members)


def compare_runs(trajA: Trajectory, trajB: Trajectory, mesh: Mesh, params: ProblemParams, atol=1e-12):
    """Ordered-part L1 series between two runs on the same grid.

    s_k sums the lumped positive parts of gamma(vA) - gamma(vB) over bulk and
    boundary.  When the forcing has a finite Lipschitz constant L the series
    is checked against s_0 e^(L t_k) (1 + 1e-6) + atol; with exact powers the
    bound is not available and ``bound_ok`` is None.
    """
    if len(trajA) != len(trajB) or not np.allclose(trajA.times, trajB.times, atol=1e-12):
        raise ValueError("trajectories do not share a time grid")
    alpha = params.alpha
    wb = mesh.bulk_weights
    wg = mesh.boundary_weights
    out = np.empty(len(trajA))
    for k, (za, zb) in enumerate(zip(trajA.states, trajB.states)):
        d = np.clip(gamma(za.bulk, alpha) - gamma(zb.bulk, alpha), 0.0, None)
        s = float(wb @ d)
        if wg.size:
            dg = np.clip(gamma(za.boundary, alpha) - gamma(zb.boundary, alpha), 0.0, None)
            s += float(wg @ dg)
        out[k] = s
    L = params.lipschitz_bound()
    bound_ok = None
    if L is not None:
        bound = out[0] * np.exp(L * trajA.times) * (1.0 + 1e-6) + atol
        bound_ok = bool(np.all(out <= bound))
    return ComparisonReport(times=trajA.times.copy(), series=out, bound_ok=bound_ok)

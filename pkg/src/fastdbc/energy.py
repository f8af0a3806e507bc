"""Energy functionals, the potential well and stable-set membership.

The decay functional Y, the quadratic part phi1, the forcing potential phi2
and J = phi1 - phi2 drive all qualitative diagnostics.  The well depth d is
tied to the best constant C of the embedding-type bound
phi2 <= C phi1^((alpha p* + 1)/2) through a closed formula, and C is
estimated by maximizing the scale-invariant ratio
Q(z) = phi2(z) / phi1(z)^((alpha p* + 1)/2) over nonnegative fields.

Sampled maximization under-estimates C, hence over-estimates d, so the
membership test "J < d_est" is optimistic; callers that rely on it should
keep a wide margin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .grid import FieldPair, Mesh, coupled_operator, pair_from_bulk, phi1_form, trace_matrix
from .model import TOL_POS, ProblemParams


class DegenerateState(ValueError):
    """Raised when a scaling or ratio is requested for a field with
    vanishing phi1 or phi2."""


@dataclass(frozen=True)
class EnergyReport:
    Y: float
    phi1: float
    phi2: float
    J: float


@dataclass(frozen=True)
class Membership:
    nonneg: bool
    below_depth: bool
    nehari_strict: bool
    is_zero: bool
    margin: float

    @property
    def member(self):
        return self.is_zero or (self.nonneg and self.below_depth and self.nehari_strict)


@dataclass(frozen=True)
class WellReport:
    C_est: float
    d_est: float
    samples: int
    seed: int
    sample_q: tuple
    min_scaled_J: float


def evaluate(z: FieldPair, mesh: Mesh, params: ProblemParams):
    """EnergyReport of one state; all terms use the lumped measures."""
    if z.bulk.shape != (mesh.n_bulk,) or z.boundary.shape != (mesh.n_boundary,):
        raise ValueError("field dimensions do not match the mesh")
    alpha = params.alpha
    ap1 = alpha + 1.0
    Y = alpha / ap1 * float(mesh.bulk_weights @ np.abs(z.bulk) ** ap1)
    if z.boundary.size:
        Y += alpha / ap1 * float(mesh.boundary_weights @ np.abs(z.boundary) ** ap1)
    phi1 = phi1_form(mesh, z, params)
    phi2 = 0.0
    if params.p_star > 0:
        denom = alpha * params.p_star + 1.0
        if params.lam:
            phi2 += float(mesh.bulk_weights @ np.abs(z.bulk) ** (alpha * params.p + 1.0)) / denom
        if params.mu and z.boundary.size:
            phi2 += (
                float(mesh.boundary_weights @ np.abs(z.boundary) ** (alpha * params.q + 1.0))
                / denom
            )
    return EnergyReport(Y=Y, phi1=phi1, phi2=phi2, J=phi1 - phi2)


def nehari_scale(z: FieldPair, mesh: Mesh, params: ProblemParams):
    """Unique t > 0 placing t*z on the manifold 2 phi1 = (alpha p* + 1) phi2."""
    rep = evaluate(z, mesh, params)
    if rep.phi2 <= 0.0 or rep.phi1 <= 0.0:
        raise DegenerateState("nehari scaling needs phi1 > 0 and phi2 > 0")
    s = params.alpha * params.p_star
    return (2.0 * rep.phi1 / ((s + 1.0) * rep.phi2)) ** (1.0 / (s - 1.0))


def depth_from_constant(C, alpha_pstar):
    """Well depth from the best embedding constant.

    d = (s-1)/2 * (2/(s+1))^((s+1)/(s-1)) * C^(-2/(s-1)) with s = alpha p*.
    """
    if C <= 0.0:
        raise ValueError("best constant must be positive")
    s = alpha_pstar
    if s <= 1.0:
        raise ValueError("alpha p* must exceed 1")
    return (s - 1.0) / 2.0 * (2.0 / (s + 1.0)) ** ((s + 1.0) / (s - 1.0)) * C ** (-2.0 / (s - 1.0))


def q_ratio(z: FieldPair, mesh: Mesh, params: ProblemParams):
    """Scale-invariant ratio phi2 / phi1^((alpha p* + 1)/2)."""
    rep = evaluate(z, mesh, params)
    if rep.phi1 <= 0.0:
        raise DegenerateState("q_ratio needs phi1 > 0")
    return rep.phi2 / rep.phi1 ** ((params.alpha * params.p_star + 1.0) / 2.0)


def _seed_field(mesh: Mesh, rng):
    """Smooth nonnegative seed with nonvanishing trace.

    A constant floor plus a few sine half-wave products, clipped at zero; the
    floor keeps boundary-driven ratios away from the stationary zero-trace
    set.
    """
    if mesh.coords.ndim == 1:
        span = mesh.coords[-1] - mesh.coords[0] if mesh.coords[-1] > mesh.coords[0] else 1.0
        xi = [(mesh.coords - mesh.coords[0]) / span]
    else:
        xi = []
        for d in range(mesh.coords.shape[1]):
            c = mesh.coords[:, d]
            span = c.max() - c.min() if c.max() > c.min() else 1.0
            xi.append((c - c.min()) / span)
    z = np.full(mesh.n_bulk, rng.uniform(0.1, 1.0))
    for k in range(1, 4):
        amp = rng.uniform(-1.0, 1.0) / k
        modes = np.ones(mesh.n_bulk)
        for c in xi:
            modes = modes * np.sin(k * np.pi * c)
        z += amp * modes
    z = np.clip(z, 0.0, None)
    if not np.any(z > 0):
        z = np.ones(mesh.n_bulk)
    return z


def estimate_best_constant(
    mesh: Mesh,
    params: ProblemParams,
    n_samples=8,
    seed=0,
    max_iter=500,
    step0=0.1,
    rel_tol=1e-8,
):
    """Estimate the best constant by projected gradient ascent on Q.

    Each sample starts from a random nonnegative field, is renormalized to
    phi1 = 1 after every step (Q is scale invariant, so this loses nothing),
    and climbs Q with a backtracking step until the relative improvement
    drops below ``rel_tol``.  Deterministic given ``seed``; per-sample seeds
    are derived as (seed, index) so results are prefix-stable in n_samples.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    s = params.alpha * params.p_star
    if s <= 1.0:
        raise ValueError("best-constant estimation needs alpha p* > 1")
    shalf = (s + 1.0) / 2.0
    A = coupled_operator(mesh, params)
    solve_A = splu(sparse.csc_matrix(A))
    P = trace_matrix(mesh)
    wb = mesh.bulk_weights
    wg = mesh.boundary_weights
    ap = params.alpha * params.p
    aq = params.alpha * params.q

    def normalize(z):
        val = 0.5 * float(z @ (A @ z))
        if val <= 0.0:
            return None
        return z / np.sqrt(val)

    def phi2_exact(z):
        out = 0.0
        denom = s + 1.0
        if params.lam:
            out += params.lam * float(wb @ z ** (ap + 1.0)) / denom
        if params.mu and wg.size:
            out += params.mu * float(wg @ z[mesh.trace_map] ** (aq + 1.0)) / denom
        return out

    def grad_phi2(z):
        g = np.zeros(mesh.n_bulk)
        denom = s + 1.0
        if params.lam:
            g += params.lam * (ap + 1.0) / denom * wb * z**ap
        if params.mu and wg.size:
            g += params.mu * (aq + 1.0) / denom * (P.T @ (wg * z[mesh.trace_map] ** aq))
        return g

    sample_q = []
    best_fields = []
    for i in range(n_samples):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        z = normalize(_seed_field(mesh, rng))
        if z is None:
            sample_q.append(0.0)
            best_fields.append(None)
            continue
        q = phi2_exact(z)  # on the phi1 = 1 sphere, Q equals phi2
        for _ in range(max_iter):
            # ascend along the gradient in the phi1 inner product; the
            # preconditioning by A keeps the climb rate mesh-independent
            g = solve_A.solve(grad_phi2(z)) - shalf * phi2_exact(z) * z
            eta = step0
            improved = False
            while eta > 1e-14:
                zt = normalize(np.clip(z + eta * g, 0.0, None))
                if zt is not None:
                    qt = phi2_exact(zt)
                    if qt > q:
                        z, q_new = zt, qt
                        improved = True
                        break
                eta *= 0.5
            if not improved:
                break
            if q_new <= q * (1.0 + rel_tol):
                q = q_new
                break
            q = q_new
        sample_q.append(q)
        best_fields.append(z)

    sample_q = np.asarray(sample_q)
    C_est = float(np.max(sample_q))
    if C_est <= 0.0:
        raise DegenerateState("all samples degenerated; cannot estimate the constant")
    d_est = depth_from_constant(C_est, s)
    scaled = [
        _scaled_J(mesh, params, z) for z, q in zip(best_fields, sample_q) if z is not None and q > 0
    ]
    min_scaled = float(np.min(scaled)) if scaled else float("nan")
    return WellReport(
        C_est=C_est,
        d_est=d_est,
        samples=n_samples,
        seed=seed,
        sample_q=tuple(float(v) for v in sample_q),
        min_scaled_J=min_scaled,
    )


def _scaled_J(mesh, params, bulk):
    z = pair_from_bulk(mesh, bulk)
    t = nehari_scale(z, mesh, params)
    rep = evaluate(pair_from_bulk(mesh, t * bulk), mesh, params)
    return rep.J


def stable_set_check(z: FieldPair, well: WellReport, mesh: Mesh, params: ProblemParams):
    """Membership flags for the stable set.

    Member iff the state is identically zero, or it is nonnegative with
    J < d_est and the strict scaling inequality 2 phi1 > (alpha p* + 1) phi2.
    The margin is 1 - (alpha p* + 1) phi2 / (2 phi1), NaN when phi1 = 0.
    """
    rep = evaluate(z, mesh, params)
    lo = min(
        float(np.min(z.bulk, initial=np.inf)),
        float(np.min(z.boundary, initial=np.inf)),
    )
    nonneg = lo >= -TOL_POS
    is_zero = z.sup_norm <= 1e-30
    s = params.alpha * params.p_star
    if rep.phi1 > 0.0:
        margin = 1.0 - (s + 1.0) * rep.phi2 / (2.0 * rep.phi1)
    else:
        margin = float("nan")
    nehari_strict = 2.0 * rep.phi1 > (s + 1.0) * rep.phi2
    return Membership(
        nonneg=nonneg,
        below_depth=rep.J < well.d_est,
        nehari_strict=nehari_strict,
        is_zero=is_zero,
        margin=margin,
    )

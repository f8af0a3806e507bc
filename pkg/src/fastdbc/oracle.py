"""Independent references used to validate the implicit solver.

None of these share code with the Newton path: the scalar per-step equation
is solved by bisection, the constant-in-space decay has a closed form, and
the linear (m = 1) problem is integrated exactly through a dense
eigendecomposition in the lumped inner product.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .grid import FieldPair, Mesh, coupled_operator, pair_from_bulk, total_weights
from .model import ProblemParams


def ode_extinction(u0, m, t):
    """Exact solution of u' = -u^m, u(0) = u0 >= 0, for 0 < m < 1.

    u(t) = max(0, u0^(1-m) - (1-m) t)^(1/(1-m)); the solution hits zero at
    T = u0^(1-m) / (1-m) and stays there.  This is the spatially constant
    solution of the coupled system with (a, b) = (1, 1) and no forcing.
    """
    if u0 < 0:
        raise ValueError("u0 must be nonnegative")
    if not 0.0 < m < 1.0:
        raise ValueError("m must lie in (0, 1)")
    t = np.asarray(t, dtype=float)
    core = np.maximum(u0 ** (1.0 - m) - (1.0 - m) * t, 0.0)
    out = core ** (1.0 / (1.0 - m))
    return float(out) if out.ndim == 0 else out


def extinction_time(u0, m):
    """Time at which :func:`ode_extinction` reaches zero."""
    return u0 ** (1.0 - m) / (1.0 - m)


def scalar_step_oracle(u_prev, h, a_coef, alpha, tol=1e-14):
    """Unique v >= 0 with v^alpha + h a v = u_prev, found by bisection.

    Intentionally independent of the Newton machinery.
    """
    if u_prev < 0:
        raise ValueError("u_prev must be nonnegative")
    if h <= 0:
        raise ValueError("h must be positive")
    if u_prev == 0.0:
        return 0.0
    lo = 0.0
    hi = max(1.0, u_prev) ** (1.0 / alpha) + u_prev

    def f(v):
        return v**alpha + h * a_coef * v - u_prev

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            break
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def linear_reference(mesh: Mesh, params: ProblemParams, init: FieldPair, t):
    """Exact state at time t for the linear unforced problem (m = 1).

    Solves W dz/dt + A z = 0 through the generalized symmetric
    eigendecomposition A phi = lambda W phi, where W carries the bulk weights
    plus the surface weights at the trace nodes.  Restricted to small meshes
    because the decomposition is dense.
    """
    if params.m != 1.0:
        raise ValueError("linear reference requires m = 1")
    if params.lam != 0 or params.mu != 0:
        raise ValueError("linear reference requires lambda = mu = 0")
    if mesh.n_bulk > 200:
        raise ValueError("mesh too large for the dense reference (max 200 nodes)")
    if t < 0:
        raise ValueError("t must be nonnegative")
    A = coupled_operator(mesh, params).toarray()
    W = np.diag(total_weights(mesh))
    lam, phi = scipy.linalg.eigh(A, W)  # phi^T W phi = I
    c = phi.T @ (W @ init.bulk)
    z = phi @ (np.exp(-lam * t) * c)
    return pair_from_bulk(mesh, z, time=init.time + t)

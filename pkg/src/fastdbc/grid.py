"""Discrete geometries and the operators of the coupled bulk/boundary form.

A mesh carries lumped (diagonal) mass weights for the volume and surface
measures, symmetric positive-semidefinite stiffness operators realizing the
Dirichlet energies of the bulk Laplacian and of the surface Laplacian, and a
trace map injecting boundary node indices into bulk node indices.  Lumping
keeps every nonlinearity nodewise-decoupled, so the per-step Newton Jacobian
is diagonal-plus-stiffness.

Geometries:

* ``interval``  -- [0, L] with trapezoid weights; the boundary is the two
  endpoints carrying counting measure (weight 1 each) and no surface
  diffusion.
* ``rectangle`` -- tensor grid on [0, Lx] x [0, Ly]; the boundary is the
  closed perimeter loop with a periodic 1-d arclength Laplacian.  Corner
  nodes are ordinary loop nodes, a deliberate desk-scale approximation of a
  smooth boundary.
* ``ball``      -- radially symmetric fields on a ball of radius R; nodes on
  [0, R] carry shell volumes of the 4 pi r^2 measure and the stiffness is the
  symmetric three-point flux form.  The boundary is the single node at r = R
  with weight 4 pi R^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .model import ProblemParams


@dataclass(frozen=True, eq=False)
class Mesh:
    kind: str
    coords: np.ndarray
    bulk_weights: np.ndarray
    boundary_weights: np.ndarray
    stiffness_bulk: sparse.csr_matrix
    stiffness_boundary: sparse.csr_matrix
    trace_map: np.ndarray
    volume: float
    surface: float

    @property
    def n_bulk(self):
        return self.bulk_weights.size

    @property
    def n_boundary(self):
        return self.boundary_weights.size

    def trace(self, bulk_values):
        """Restrict a bulk nodal vector to the boundary nodes."""
        return np.asarray(bulk_values)[self.trace_map]


@dataclass
class FieldPair:
    """Bulk and boundary nodal values of one state at a given time."""

    bulk: np.ndarray
    boundary: np.ndarray
    time: float = 0.0

    def copy(self):
        return FieldPair(self.bulk.copy(), self.boundary.copy(), self.time)

    @property
    def sup_norm(self):
        m = float(np.max(np.abs(self.bulk), initial=0.0))
        if self.boundary.size:
            m = max(m, float(np.max(np.abs(self.boundary))))
        return m


def pair_from_bulk(mesh: Mesh, bulk, time=0.0):
    """Trace-consistent pair built from bulk nodal values."""
    bulk = np.asarray(bulk, dtype=float)
    if bulk.shape != (mesh.n_bulk,):
        raise ValueError(f"expected {mesh.n_bulk} bulk values, got shape {bulk.shape}")
    return FieldPair(bulk.copy(), bulk[mesh.trace_map].copy(), float(time))


def constant_pair(mesh: Mesh, value, time=0.0):
    return pair_from_bulk(mesh, np.full(mesh.n_bulk, float(value)), time)


def trace_residual(mesh: Mesh, z: FieldPair):
    """max_j |boundary[j] - bulk[trace_map(j)]|; 0 for solver-produced states."""
    if z.boundary.size == 0:
        return 0.0
    return float(np.max(np.abs(z.boundary - z.bulk[mesh.trace_map])))


def _graph_stiffness(n, i_idx, j_idx, conductance):
    """Assemble sum_e c_e (z_i - z_j)^2 as a sparse symmetric operator."""
    rows = np.concatenate([i_idx, j_idx, i_idx, j_idx])
    cols = np.concatenate([i_idx, j_idx, j_idx, i_idx])
    vals = np.concatenate([conductance, conductance, -conductance, -conductance])
    return sparse.csr_matrix(sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)))


def interval_mesh(length, n):
    if n < 2:
        raise ValueError("interval mesh needs n >= 2 nodes")
    if length <= 0:
        raise ValueError("length must be positive")
    x = np.linspace(0.0, length, n)
    dx = length / (n - 1)
    w = np.full(n, dx)
    w[0] = w[-1] = dx / 2
    i = np.arange(n - 1)
    K = _graph_stiffness(n, i, i + 1, np.full(n - 1, 1.0 / dx))
    trace = np.array([0, n - 1])
    Kb = sparse.csr_matrix((2, 2))
    return Mesh(
        kind="interval",
        coords=x,
        bulk_weights=w,
        boundary_weights=np.ones(2),
        stiffness_bulk=K,
        stiffness_boundary=Kb,
        trace_map=trace,
        volume=float(length),
        surface=2.0,
    )


def rectangle_mesh(length_x, length_y, nx, ny):
    if nx < 2 or ny < 2:
        raise ValueError("rectangle mesh needs nx, ny >= 2")
    if length_x <= 0 or length_y <= 0:
        raise ValueError("side lengths must be positive")
    dx = length_x / (nx - 1)
    dy = length_y / (ny - 1)
    xs = np.linspace(0.0, length_x, nx)
    ys = np.linspace(0.0, length_y, ny)
    X, Y = np.meshgrid(xs, ys, indexing="xy")  # index = j*nx + i
    coords = np.column_stack([X.ravel(), Y.ravel()])
    wx = np.full(nx, dx)
    wx[0] = wx[-1] = dx / 2
    wy = np.full(ny, dy)
    wy[0] = wy[-1] = dy / 2
    w = (wy[:, None] * wx[None, :]).ravel()

    def node(i, j):
        return j * nx + i

    # horizontal edges weighted by the transverse mass, vertical likewise
    ii, jj, cc = [], [], []
    for j in range(ny):
        for i in range(nx - 1):
            ii.append(node(i, j))
            jj.append(node(i + 1, j))
            cc.append(wy[j] / dx)
    for j in range(ny - 1):
        for i in range(nx):
            ii.append(node(i, j))
            jj.append(node(i, j + 1))
            cc.append(wx[i] / dy)
    K = _graph_stiffness(nx * ny, np.array(ii), np.array(jj), np.array(cc))

    # perimeter loop, counterclockwise from the origin
    loop = []
    for i in range(nx - 1):
        loop.append(node(i, 0))
    for j in range(ny - 1):
        loop.append(node(nx - 1, j))
    for i in range(nx - 1, 0, -1):
        loop.append(node(i, ny - 1))
    for j in range(ny - 1, 0, -1):
        loop.append(node(0, j))
    trace = np.array(loop)
    nb = trace.size
    edge_len = np.empty(nb)
    pts = coords[trace]
    nxt = np.roll(np.arange(nb), -1)
    edge_len = np.linalg.norm(pts[nxt] - pts, axis=1)
    wb = (edge_len + np.roll(edge_len, 1)) / 2
    Kb = _graph_stiffness(nb, np.arange(nb), nxt, 1.0 / edge_len)
    return Mesh(
        kind="rectangle",
        coords=coords,
        bulk_weights=w,
        boundary_weights=wb,
        stiffness_bulk=K,
        stiffness_boundary=Kb,
        trace_map=trace,
        volume=float(length_x * length_y),
        surface=float(2 * (length_x + length_y)),
    )


def ball_mesh(radius, n):
    if n < 2:
        raise ValueError("ball mesh needs n >= 2 radial nodes")
    if radius <= 0:
        raise ValueError("radius must be positive")
    r = np.linspace(0.0, radius, n)
    dr = radius / (n - 1)
    r_half = np.concatenate(([0.0], (r[:-1] + r[1:]) / 2, [radius]))
    # shell volumes telescope to the exact ball volume
    w = 4.0 * np.pi / 3.0 * (r_half[1:] ** 3 - r_half[:-1] ** 3)
    mid = (r[:-1] + r[1:]) / 2
    i = np.arange(n - 1)
    K = _graph_stiffness(n, i, i + 1, 4.0 * np.pi * mid**2 / dr)
    return Mesh(
        kind="ball",
        coords=r,
        bulk_weights=w,
        boundary_weights=np.array([4.0 * np.pi * radius**2]),
        stiffness_bulk=K,
        stiffness_boundary=sparse.csr_matrix((1, 1)),
        trace_map=np.array([n - 1]),
        volume=float(4.0 * np.pi / 3.0 * radius**3),
        surface=float(4.0 * np.pi * radius**2),
    )


def build_mesh(kind, **dims):
    """Dispatch on the geometry name; see the module docstring for kinds."""
    if kind == "interval":
        return interval_mesh(dims.get("length", 1.0), dims["n"])
    if kind == "rectangle":
        return rectangle_mesh(
            dims.get("length_x", 1.0), dims.get("length_y", 1.0), dims["nx"], dims["ny"]
        )
    if kind == "ball":
        return ball_mesh(dims.get("radius", 1.0), dims["n"])
    raise ValueError(f"unknown mesh kind: {kind!r}")


def trace_matrix(mesh: Mesh):
    """Sparse selection of boundary values from bulk values."""
    nb = mesh.n_boundary
    return sparse.csr_matrix(
        (np.ones(nb), (np.arange(nb), mesh.trace_map)), shape=(nb, mesh.n_bulk)
    )


def coupled_operator(mesh: Mesh, params: ProblemParams):
    """Operator A of the quadratic form 2*phi1 on trace-consistent states.

    A = K_bulk + a diag(w) + P^T (K_boundary + b diag(w_boundary)) P where P
    selects boundary values; symmetric positive definite for the admissible
    coefficient pairs.
    """
    P = trace_matrix(mesh)
    A = mesh.stiffness_bulk + params.a * sparse.diags(mesh.bulk_weights)
    B = mesh.stiffness_boundary + params.b * sparse.diags(mesh.boundary_weights)
    return sparse.csr_matrix(A + P.T @ B @ P)


def total_weights(mesh: Mesh):
    """Bulk weights plus surface weights accumulated at the trace nodes."""
    w = mesh.bulk_weights.copy()
    np.add.at(w, mesh.trace_map, mesh.boundary_weights)
    return w


def phi1_form(mesh: Mesh, z: FieldPair, params: ProblemParams):
    """Quadratic energy: Dirichlet terms plus the a/b weighted mass terms.

    Evaluates the pair as stored, so it is defined on non-consistent pairs as
    well; on trace-consistent states it equals z . A z / 2 with A from
    :func:`coupled_operator`.
    """
    if z.bulk.shape != (mesh.n_bulk,) or z.boundary.shape != (mesh.n_boundary,):
        raise ValueError("field dimensions do not match the mesh")
    val = 0.5 * float(z.bulk @ (mesh.stiffness_bulk @ z.bulk))
    val += 0.5 * params.a * float(mesh.bulk_weights @ z.bulk**2)
    if z.boundary.size:
        val += 0.5 * float(z.boundary @ (mesh.stiffness_boundary @ z.boundary))
        val += 0.5 * params.b * float(mesh.boundary_weights @ z.boundary**2)
    return val


def pair_norm(mesh: Mesh, z: FieldPair):
    """Weighted discrete L2 norm of the pair (bulk and boundary together)."""
    s = float(mesh.bulk_weights @ z.bulk**2)
    if z.boundary.size:
        s += float(mesh.boundary_weights @ z.boundary**2)
    return np.sqrt(s)

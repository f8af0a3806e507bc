import numpy as np
import pytest

from fastdbc import ProblemParams, interval_mesh, pair_from_bulk


@pytest.fixture(scope="session")
def interval16():
    return interval_mesh(1.0, 16)


@pytest.fixture(scope="session")
def interval32():
    return interval_mesh(1.0, 32)


@pytest.fixture(scope="session")
def interval64():
    return interval_mesh(1.0, 64)


def smooth_random_pair(mesh, rng, floor=0.05, amplitude=0.8):
    """Nonnegative trace-consistent state from a few smooth modes."""
    if mesh.coords.ndim == 1:
        span = mesh.coords[-1] - mesh.coords[0]
        axes = [(mesh.coords - mesh.coords[0]) / (span if span > 0 else 1.0)]
    else:
        axes = []
        for d in range(mesh.coords.shape[1]):
            c = mesh.coords[:, d]
            axes.append((c - c.min()) / max(c.max() - c.min(), 1e-300))
    z = np.full(mesh.n_bulk, rng.uniform(floor, amplitude))
    for k in range(1, 4):
        amp = rng.uniform(-1.0, 1.0) / k
        mode = np.ones(mesh.n_bulk)
        for ax in axes:
            mode = mode * np.sin(k * np.pi * ax)
        z += amp * mode
    return pair_from_bulk(mesh, np.clip(z, 0.0, None))


def params_boundary_forcing(m=0.5, q=2.0, **kw):
    return ProblemParams(m=m, q=q, a=1, b=0, lam=0, mu=1, **kw)


def params_bulk_forcing(m=0.5, p=2.0, **kw):
    return ProblemParams(m=m, p=p, a=1, b=0, lam=1, mu=0, **kw)


def params_unforced(m=0.5, a=1, b=0):
    return ProblemParams(m=m, a=a, b=b, lam=0, mu=0)


def params_oracle(m=0.5):
    """Trivial coefficient pair: constants solve the full coupled system."""
    return ProblemParams(m=m, a=1, b=1, lam=0, mu=0)

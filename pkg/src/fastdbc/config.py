"""Run configuration: a line-based ``key = value`` format with dotted keys.

Blank lines and ``#`` comments are ignored; unknown keys are errors and
missing keys take the documented defaults.  Keys:

    problem.m, problem.p, problem.q, problem.a, problem.b, problem.lambda,
    problem.mu, problem.mode (power|cutoff|lipschitz), problem.cutoff_M,
    problem.lipschitz_L
    mesh.kind (interval|rectangle|ball), mesh.n, mesh.nx, mesh.ny,
    mesh.length, mesh.length_x, mesh.length_y, mesh.radius
    time.dt, time.t_end, time.output_every
    init.kind (constant|bump|boundary_zero|file), init.amplitude,
    init.center, init.width, init.path
    solver.tol, solver.max_iter, solver.clamp_negative
    extinction.eps_rel
    output.dir
    allow_trivial_ab

``init.amplitude`` is the constant value for kind=constant and the peak
value otherwise; ``init.center`` and ``init.width`` are absolute coordinates
(the rectangle uses the same center on both axes).  ``boundary_zero`` places
a smooth bulk profile vanishing on the boundary, so the boundary component
starts at zero.  The trivial coefficient pair a = b = 1 (with
lambda = mu = 0) must be opted into with ``allow_trivial_ab = true``.

State snapshots are text files: a header line
``# fastdbc-state n_bulk=<N> n_boundary=<Nb> time=<t>`` followed by the bulk
values and then the boundary values, one per line.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .grid import FieldPair, Mesh, build_mesh, pair_from_bulk
from .model import CutoffPower, Lipschitz, PowerExact, ProblemParams
from .stepper import SolverOptions


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class ValidationError(ConfigError):
    def __init__(self, key, constraint):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


@dataclass(frozen=True)
class RunConfig:
    m: float = 0.5
    p: float = 2.0
    q: float = 2.0
    a: int = 1
    b: int = 0
    lam: int = 0
    mu: int = 1
    mode: str = "power"
    cutoff_M: float = 1.0
    lipschitz_L: float = 1.0
    mesh_kind: str = "interval"
    n: int = 64
    nx: int = 16
    ny: int = 16
    length: float = 1.0
    length_x: float = 1.0
    length_y: float = 1.0
    radius: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    output_every: int = 1
    init_kind: str = "bump"
    amplitude: float = 0.05
    center: float = 0.5
    width: float = 0.15
    path: str = ""
    tol: float = 1e-10
    max_iter: int = 100
    clamp_negative: bool = True
    eps_rel: float = 1e-14
    out_dir: str = "out"
    allow_trivial_ab: bool = False


# key -> (attribute, type) in serialization order
_KEYS = {
    "problem.m": ("m", float),
    "problem.p": ("p", float),
    "problem.q": ("q", float),
    "problem.a": ("a", int),
    "problem.b": ("b", int),
    "problem.lambda": ("lam", int),
    "problem.mu": ("mu", int),
    "problem.mode": ("mode", str),
    "problem.cutoff_M": ("cutoff_M", float),
    "problem.lipschitz_L": ("lipschitz_L", float),
    "mesh.kind": ("mesh_kind", str),
    "mesh.n": ("n", int),
    "mesh.nx": ("nx", int),
    "mesh.ny": ("ny", int),
    "mesh.length": ("length", float),
    "mesh.length_x": ("length_x", float),
    "mesh.length_y": ("length_y", float),
    "mesh.radius": ("radius", float),
    "time.dt": ("dt", float),
    "time.t_end": ("t_end", float),
    "time.output_every": ("output_every", int),
    "init.kind": ("init_kind", str),
    "init.amplitude": ("amplitude", float),
    "init.center": ("center", float),
    "init.width": ("width", float),
    "init.path": ("path", str),
    "solver.tol": ("tol", float),
    "solver.max_iter": ("max_iter", int),
    "solver.clamp_negative": ("clamp_negative", bool),
    "extinction.eps_rel": ("eps_rel", float),
    "output.dir": ("out_dir", str),
    "allow_trivial_ab": ("allow_trivial_ab", bool),
}


def _convert(key, raw, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw in ("true", "false"):
                return raw == "true"
            raise ValueError
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ValidationError(key, f"cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text):
    """Parse and validate configuration text into a :class:`RunConfig`."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ParseError(line_no, "expected 'key = value'")
        key, raw = content.split("=", 1)
        key = key.strip()
        if key not in _KEYS:
            raise ValidationError(key, "unknown key")
        attr, typ = _KEYS[key]
        values[attr] = _convert(key, raw, typ)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def load_config(path):
    return parse_config(Path(path).read_text())


def serialize_config(cfg: RunConfig):
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    lines = []
    for key, (attr, typ) in _KEYS.items():
        val = getattr(cfg, attr)
        if typ is bool:
            rendered = "true" if val else "false"
        elif typ is float:
            rendered = repr(float(val))
        else:
            rendered = str(val)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def validate_config(cfg: RunConfig):
    if not 0.0 < cfg.m <= 1.0:
        raise ValidationError("problem.m", "must lie in (0, 1]")
    if cfg.p <= 1.0:
        raise ValidationError("problem.p", "must exceed 1")
    if cfg.q <= 1.0:
        raise ValidationError("problem.q", "must exceed 1")
    if cfg.a not in (0, 1) or cfg.b not in (0, 1):
        raise ValidationError("problem.a", "a and b must be 0 or 1")
    if cfg.lam not in (0, 1) or cfg.mu not in (0, 1):
        raise ValidationError("problem.lambda", "lambda and mu must be 0 or 1")
    if (cfg.a, cfg.b) == (0, 0):
        raise ValidationError("problem.a", "(a, b) = (0, 0) is not admissible")
    if (cfg.a, cfg.b) == (1, 1):
        if not cfg.allow_trivial_ab:
            raise ValidationError("problem.a", "(a, b) = (1, 1) needs allow_trivial_ab = true")
        if (cfg.lam, cfg.mu) != (0, 0):
            raise ValidationError("problem.lambda", "(a, b) = (1, 1) needs lambda = mu = 0")
    if (cfg.lam, cfg.mu) == (1, 1):
        raise ValidationError("problem.lambda", "(lambda, mu) = (1, 1) is not admissible")
    if cfg.mode not in ("power", "cutoff", "lipschitz"):
        raise ValidationError("problem.mode", "must be power, cutoff or lipschitz")
    if cfg.cutoff_M < 0:
        raise ValidationError("problem.cutoff_M", "must be >= 0")
    if cfg.lipschitz_L < 0:
        raise ValidationError("problem.lipschitz_L", "must be >= 0")
    if cfg.mesh_kind not in ("interval", "rectangle", "ball"):
        raise ValidationError("mesh.kind", "must be interval, rectangle or ball")
    if cfg.mesh_kind in ("interval", "ball") and cfg.n < 2:
        raise ValidationError("mesh.n", "must be >= 2")
    if cfg.mesh_kind == "rectangle" and (cfg.nx < 2 or cfg.ny < 2):
        raise ValidationError("mesh.nx", "must be >= 2")
    for key, val in (
        ("mesh.length", cfg.length),
        ("mesh.length_x", cfg.length_x),
        ("mesh.length_y", cfg.length_y),
        ("mesh.radius", cfg.radius),
    ):
        if val <= 0:
            raise ValidationError(key, "must be positive")
    if cfg.dt <= 0:
        raise ValidationError("time.dt", "must be positive")
    if cfg.t_end <= 0:
        raise ValidationError("time.t_end", "must be positive")
    if cfg.output_every < 1:
        raise ValidationError("time.output_every", "must be >= 1")
    if cfg.init_kind not in ("constant", "bump", "boundary_zero", "file"):
        raise ValidationError("init.kind", "must be constant, bump, boundary_zero or file")
    if cfg.amplitude < 0:
        raise ValidationError("init.amplitude", "must be >= 0")
    if cfg.width <= 0:
        raise ValidationError("init.width", "must be positive")
    if cfg.init_kind == "file" and not cfg.path:
        raise ValidationError("init.path", "required for init.kind = file")
    if cfg.tol <= 0:
        raise ValidationError("solver.tol", "must be positive")
    if cfg.max_iter < 1:
        raise ValidationError("solver.max_iter", "must be >= 1")
    if not 0.0 < cfg.eps_rel < 1.0:
        raise ValidationError("extinction.eps_rel", "must lie in (0, 1)")


def problem_params(cfg: RunConfig):
    if cfg.mode == "power":
        mode = PowerExact()
    elif cfg.mode == "cutoff":
        mode = CutoffPower(cfg.cutoff_M)
    else:
        mode = Lipschitz.linear(cfg.lipschitz_L)
    try:
        return ProblemParams(
            m=cfg.m, p=cfg.p, q=cfg.q, a=cfg.a, b=cfg.b, lam=cfg.lam, mu=cfg.mu, mode=mode
        )
    except ValueError as err:
        raise ValidationError("problem", str(err)) from None


def config_mesh(cfg: RunConfig) -> Mesh:
    if cfg.mesh_kind == "interval":
        return build_mesh("interval", length=cfg.length, n=cfg.n)
    if cfg.mesh_kind == "rectangle":
        return build_mesh(
            "rectangle", length_x=cfg.length_x, length_y=cfg.length_y, nx=cfg.nx, ny=cfg.ny
        )
    return build_mesh("ball", radius=cfg.radius, n=cfg.n)


def _boundary_zero_profile(mesh: Mesh):
    """Smooth nonnegative bulk profile with exactly zero boundary trace."""
    if mesh.kind == "interval":
        length = mesh.coords[-1]
        return np.sin(np.pi * mesh.coords / length)
    if mesh.kind == "rectangle":
        lx = mesh.coords[:, 0].max()
        ly = mesh.coords[:, 1].max()
        return np.sin(np.pi * mesh.coords[:, 0] / lx) * np.sin(np.pi * mesh.coords[:, 1] / ly)
    radius = mesh.coords[-1]
    return np.cos(np.pi * mesh.coords / (2.0 * radius))


def initial_state(cfg: RunConfig, mesh: Mesh) -> FieldPair:
    if cfg.init_kind == "constant":
        bulk = np.full(mesh.n_bulk, cfg.amplitude)
    elif cfg.init_kind == "bump":
        if mesh.coords.ndim == 1:
            d2 = (mesh.coords - cfg.center) ** 2
        else:
            d2 = np.sum((mesh.coords - cfg.center) ** 2, axis=1)
        bulk = cfg.amplitude * np.exp(-d2 / cfg.width**2)
    elif cfg.init_kind == "boundary_zero":
        bulk = cfg.amplitude * _boundary_zero_profile(mesh)
        bulk[mesh.trace_map] = 0.0  # kill roundoff so the trace is exactly zero
    else:
        bulk, boundary, _ = read_state(cfg.path)
        if bulk.shape != (mesh.n_bulk,) or boundary.shape != (mesh.n_boundary,):
            raise ValidationError("init.path", "snapshot does not match the mesh")
        return FieldPair(bulk, boundary, 0.0)
    return pair_from_bulk(mesh, bulk, 0.0)


def solver_options(cfg: RunConfig) -> SolverOptions:
    return SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter, clamp_negative=cfg.clamp_negative)


def write_state(path, pair: FieldPair):
    with open(path, "w") as fh:
        fh.write(
            f"# fastdbc-state n_bulk={pair.bulk.size} n_boundary={pair.boundary.size} "
            f"time={pair.time!r}\n"
        )
        for v in pair.bulk:
            fh.write(f"{v!r}\n")
        for v in pair.boundary:
            fh.write(f"{v!r}\n")


def read_state(path):
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# fastdbc-state"):
        raise ConfigError(f"{path}: not a state snapshot")
    header = dict(tok.split("=") for tok in lines[0].split()[2:])
    n_bulk = int(header["n_bulk"])
    n_boundary = int(header["n_boundary"])
    time = float(header["time"])
    vals = np.array([float(s) for s in lines[1:] if s.strip()])
    if vals.size != n_bulk + n_boundary:
        raise ConfigError(f"{path}: expected {n_bulk + n_boundary} values, found {vals.size}")
    return vals[:n_bulk], vals[n_bulk:], time

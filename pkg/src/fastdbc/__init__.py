"""Solver and diagnostics for perturbed fast diffusion with dynamic boundary
conditions: implicit time stepping by per-step convex minimization, energy
and potential-well instrumentation, and finite-time-extinction detection."""

from .diagnostics import (
    ComparisonReport,
    ExtinctionReport,
    InvarianceReport,
    NotInitiallyMember,
    check_energy_monotonicity,
    check_invariance,
    check_linf_bound,
    compare_runs,
    detect_extinction,
    holder_quotient,
    mass_identity_residual,
)
from .energy import (
    DegenerateState,
    EnergyReport,
    Membership,
    WellReport,
    depth_from_constant,
    estimate_best_constant,
    evaluate,
    nehari_scale,
    q_ratio,
    stable_set_check,
)
from .grid import (
    FieldPair,
    Mesh,
    build_mesh,
    constant_pair,
    coupled_operator,
    interval_mesh,
    pair_from_bulk,
    pair_norm,
    phi1_form,
    rectangle_mesh,
    ball_mesh,
    total_weights,
    trace_residual,
)
from .model import (
    TOL_POS,
    CutoffPower,
    Lipschitz,
    MonotoneTable,
    PerturbationMode,
    PowerExact,
    ProblemParams,
    beta,
    check_fundamental_inequalities,
    gamma,
    perturbation,
    primitive_f_gamma,
)
from .oracle import extinction_time, linear_reference, ode_extinction, scalar_step_oracle
from .config import (
    ConfigError,
    ParseError,
    RunConfig,
    ValidationError,
    load_config,
    parse_config,
    serialize_config,
)
from .stepper import (
    NegativityViolation,
    NonConvergence,
    SolverOptions,
    StepResult,
    Trajectory,
    run,
    step,
    step_energy_excess,
)

__version__ = "0.1.0"

"""Scalar nonlinearities of the coupled diffusion system.

The solver state is the variable v; it couples to the conserved density
through the odd power map gamma(v) = |v|^alpha sgn(v), alpha = 1/m >= 1.
Forcing terms act on u = gamma(v) and come in three flavours:

* ``PowerExact``   -- the plain powers |u|^(p-1) u in the bulk and
  |u|^(q-1) u on the boundary,
* ``CutoffPower``  -- the same powers clamped outside |u| <= (M+1)^alpha,
  which makes them globally Lipschitz,
* ``Lipschitz``    -- user-supplied monotone piecewise-linear tables with a
  declared Lipschitz constant, vanishing at 0.

All functions here are pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Entries of solver states may dip below zero by at most this much before it
# is treated as a genuine violation rather than roundoff.
TOL_POS = 1e-10

_SIDES = ("bulk", "boundary")


def _as_float(x, template):
    """Return a python float when the input was scalar, else the array."""
    return float(x) if np.ndim(template) == 0 else x


def gamma(r, alpha):
    """Odd power |r|^alpha sgn(r); strictly monotone, gamma(0) = 0."""
    r = np.asarray(r, dtype=float)
    out = np.sign(r) * np.abs(r) ** alpha
    return _as_float(out, r)


def beta(u, alpha):
    """Inverse of :func:`gamma`: |u|^(1/alpha) sgn(u)."""
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * np.abs(u) ** (1.0 / alpha)
    return _as_float(out, u)


def odd_power(u, e):
    """|u|^(e-1) u, the monotone odd extension of the power u^e."""
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * np.abs(u) ** e
    return _as_float(out, u)


@dataclass(frozen=True)
class PowerExact:
    """Exact power-law forcing."""


@dataclass(frozen=True)
class CutoffPower:
    """Power-law forcing clamped to +-(M+1)^(alpha e) outside |u| <= (M+1)^alpha."""

    M: float

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("cutoff level M must be >= 0")


@dataclass(frozen=True)
class MonotoneTable:
    """Piecewise-linear nondecreasing function with f(0) = 0.

    ``knots`` are strictly increasing u-values starting at 0; beyond the last
    knot the final slope is extended.  Negative arguments use the odd
    extension.
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != y.shape or k.size < 2:
            raise ValueError("table needs matching 1-d knots/values with >= 2 points")
        if k[0] != 0.0 or y[0] != 0.0:
            raise ValueError("table must pass through (0, 0)")
        if np.any(np.diff(k) <= 0):
            raise ValueError("table knots must be strictly increasing")
        if np.any(np.diff(y) < 0):
            raise ValueError("table values must be nondecreasing")

    def slopes(self):
        k = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.values, dtype=float)
        return np.diff(y) / np.diff(k)

    @property
    def lipschitz(self):
        return float(np.max(self.slopes()))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        k = np.asarray(self.knots, dtype=float)
        y = np.asarray(self.values, dtype=float)
        au = np.abs(u)
        out = np.interp(au, k, y)
        # np.interp clamps to the right; extend with the last slope instead
        last = self.slopes()[-1]
        over = au > k[-1]
        out = np.where(over, y[-1] + last * (au - k[-1]), out)
        out = np.sign(u) * out
        return _as_float(out, u)


@dataclass(frozen=True)
class Lipschitz:
    """Globally Lipschitz monotone forcing given by per-side tables."""

    L_f: float
    L_f_gamma: float
    bulk: MonotoneTable
    boundary: MonotoneTable

    def __post_init__(self):
        if self.L_f < self.bulk.lipschitz * (1 - 1e-12):
            raise ValueError("declared L_f is below the bulk table slope")
        if self.L_f_gamma < self.boundary.lipschitz * (1 - 1e-12):
            raise ValueError("declared L_f_gamma is below the boundary table slope")

    @classmethod
    def linear(cls, L_f, L_f_gamma=None):
        """Tables f(u) = L u on each side."""
        if L_f_gamma is None:
            L_f_gamma = L_f
        return cls(
            L_f=L_f,
            L_f_gamma=L_f_gamma,
            bulk=MonotoneTable((0.0, 1.0), (0.0, L_f)),
            boundary=MonotoneTable((0.0, 1.0), (0.0, L_f_gamma)),
        )


PerturbationMode = PowerExact | CutoffPower | Lipschitz


@dataclass(frozen=True)
class ProblemParams:
    """Exponents, coefficient flags and perturbation mode of the system.

    Admissible coefficient pairs: (a, b) in {(1,0), (0,1)} with
    (lam, mu) in {(1,0), (0,1), (0,0)}, plus the trivial pair (a, b) = (1,1)
    which is only allowed together with lam = mu = 0 and exists because
    spatially constant data then solves the full coupled system exactly
    ("oracle mode").
    """

    m: float
    p: float = 2.0
    q: float = 2.0
    a: int = 1
    b: int = 0
    lam: int = 0
    mu: int = 1
    mode: PerturbationMode = PowerExact()
    alpha: float = field(init=False)
    p_star: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.m <= 1.0:
            raise ValueError("m must lie in (0, 1]")
        if self.p <= 1.0 or self.q <= 1.0:
            raise ValueError("exponents p and q must exceed 1")
        if (self.a, self.b) not in ((1, 0), (0, 1), (1, 1)):
            raise ValueError("(a, b) must be (1,0), (0,1) or the trivial pair (1,1)")
        if (self.lam, self.mu) not in ((1, 0), (0, 1), (0, 0)):
            raise ValueError("(lambda, mu) must be (1,0), (0,1) or (0,0)")
        if (self.a, self.b) == (1, 1) and (self.lam, self.mu) != (0, 0):
            raise ValueError("(a, b) = (1,1) is only admissible with lambda = mu = 0")
        if not isinstance(self.mode, (PowerExact, CutoffPower, Lipschitz)):
            raise ValueError(f"unknown perturbation mode: {self.mode!r}")
        object.__setattr__(self, "alpha", 1.0 / self.m)
        object.__setattr__(self, "p_star", self.lam * self.p + self.mu * self.q)

    def exponent(self, side):
        if side not in _SIDES:
            raise ValueError(f"side must be one of {_SIDES}")
        return self.p if side == "bulk" else self.q

    def coefficient(self, side):
        """lambda for the bulk forcing, mu for the boundary forcing."""
        return self.lam if side == "bulk" else self.mu

    def lipschitz_bound(self):
        """Effective Lipschitz constant of the active forcing, or None.

        Exact powers are not globally Lipschitz; with lam = mu = 0 no forcing
        acts at all and the bound is 0.
        """
        if self.lam == 0 and self.mu == 0:
            return 0.0
        if isinstance(self.mode, PowerExact):
            return None
        if isinstance(self.mode, CutoffPower):
            edge = self.M_plus_one()
            lb = self.p * edge ** (self.alpha * (self.p - 1.0))
            lg = self.q * edge ** (self.alpha * (self.q - 1.0))
        else:
            lb = self.mode.L_f
            lg = self.mode.L_f_gamma
        return max(self.lam * lb, self.mu * lg)

    def M_plus_one(self):
        if not isinstance(self.mode, CutoffPower):
            raise ValueError("M is only defined in CutoffPower mode")
        return self.mode.M + 1.0


def perturbation(u, params: ProblemParams, side):
    """Forcing value at u = gamma(v); monotone nondecreasing, zero at zero.

    Does not include the lambda/mu switch; callers scale by
    ``params.coefficient(side)``.
    """
    e = params.exponent(side)
    mode = params.mode
    if isinstance(mode, PowerExact):
        return odd_power(u, e)
    if isinstance(mode, CutoffPower):
        u = np.asarray(u, dtype=float)
        edge = params.M_plus_one() ** params.alpha
        clamp = params.M_plus_one() ** (params.alpha * e)
        out = np.where(np.abs(u) <= edge, odd_power(u, e), np.sign(u) * clamp)
        return _as_float(out, u)
    table = mode.bulk if side == "bulk" else mode.boundary
    return table(u)


def _power_primitive(r, alpha, e):
    """Integral of s^(alpha e) from 0 to r >= 0."""
    r = np.asarray(r, dtype=float)
    k = alpha * e + 1.0
    return np.abs(r) ** k / k


def primitive_f_gamma(r, params: ProblemParams, side):
    """Primitive of the composed forcing: the integral of f(gamma(s)) over
    s in [0, r].

    The integrand is odd in s so the primitive is even; closed forms exist in
    every mode (piecewise in CutoffPower/Lipschitz mode) and are used here.
    """
    e = params.exponent(side)
    alpha = params.alpha
    mode = params.mode
    r_in = r
    r = np.abs(np.asarray(r, dtype=float))
    if isinstance(mode, PowerExact):
        out = _power_primitive(r, alpha, e)
        return _as_float(out, r_in)
    if isinstance(mode, CutoffPower):
        s_edge = params.M_plus_one()  # cutoff in v-space: gamma(s) hits (M+1)^alpha
        clamp = params.M_plus_one() ** (alpha * e)
        inner = _power_primitive(np.minimum(r, s_edge), alpha, e)
        outer = clamp * np.maximum(r - s_edge, 0.0)
        return _as_float(inner + outer, r_in)
    table = mode.bulk if side == "bulk" else mode.boundary
    out = _table_primitive_after_gamma(table, r, alpha)
    return _as_float(out, r_in)


def _table_primitive_after_gamma(table: MonotoneTable, r, alpha):
    """Closed-form integral of table(s^alpha) for r >= 0.

    On each table segment f(u) = y_k + m_k (u - u_k), so the integrand is
    (y_k - m_k u_k) + m_k s^alpha between the v-space knots s_k = u_k^(1/alpha).
    """
    u = np.asarray(table.knots, dtype=float)
    y = np.asarray(table.values, dtype=float)
    m = table.slopes()
    s = u ** (1.0 / alpha)
    ap1 = alpha + 1.0
    # cumulative integral at each v-space knot
    const = y[:-1] - m * u[:-1]
    seg = const * np.diff(s) + m * np.diff(s**ap1) / ap1
    cum = np.concatenate(([0.0], np.cumsum(seg)))

    idx = np.searchsorted(s, r, side="right") - 1
    idx = np.clip(idx, 0, len(s) - 1)
    # extend the final segment with the last slope
    const_ext = np.concatenate((const, [y[-1] - m[-1] * u[-1]]))
    m_ext = np.concatenate((m, [m[-1]]))
    return cum[idx] + const_ext[idx] * (r - s[idx]) + m_ext[idx] * (r**ap1 - s[idx] ** ap1) / ap1


def fundamental_inequality_margins(r, s, alpha):
    """Right-minus-left side of the three power inequalities for r, s >= 0.

    (i)   4a/(a+1)^2 (r^((a+1)/2) - s^((a+1)/2))^2 <= (r^a - s^a)(r - s)
    (ii)  |r^a - s^a| <= 2a/(a+1) max(r,s)^((a-1)/2) |r^((a+1)/2) - s^((a+1)/2)|
    (iii) |r - s| <= |r^((a+1)/2) - s^((a+1)/2)|^(2/(a+1))

    Nonnegative margins mean the inequalities hold.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    kappa = (alpha + 1.0) / 2.0
    dk = r**kappa - s**kappa
    m1 = (r**alpha - s**alpha) * (r - s) - 4.0 * alpha / (alpha + 1.0) ** 2 * dk**2
    m2 = 2.0 * alpha / (alpha + 1.0) * np.maximum(r, s) ** ((alpha - 1.0) / 2.0) * np.abs(dk) - np.abs(
        r**alpha - s**alpha
    )
    m3 = np.abs(dk) ** (2.0 / (alpha + 1.0)) - np.abs(r - s)
    return m1, m2, m3


def check_fundamental_inequalities(r, s, alpha, rel_slack=1e-12):
    """Truth of the three power inequalities with relative floating-point slack."""
    margins = fundamental_inequality_margins(r, s, alpha)
    scales = _inequality_scales(r, s, alpha)
    out = tuple(
        np.asarray(m >= -rel_slack * sc) if np.ndim(m) else bool(m >= -rel_slack * sc)
        for m, sc in zip(margins, scales)
    )
    return out


def _inequality_scales(r, s, alpha):
    """1 + |terms| normalization for each inequality."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    kappa = (alpha + 1.0) / 2.0
    dk = np.abs(r**kappa - s**kappa)
    da = np.abs(r**alpha - s**alpha)
    s1 = 1.0 + da * np.abs(r - s) + 4.0 * alpha / (alpha + 1.0) ** 2 * dk**2
    s2 = 1.0 + da + 2.0 * alpha / (alpha + 1.0) * np.maximum(r, s) ** ((alpha - 1.0) / 2.0) * dk
    s3 = 1.0 + np.abs(r - s) + dk ** (2.0 / (alpha + 1.0))
    return s1, s2, s3

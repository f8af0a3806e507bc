import numpy as np
import pytest
from scipy.integrate import quad

from fastdbc import (
    CutoffPower,
    Lipschitz,
    MonotoneTable,
    PowerExact,
    ProblemParams,
    beta,
    check_fundamental_inequalities,
    gamma,
    perturbation,
    primitive_f_gamma,
)
from fastdbc.model import _power_primitive, fundamental_inequality_margins


def test_gamma_examples():
    assert gamma(3.0, 2.0) == 9.0
    assert gamma(-2.0, 2.0) == -4.0
    assert gamma(0.0, 5.0) == 0.0


def test_beta_examples():
    assert beta(9.0, 2.0) == 3.0
    assert beta(-8.0, 3.0) == -2.0
    assert beta(0.0, 2.0) == 0.0


def test_gamma_beta_inversion():
    r = np.concatenate([-np.logspace(-3, 3, 25), [0.0], np.logspace(-3, 3, 25)])
    for alpha in np.linspace(1.0, 20.0, 9):
        err = np.abs(beta(gamma(r, alpha), alpha) - r)
        assert np.all(err <= 1e-10 * (1.0 + np.abs(r)))


@pytest.mark.parametrize("alpha", [1.0, 2.0, 3.5])
def test_gamma_beta_monotone(alpha):
    r = np.linspace(-5.0, 5.0, 10_000)
    assert np.all(np.diff(gamma(r, alpha)) >= 0)
    assert np.all(np.diff(beta(r, alpha)) >= 0)


def test_perturbation_power_example():
    params = ProblemParams(m=0.5, p=2.0, lam=1, mu=0, mode=PowerExact())
    assert perturbation(2.0, params, "bulk") == 4.0


def test_perturbation_cutoff_clamps():
    params = ProblemParams(m=0.5, p=2.0, lam=1, mu=0, mode=CutoffPower(1.0))
    # beyond |u| = (M+1)^alpha = 4 the output freezes at (M+1)^(alpha p) = 16
    assert perturbation(5.0, params, "bulk") == 16.0
    assert perturbation(-5.0, params, "bulk") == -16.0
    assert perturbation(4.0, params, "bulk") == 16.0


def test_cutoff_agrees_with_power_inside_band():
    cut = ProblemParams(m=0.5, p=1.7, lam=1, mu=0, mode=CutoffPower(1.5))
    exact = ProblemParams(m=0.5, p=1.7, lam=1, mu=0, mode=PowerExact())
    edge = 2.5**2.0
    u = np.linspace(-edge, edge, 4001)
    assert np.array_equal(perturbation(u, cut, "bulk"), perturbation(u, exact, "bulk"))


def test_perturbation_monotone_all_modes():
    u = np.linspace(-30.0, 30.0, 10_000)
    table = MonotoneTable((0.0, 0.5, 2.0), (0.0, 0.3, 0.9))
    modes = [
        PowerExact(),
        CutoffPower(0.7),
        Lipschitz(L_f=0.6, L_f_gamma=0.6, bulk=table, boundary=table),
    ]
    for mode in modes:
        params = ProblemParams(m=0.5, p=2.0, q=3.0, lam=1, mu=0, mode=mode)
        for side in ("bulk", "boundary"):
            vals = perturbation(u, params, side)
            assert np.all(np.diff(vals) >= 0)
            assert perturbation(0.0, params, side) == 0.0


def test_cutoff_slope_bound():
    p, alpha, M = 2.3, 2.0, 1.2
    params = ProblemParams(m=1.0 / alpha, p=p, lam=1, mu=0, mode=CutoffPower(M))
    u = np.linspace(-1.5 * (M + 1) ** alpha, 1.5 * (M + 1) ** alpha, 200_001)
    slopes = np.diff(perturbation(u, params, "bulk")) / np.diff(u)
    bound = p * (M + 1) ** (alpha * (p - 1.0))
    assert np.max(slopes) <= bound * (1.0 + 1e-8)
    assert params.lipschitz_bound() == pytest.approx(bound)


def test_primitive_power_examples():
    params = ProblemParams(m=0.5, p=2.0, lam=1, mu=0)
    assert primitive_f_gamma(1.0, params, "bulk") == pytest.approx(0.2, rel=1e-14)
    assert primitive_f_gamma(0.0, params, "bulk") == 0.0
    # the p = 1 integrand lies outside the admissible exponent range of
    # ProblemParams; the underlying power primitive covers it directly
    assert _power_primitive(2.0, 1.0, 1.0) == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize(
    "mode",
    [
        PowerExact(),
        CutoffPower(0.8),
        Lipschitz(
            L_f=2.0,
            L_f_gamma=1.5,
            bulk=MonotoneTable((0.0, 1.0, 3.0), (0.0, 2.0, 4.5)),
            boundary=MonotoneTable((0.0, 0.4, 2.0), (0.0, 0.6, 1.2)),
        ),
    ],
)
@pytest.mark.parametrize("side", ["bulk", "boundary"])
def test_primitive_matches_quadrature(mode, side):
    # independent oracle: adaptive quadrature of the composed integrand
    params = ProblemParams(m=0.4, p=2.3, q=1.8, lam=1, mu=0, mode=mode)
    for r in (0.3, 1.0, 1.9, 3.7):
        expected, err = quad(
            lambda t: perturbation(gamma(t, params.alpha), params, side), 0.0, r, limit=200
        )
        assert err < 1e-10
        assert primitive_f_gamma(r, params, side) == pytest.approx(expected, rel=1e-9, abs=1e-12)
        # the primitive of an odd integrand is even
        assert primitive_f_gamma(-r, params, side) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_fundamental_inequality_examples():
    assert check_fundamental_inequalities(1.0, 1.0, 3.0) == (True, True, True)
    assert check_fundamental_inequalities(4.0, 1.0, 2.0) == (True, True, True)
    assert check_fundamental_inequalities(7.3, 0.0, 5.0) == (True, True, True)
    # spot values of example two: (8/9)*49 <= 45
    m1, _, _ = fundamental_inequality_margins(4.0, 1.0, 2.0)
    assert m1 == pytest.approx(45.0 - 8.0 / 9.0 * 49.0)


def test_fundamental_inequalities_random_battery():
    rng = np.random.default_rng(7)
    n = 20_000
    r = rng.uniform(0.0, 10.0, n)
    s = rng.uniform(0.0, 10.0, n)
    alpha = rng.uniform(1.0, 10.0, n)
    ok1, ok2, ok3 = check_fundamental_inequalities(r, s, alpha)
    assert ok1.all() and ok2.all() and ok3.all()


def test_monotone_table_validation():
    with pytest.raises(ValueError):
        MonotoneTable((0.0, 1.0), (0.1, 0.5))  # not through the origin
    with pytest.raises(ValueError):
        MonotoneTable((0.0, 1.0, 0.5), (0.0, 0.2, 0.3))  # knots not increasing
    with pytest.raises(ValueError):
        MonotoneTable((0.0, 1.0, 2.0), (0.0, 0.5, 0.2))  # values decrease


def test_table_extends_last_slope():
    t = MonotoneTable((0.0, 1.0), (0.0, 2.0))
    assert t(3.0) == pytest.approx(6.0)
    assert t(-3.0) == pytest.approx(-6.0)
    assert t.lipschitz == 2.0


def test_lipschitz_declared_constant_must_cover_slope():
    table = MonotoneTable((0.0, 1.0), (0.0, 2.0))
    with pytest.raises(ValueError):
        Lipschitz(L_f=1.0, L_f_gamma=2.0, bulk=table, boundary=table)


def test_problem_params_validation():
    with pytest.raises(ValueError):
        ProblemParams(m=0.0)
    with pytest.raises(ValueError):
        ProblemParams(m=1.5)
    with pytest.raises(ValueError):
        ProblemParams(m=0.5, p=1.0)
    with pytest.raises(ValueError):
        ProblemParams(m=0.5, a=0, b=0)
    with pytest.raises(ValueError):
        ProblemParams(m=0.5, a=1, b=1, lam=1, mu=0)
    with pytest.raises(ValueError):
        ProblemParams(m=0.5, lam=1, mu=1)
    oracle = ProblemParams(m=0.5, a=1, b=1, lam=0, mu=0)
    assert oracle.p_star == 0.0


def test_alpha_and_pstar_fields():
    params = ProblemParams(m=0.25, p=3.0, q=2.0, lam=1, mu=0)
    assert params.alpha * params.m == pytest.approx(1.0, abs=1e-15)
    assert params.p_star == 3.0
    assert ProblemParams(m=0.5, p=3.0, q=2.0, lam=0, mu=1).p_star == 2.0


def test_lipschitz_bound_by_mode():
    assert ProblemParams(m=0.5, lam=1, mu=0, mode=PowerExact()).lipschitz_bound() is None
    assert ProblemParams(m=0.5, a=1, b=1, lam=0, mu=0).lipschitz_bound() == 0.0
    lin = Lipschitz.linear(0.7, 0.3)
    assert ProblemParams(m=0.5, lam=0, mu=1, mode=lin).lipschitz_bound() == pytest.approx(0.3)
    assert ProblemParams(m=0.5, lam=1, mu=0, mode=lin).lipschitz_bound() == pytest.approx(0.7)

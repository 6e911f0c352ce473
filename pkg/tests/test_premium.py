import math

import numpy as np
import pytest

from amput import MarketModel, PremiumInput, gamma_of_t, generator_on_payoff, premium_quadrature
from amput.pde import solve_vi
from amput.premium import american_from_premium


def _fd_generator(model, x, eps=1e-4):
    """``sigma^2/2 phi'' + mu phi' - r phi`` by central differences."""
    phi = lambda y: model.K - math.exp(y)  # noqa: E731  (smooth branch below ln K)
    d2 = (phi(x + eps) - 2 * phi(x) + phi(x - eps)) / eps ** 2
    d1 = (phi(x + eps) - phi(x - eps)) / (2 * eps)
    return 0.5 * model.sigma ** 2 * d2 + model.mu * d1 - model.r * phi(x)


@pytest.mark.parametrize("x", [2.0, 3.5, 4.5, 4.6])
def test_generator_without_dividend(x):
    m = MarketModel(0.05, 0.0, 0.2, 100.0, 100.0, 1.0)
    assert generator_on_payoff(m, x) == pytest.approx(-m.r * m.K, abs=1e-12)


@pytest.mark.parametrize("d", [0.0, 0.03, 0.08])
def test_generator_matches_finite_differences(d):
    m = MarketModel(0.05, d, 0.25, 100.0, 100.0, 1.0)
    for x in (3.0, 4.0, 4.5):
        assert generator_on_payoff(m, x) == pytest.approx(_fd_generator(m, x), abs=1e-5)


def test_generator_vanishes_above_strike():
    m = MarketModel(0.05, 0.03, 0.2, 100.0, 100.0, 1.0)
    assert generator_on_payoff(m, math.log(100.0) + 1e-9) == 0.0
    assert generator_on_payoff(m, 10.0) == 0.0


def test_gamma_arithmetic():
    m = MarketModel(0.05, 0.03, 0.2, 100.0, 100.0, 1.0)
    assert gamma_of_t(m, lambda s: math.log(80.0), 0.5) == pytest.approx(2.6, abs=1e-12)


def test_gamma_without_dividend_is_rk():
    m = MarketModel(0.05, 0.0, 0.2, 100.0, 100.0, 1.0)
    for t in (0.01, 0.5, 1.0):
        assert gamma_of_t(m, lambda s: math.log(90.0) - s, t) == m.r * m.K


def test_gamma_reports_inconsistent_boundary_unclamped():
    m = MarketModel(0.05, 0.08, 0.2, 100.0, 100.0, 1.0)
    assert gamma_of_t(m, lambda s: math.log(90.0), 0.5) < 0


def test_gamma_rejects_nonpositive_time():
    m = MarketModel(0.05, 0.03, 0.2, 100.0, 100.0, 1.0)
    with pytest.raises(ValueError):
        gamma_of_t(m, lambda s: 4.0, 0.0)


def test_gamma_limit_dividend_dominated():
    m = MarketModel(0.05, 0.08, 0.2, 100.0, 100.0, 1.0)
    sol = solve_vi(m, 1000, 1000, keep_surface=False)
    bd = sol.boundary()
    g = [gamma_of_t(m, bd, s) for s in sol.s[1:40]]
    # the boundary rises towards rK/d at maturity, so gamma decreases to about 0
    assert g[0] >= -1e-2
    assert g[0] <= 0.05 * m.r * m.K
    assert g[0] < g[-1]


def test_premium_zero_cases():
    m0 = MarketModel(0.05, 0.0, 0.2, 100.0, 100.0, 1.0)
    never = PremiumInput(m0, lambda s: np.full(np.shape(s), -np.inf))
    assert premium_quadrature(never, 1.0, math.log(100.0)) == 0.0
    mk = MarketModel(0.05, 0.0, 0.2, 100.0, 0.0, 1.0)
    assert premium_quadrature(PremiumInput(mk, lambda s: 4.0), 1.0, 4.6) == 0.0


def test_resolution_floor():
    m = MarketModel(0.05, 0.0, 0.2, 100.0, 100.0, 1.0)
    with pytest.raises(ValueError):
        PremiumInput(m, lambda s: 4.0, panels=1, order=4)
    PremiumInput(m, lambda s: 4.0, panels=1, order=8)


def test_premium_rejects_nonpositive_time(small_solution):
    inp = PremiumInput(small_solution.model, small_solution.boundary())
    with pytest.raises(ValueError):
        premium_quadrature(inp, 0.0, 4.6)


def test_premium_nonnegative_and_nondecreasing(small_solution):
    m = small_solution.model
    bd = small_solution.boundary()
    ts = np.linspace(0.05, 1.0, 12)
    assert all(gamma_of_t(m, bd, t) >= 0 for t in ts)
    inp = PremiumInput(m, bd)
    for spot in (80.0, 100.0, 120.0):
        vals = [premium_quadrature(inp, t, math.log(spot)) for t in ts]
        assert min(vals) >= 0.0
        assert np.all(np.diff(vals) >= -1e-12)


def test_premium_close_to_solver(small_solution):
    chk = american_from_premium(PremiumInput(small_solution.model, small_solution.boundary()))
    assert chk.american == pytest.approx(chk.european + chk.premium)
    assert abs(chk.american - small_solution.price()) <= 1e-2


@pytest.mark.parametrize("d", [0.03, 0.08])
def test_doubling_quadrature_nodes(d):
    m = MarketModel(0.05, d, 0.2, 100.0, 100.0, 1.0)
    bd = solve_vi(m, 4000, 4000, keep_surface=False).boundary()
    a = premium_quadrature(PremiumInput(m, bd), m.T, math.log(m.S0))
    b = premium_quadrature(PremiumInput(m, bd, panels=128), m.T, math.log(m.S0))
    assert abs(a - b) < 1e-8 * m.K

"""Binomial approximation of the American put in the Black-Scholes model.

Lattice pricer, finite-difference reference solver for the variational
inequality, early-exercise-premium quadrature, and convergence studies.
"""

from .kernels import BACKEND
from .lattice import (LatticeResult, LatticeSpec, Scheme, discrete_generator, extract_boundary,
                      price_american, price_european_on_lattice, stopping_rule_value)
from .model import MarketModel, european_put, normal_cdf, payoff_g, payoff_phi
from .pde import PdeSolution, reference_price, smooth_fit_check, solve_vi, value_at
from .premium import PremiumInput, gamma_of_t, generator_on_payoff, premium_quadrature

__all__ = [
    "BACKEND", "LatticeResult", "LatticeSpec", "MarketModel", "PdeSolution", "PremiumInput",
    "Scheme", "discrete_generator", "european_put", "extract_boundary", "gamma_of_t",
    "generator_on_payoff", "normal_cdf", "payoff_g", "payoff_phi", "premium_quadrature",
    "price_american", "price_european_on_lattice", "reference_price", "smooth_fit_check",
    "solve_vi", "stopping_rule_value", "value_at",
]

import math

import numpy as np
import pytest

from amput import LatticeSpec, MarketModel, price_american, price_european_on_lattice
from amput.pde import CertificationError, ReferencePrice
from amput.study import (ConvergenceRow, envelope_constants, loglog_slope, oracle_for_study, regime_of,
                         run_boundary_asymptotics, run_convergence, run_stopping_study)


def _fake_reference(price, certified=True):
    return ReferencePrice(price, price, price, 0.0 if certified else 1.0, 2e-4, certified)


@pytest.mark.parametrize("d,name", [(0.0, "d<=r"), (0.05, "d<=r"), (0.0500001, "d>r"), (0.08, "d>r")])
def test_regime_dispatch(d, name):
    reg = regime_of(MarketModel(0.05, d, 0.2, 100.0, 100.0, 1.0))
    assert reg.name == name
    if name == "d>r":
        assert (reg.alpha, reg.alpha_bar, reg.beta) == (1.0, 1.0, 1.0)
    else:
        assert (reg.alpha, reg.alpha_bar, reg.beta) == (1.25, 1.5, 1.5)


def test_envelope_constants_bound_every_row():
    rng = np.random.default_rng(1)
    rows = [ConvergenceRow(n, 0.0, float(rng.normal()) / n, math.log(n)) for n in (64, 128, 256, 512)]
    up, lo = envelope_constants(rows, 1.25, 1.5)
    for r in rows:
        assert r.error <= up * r.lnn ** 1.25 / r.n * (1 + 1e-12)
        assert -r.error <= lo * r.lnn ** 1.5 / r.n * (1 + 1e-12)


def test_loglog_slope_recovers_rate():
    ns = np.array([128, 256, 512, 1024])
    assert loglog_slope(ns, 3.0 / ns) == pytest.approx(-1.0, abs=1e-12)
    assert loglog_slope(ns, -3.0 / ns ** 2) == pytest.approx(-2.0, abs=1e-12)


def test_convergence_zero_strike_is_degenerate():
    rep = run_convergence(MarketModel(0.05, 0.0, 0.2, 100.0, 0.0, 1.0), [64, 128])
    assert rep.fits["degenerate"]
    assert all(r.error == 0.0 for r in rep.rows)
    assert rep.checks == {}


def test_convergence_rows_against_given_reference(model_low):
    ref = _fake_reference(6.9729)
    rep = run_convergence(model_low, [256, 64, 128], reference=ref)
    assert [r.n for r in rep.rows] == [64, 128, 256]
    for r in rep.rows:
        assert r.price == price_american(model_low, LatticeSpec(r.n)).price
        assert r.error == r.price - ref.price
        assert r.lnn == math.log(r.n)
    assert rep.fits["regime"] == "d<=r"
    assert set(rep.checks) == {"error_reduction", "slope_band", "envelope_prefix"}


def test_convergence_refuses_uncertified_reference(model_low):
    with pytest.raises(CertificationError):
        run_convergence(model_low, [64, 128], reference=_fake_reference(7.0, certified=False))


@pytest.mark.parametrize("sched", [[64, 64, 128], [32, 64], [2 ** 16], []])
def test_convergence_schedule_validation(model_low, sched):
    with pytest.raises(ValueError):
        run_convergence(model_low, sched, reference=_fake_reference(7.0))


def test_results_independent_of_thread_count(model_low, monkeypatch):
    ref = _fake_reference(6.9729)
    tables = []
    for threads in ("1", "3"):
        monkeypatch.setenv("AMPUT_THREADS", threads)
        tables.append(run_convergence(model_low, [64, 96, 128, 200], reference=ref).table())
    assert tables[0] == tables[1]


def test_stopping_study_never_triggering(model_low):
    study = run_stopping_study(model_low, [16, 64, 128], boundary=lambda s: -math.inf)
    for r in study.rows:
        spec = LatticeSpec(r.n)
        assert r.value_tau == pytest.approx(price_european_on_lattice(model_low, spec), abs=1e-12)
        assert r.gap_to_lattice == pytest.approx(
            price_american(model_low, spec).price - price_european_on_lattice(model_low, spec), abs=1e-12)
        assert r.gap_to_lattice >= 0
        assert r.tail_expectation == 0.0
    assert study.checks["gap_nonnegative"]["ok"]
    assert not study.checks["tail_band"]["ok"]  # a zero tail has no finite band


def test_stopping_study_requires_boundary(model_low):
    with pytest.raises(ValueError):
        run_stopping_study(model_low, [16])


def test_stopping_study_rows(model_low, small_solution):
    study = run_stopping_study(model_low, [32, 64], boundary=small_solution.boundary())
    assert study.beta == 1.5
    for r in study.rows:
        assert r.h == model_low.T / r.n
        assert r.lnh_beta == abs(math.log(r.h)) ** 1.5
        assert r.gap_to_lattice >= -1e-12 * model_low.K


def test_boundary_window_needs_ten_layers(small_solution):
    with pytest.raises(ValueError, match="10"):
        run_boundary_asymptotics(small_solution.model, small_solution, upper=0.02)


def test_boundary_fit_record(small_solution):
    fit = run_boundary_asymptotics(small_solution.model, small_solution)
    assert fit.b0 <= math.log(small_solution.model.K)
    assert fit.points == int(np.count_nonzero(small_solution.s[1:] <= 0.1))
    assert fit.bound_c > 0
    assert fit.window == (small_solution.s[1], 0.1)


# -- no-dividend model: the worked examples for the study operations ---------------


@pytest.fixture(scope="module")
def atm_convergence(atm):
    return run_convergence(atm, [2 ** k for k in range(7, 15)])


@pytest.fixture(scope="module")
def atm_oracle(atm):
    return oracle_for_study(atm)


@pytest.mark.xfail(strict=True, reason="erratic binomial error for d=0: slope -0.72 after the noise-floor "
                                       "exclusion of n=8192, 16384 (-0.81 with every row)")
def test_no_dividend_slope_band(atm_convergence):
    slope = atm_convergence.fits["slope_loglog"]
    assert -1.35 <= slope <= -0.75


def test_no_dividend_envelope_stability(atm_convergence):
    reg = regime_of(atm_convergence.model)
    full = envelope_constants(atm_convergence.rows, reg.alpha, reg.alpha_bar)
    top = envelope_constants(atm_convergence.rows[4:], reg.alpha, reg.alpha_bar)
    for a, b in zip(full, top):
        assert math.isfinite(a)
        assert abs(a - b) <= 0.5 * a


def test_no_dividend_stopping_bands(atm, atm_oracle):
    study = run_stopping_study(atm, boundary=atm_oracle.boundary())
    tails = [r.tail_expectation for r in study.rows]
    # grows over the schedule, with lattice jitter between neighbours
    assert tails[-1] > 1.5 * tails[0]
    assert study.checks["tail_band"]["ok"]
    assert study.checks["gap_band"]["ok"]
    assert study.checks["gap_nonnegative"]["ok"]


@pytest.mark.xfail(strict=True, reason="d=0 exponent measured 0.398 at 4000x4000, below the 0.40 band edge")
def test_no_dividend_boundary_exponent(atm, atm_oracle):
    fit = run_boundary_asymptotics(atm, atm_oracle)
    assert 0.40 <= fit.exponent <= 0.62

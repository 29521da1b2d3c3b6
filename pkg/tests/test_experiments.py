import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sdeot.experiments import (PowerRule, Problem, RateFit, clt_sim, constant_check, fit_rate,
                               oracle_tanh, oracle_tanh_limit, predicted_constant, rate_sweep)
from sdeot.functionals import identity_field, make_test_family, pair_difference
from sdeot.measures import DiscreteMeasure, SourceMeasure
from sdeot.eot_solver import solve_entropic
from conftest import SQUARE

GRID = np.geomspace(1e-1, 1e-4, 16)


@pytest.fixture(scope="module")
def sym_problem(unif1, sym_target):
    return Problem(unif1, sym_target, "symmetric")


def test_fit_rate_exact_power_law():
    eps = np.geomspace(0.1, 1e-4, 10)
    fit = fit_rate(eps, -3 * eps**2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12) and fit.r_squared == pytest.approx(1.0)
    assert fit.window.tolist() == list(range(2, 10))
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-10)


def test_fit_rate_excludes_failures_and_floor():
    eps = np.geomspace(0.1, 1e-4, 10)
    vals = eps**1.5
    vals[4] *= 50
    failed = np.zeros(10, bool)
    failed[4] = True
    floors = np.zeros(10)
    floors[-1] = vals[-1]
    fit = fit_rate(eps, vals, floors, failed)
    assert 4 not in fit.window and 9 not in fit.window
    assert fit.slope == pytest.approx(1.5, abs=1e-12)
    assert math.isnan(fit_rate(eps, vals, drop=9).slope)


def test_fit_rate_polylog():
    eps = np.geomspace(0.1, 1e-5, 12)
    fit = fit_rate(eps, eps**2 * np.log(1 / eps) ** 3, polylog=True)
    assert fit.slope == pytest.approx(2.0, abs=1e-9) and fit.polylog == pytest.approx(3.0, abs=1e-9)
    assert fit_rate(eps, eps**2).polylog is None


@given(st.lists(st.floats(1e-12, 1e3), min_size=8, max_size=8))
def test_rate_fit_invariants(values):
    eps = np.geomspace(0.5, 1e-3, 8)
    fit = fit_rate(eps, values)
    assert 0.0 <= fit.r_squared <= 1.0 and len(fit.window) == 6


def test_rate_fit_validation():
    with pytest.raises(ValueError, match="decreasing"):
        RateFit(np.array([0.1, 0.2]), np.array([1.0, 2.0]), 1.0, 0.0, 1.0, np.array([0, 1]))
    with pytest.raises(ValueError, match="positive"):
        RateFit(np.array([0.2, 0.1]), np.array([1.0, 0.0]), 1.0, 0.0, 1.0, np.array([0, 1]))


def test_rate_sweep_examples(unif1, sym_problem):
    s = rate_sweep(sym_problem, GRID, "pair", field=identity_field(unif1))
    assert abs(s.fit.slope - 2.0) <= 0.1 and s.fit.r_squared >= 0.99
    assert len(s.rows) == 16 and all(r["converged"] for r in s.rows)
    assert [r["in_window"] for r in s.rows[:2]] == [False, False]
    s = rate_sweep(sym_problem, GRID, "l2")
    assert abs(s.fit.slope - 1.0) <= 0.1 and s.fit.r_squared >= 0.99


def test_rate_sweep_errors(sym_problem):
    with pytest.raises(ValueError, match="6 points"):
        rate_sweep(sym_problem, GRID[:5])
    with pytest.raises(ValueError):
        rate_sweep(sym_problem, np.geomspace(2.0, 0.1, 8))
    with pytest.raises(ValueError, match="kind"):
        rate_sweep(sym_problem, GRID, "energy")
    with pytest.raises(ValueError, match="family"):
        rate_sweep(sym_problem, GRID, "dual")


def test_constant_check_1d(sym_problem):
    c = constant_check(sym_problem, 1e-3)
    assert c.predicted == pytest.approx(-math.pi**2 / 96, rel=1e-13)
    assert c.rel_gap <= 0.02 and c.to_record()["rel_gap"] == c.rel_gap


def test_constant_check_split_square(split_target):
    src = SourceMeasure.uniform(SQUARE)
    p = Problem(src, split_target)
    assert predicted_constant(p.diagram0) == pytest.approx(-math.pi**2 / 12, rel=1e-12)
    gaps = [constant_check(p, e).rel_gap for e in (1e-2, 1e-3)]
    assert gaps[1] <= 0.05


def test_constant_gap_decreases(four_target):
    p = Problem(SourceMeasure.uniform(SQUARE),
                DiscreteMeasure(four_target.points, [0.1, 0.2, 0.3, 0.4]))
    gaps = [constant_check(p, e).rel_gap for e in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3


def test_constant_check_single_atom(unif1):
    c = constant_check(Problem(unif1, DiscreteMeasure([[0.3]], [1.0])), 1e-3)
    assert c.predicted == 0.0 and c.measured == 0.0 and c.rel_gap == 0.0


def test_constant_check_rejects_large_eps(sym_problem):
    with pytest.raises(ValueError):
        constant_check(sym_problem, 0.05)


def test_oracle_matches_pairing(unif1, sym_target, sym_problem):
    eps = 0.01
    z = solve_entropic(unif1, sym_target, eps).potential
    val = pair_difference(identity_field(unif1), z, sym_problem.diagram0)
    assert val == pytest.approx(oracle_tanh(eps), rel=1e-8)


def test_oracle_limits():
    assert oracle_tanh_limit("power", 1.0) == pytest.approx(-math.pi**2 / 96, rel=1e-8)
    assert oracle_tanh_limit("l2") == pytest.approx(math.log(2) - 0.5, rel=1e-12)
    lim = oracle_tanh_limit("power", 0.5)
    err = [abs(oracle_tanh(e, "power", 0.5) / e**1.5 - lim) for e in (1.0, 0.5, 0.25, 0.01)]
    assert err[0] > err[1] > err[2] and err[3] <= 1e-12 * abs(lim)
    with pytest.raises(ValueError):
        oracle_tanh(0.1, "cubic")


def test_power_rule():
    assert PowerRule()(100) == pytest.approx(100**-0.3)
    assert PowerRule(0.3).valid_for(1.0) and not PowerRule(0.25).valid_for(1.0)
    assert not PowerRule(0.3).valid_for(0.5) and PowerRule(0.4).valid_for(0.5)


def test_clt_single_atom(unif1):
    p = Problem(unif1, DiscreteMeasure([[0.4]], [1.0]))
    res = clt_sim(p, [10, 40], 6, seed=1)
    for n in (10, 40):
        assert np.all(res.samples[n] == 0) and np.all(res.gaps[n] == 0)
    assert all(r.var == 0 and r.skewness == 0 for r in res.rows)


def test_clt_deterministic_and_thread_independent(unif1, asym_target):
    p = Problem(unif1, asym_target)
    a = clt_sim(p, [50, 200], 12, seed=4)
    b = clt_sim(p, [50, 200], 12, seed=4, threads=3)
    c = clt_sim(p, [50, 200], 12, seed=5)
    for n in (50, 200):
        assert np.array_equal(a.samples[n], b.samples[n])
        assert np.array_equal(a.gaps[n], b.gaps[n])
        assert not np.array_equal(a.samples[n], c.samples[n])
    assert [r.n for r in a.rows] == [50, 200] and a.rows[0].eps == pytest.approx(50**-0.3)
    assert len(a.variance_ratios()) == 1 and np.isfinite(a.common_mean())


def test_clt_warns_on_slow_eps(unif1, asym_target):
    p = Problem(unif1, asym_target)
    with pytest.warns(UserWarning, match="too slowly"):
        clt_sim(p, [20], 2, seed=0, eps_rule=PowerRule(0.2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        clt_sim(p, [20], 2, seed=0)


def test_dual_sweep_2d():
    src = SourceMeasure.uniform(SQUARE)
    t = DiscreteMeasure([[0.25, 0.5], [0.75, 0.5]], [0.5, 0.5])
    fam = make_test_family(1.0, 8, 0, src)
    s = rate_sweep(Problem(src, t), np.geomspace(1e-1, 1e-3, 8), "dual", family=fam)
    assert abs(s.fit.slope - 2.0) <= 0.2


@pytest.fixture(scope="module")
def clt_symmetric(unif1, sym_target):
    return clt_sim(Problem(unif1, sym_target), [100, 400, 1600], 500, seed=0,
                   eps_rule=PowerRule(0.3), threads=4)


def test_clt_variance_stabilizes_symmetric(clt_symmetric):
    ratios = clt_symmetric.variance_ratios()
    assert all(0.8 <= r <= 1.25 for r in ratios), ratios


def test_clt_symmetric_variance_is_second_order(clt_symmetric):
    # id vanishes on the interface, so S ~ chi2_1 / (2 sqrt n) and Var S ~ 1/(2n)
    for r in clt_symmetric.rows:
        assert 2 * r.n * r.var == pytest.approx(1.0, rel=0.2)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sdeot.eot_solver import solve_entropic
from sdeot.geometry import build_diagram, cell_rule
from sdeot.layers import layered_rule
from sdeot.maps import (DomainError, brenier_eval, delta, entropic_eval, softmax_weights)
from sdeot.measures import DiscreteMeasure, integrate
from sdeot.sd_solver import solve_semidual
from conftest import shipped


def test_delta_examples(sym_target, asym_target):
    assert delta(sym_target, [0.0, 0.0], 0, 1, 0.5)[0] == -1.0
    assert delta(asym_target, [1 / 3, -1 / 3], 0, 1, -1 / 3)[0] == pytest.approx(0, abs=1e-15)
    with pytest.raises(ValueError):
        delta(sym_target, [0.0, 0.0], 1, 1, 0.0)


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8), st.floats(0, 1), st.floats(0, 1))
def test_delta_antisymmetric(z, x1, x2):
    t = shipped("2d-random-8").target
    x = np.array([[x1, x2]])
    for i, j in [(0, 1), (2, 7), (5, 3)]:
        assert abs(delta(t, z, i, j, x)[0] + delta(t, z, j, i, x)[0]) <= 1e-15 * (3 + abs(z[i]))


def test_brenier_examples(unif1, square, sym_target, split_target):
    d = build_diagram(unif1, sym_target, [0.0, 0.0])
    assert brenier_eval(d, 0.5).tolist() == [[1.0]]
    assert brenier_eval(d, 0.0).tolist() == [[-1.0]]
    d2 = build_diagram(square, split_target, [-0.125, 0.125])
    assert brenier_eval(d2, [[0.9, 0.5]]).tolist() == [[0.75, 0.5]]
    with pytest.raises(DomainError):
        brenier_eval(d, 1.5)
    with pytest.raises(DomainError):
        brenier_eval(d2, [[0.5, -0.1]])


@pytest.mark.parametrize("eps", [0.1, 0.01, 0.001])
def test_tanh_identity(sym_target, eps):
    x = np.linspace(-1, 1, 1001)
    t = entropic_eval(sym_target, [0.0, 0.0], x, eps)[:, 0]
    assert np.abs(t - np.tanh(2 * x / eps)).max() <= 1e-12


def test_single_atom(unif1):
    one = DiscreteMeasure([[0.4]], [1.0])
    assert np.all(entropic_eval(one, [0.0], np.linspace(-1, 1, 7), 0.01) == 0.4)


def test_tail_bound():
    cfg = shipped("2d-random-8")
    t = cfg.target
    z = solve_semidual(cfg.source, t).potential.values
    eps = 0.001
    rng = np.random.default_rng(0)
    x = rng.random((20000, 2))
    logits = x @ t.points.T - z
    own = logits.argmax(axis=1)
    slack = logits[np.arange(len(x)), own][:, None] - logits
    slack[np.arange(len(x)), own] = np.inf
    deep = slack.min(axis=1) >= 40 * eps
    assert deep.sum() > 100
    err = np.linalg.norm(entropic_eval(t, z, x[deep], eps) - t.points[own[deep]], axis=1)
    assert err.max() <= t.diameter * (t.n - 1) * np.exp(-40)


@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8), st.floats(1e-4, 1.0),
       st.floats(-50, 50))
def test_convex_hull_and_shift(z, eps, c):
    t = shipped("2d-random-8").target
    x = np.random.default_rng(1).random((50, 2))
    w = softmax_weights(x, t, z, eps)
    assert np.all(w >= 0) and np.abs(w.sum(axis=1) - 1).max() <= 1e-14
    a = entropic_eval(t, np.array(z), x, eps)
    b = entropic_eval(t, np.array(z) + c, x, eps)
    assert np.abs(a - b).max() <= 1e-14 * (1 + abs(c) / eps)
    lo, hi = t.points.min(axis=0), t.points.max(axis=0)
    assert np.all(a >= lo - 1e-14) and np.all(a <= hi + 1e-14)


def test_mean_preservation(shipped_config):
    cfg = shipped_config
    mean_q = cfg.target.weights @ cfg.target.points
    tol = cfg.solver.tol or (1e-10 if cfg.source.dim == 1 else 1e-8)
    rep = solve_entropic(cfg.source, cfg.target, 0.05, tol)
    d = build_diagram(cfg.source, rep.target, rep.potential)
    rule = layered_rule(d, eps=0.05)
    m_eps = rule.w @ entropic_eval(rep.target, rep.potential, rule.x)
    assert np.abs(m_eps - mean_q).max() <= 10 * tol
    rep0 = solve_semidual(cfg.source, cfg.target, tol)
    d0 = build_diagram(cfg.source, rep0.target, rep0.potential)
    m0 = sum(cell_rule(cfg.source, c)[1] @ cfg.source.density(cell_rule(cfg.source, c)[0])
             * rep0.target.points[c.index] for c in d0.cells if not c.empty)
    assert np.abs(m0 - mean_q).max() <= 10 * tol


def test_mean_preservation_standard_quadrature(unif1, asym_target):
    rep = solve_entropic(unif1, asym_target, 0.2, 1e-13)
    m = integrate(unif1, lambda x: entropic_eval(asym_target, rep.potential, x)[:, 0])
    assert m == pytest.approx(1 / 3, abs=1e-10)


def test_pointwise_convergence():
    cfg = shipped("2d-random-4")
    rep0 = solve_semidual(cfg.source, cfg.target, cfg.solver.tol)
    d0 = build_diagram(cfg.source, rep0.target, rep0.potential)
    rng = np.random.default_rng(2)
    x = rng.random((400, 2))
    logits = d0.logits(x)
    top = np.sort(logits, axis=1)
    x = x[top[:, -1] - top[:, -2] > 0.03]
    t0 = brenier_eval(d0, x)
    prev = None
    for k, eps in enumerate((0.1, 0.05, 0.02, 0.01, 0.005, 0.002)):
        z = solve_entropic(cfg.source, cfg.target, eps, cfg.solver.tol).potential
        err = np.linalg.norm(entropic_eval(cfg.target, z, x) - t0, axis=1)
        if k > 1:
            assert np.all(err <= prev + 1e-14)
        prev = err
    assert prev.max() < 1e-3

import json

import numpy as np
import pytest

from twoarmed.bandit import BanditParams
from twoarmed.bounds import failure_lb_constant, success_lb_constant
from twoarmed.markov import (
    GridFunction,
    MaxIterExceeded,
    NonConvergence,
    absorption_solve,
    h_function,
    p_gamma_apply,
    psi_neumann,
    psi_neumann_grid,
    q_gamma_apply,
    transition_matrix,
    uniform_grid,
)
from twoarmed.montecarlo import run_batch, wilson_interval
from twoarmed.schedule import Constant

CASES = [(0.1, 0.7, 0.3), (0.05, 0.6, 0.5), (0.2, 0.9, 0.1)]


def test_constants_are_fixed():
    one = GridFunction.from_callable(lambda x: 1.0, 513)
    for g, a, b in CASES:
        assert np.allclose(p_gamma_apply(one, g, a, b).values, 1.0, rtol=0, atol=1e-15)


@pytest.mark.parametrize("g,a,b", CASES)
def test_identity_picks_up_the_drift(g, a, b):
    ident = GridFunction.from_callable(lambda x: x, 1025)
    got = p_gamma_apply(ident, g, a, b).values
    x = ident.grid
    assert np.max(np.abs(got - (x + (a - b) * g * x * (1 - x)))) <= 1e-15


def test_identity_is_harmonic_when_arms_are_equal():
    ident = GridFunction.from_callable(lambda x: x, 1025)
    assert np.allclose(p_gamma_apply(ident, 0.1, 0.4, 0.4).values, ident.values, rtol=0, atol=1e-15)


def _p_exact(f, x, g, a, b):
    up, dn = x + g * (1 - x), x * (1 - g)
    return a * x * f(up) + b * (1 - x) * f(dn) + (1 - a * x - b * (1 - x)) * f(x)


def _q_exact(f, x, g, a, b):
    up, dn = x + g * (1 - x), x * (1 - g)
    return (1 - g) * (a * up * f(up) + b * (1 - dn) * f(dn)) + (1 - a * x - b * (1 - x)) * f(x)


@pytest.mark.parametrize("g,a,b", CASES)
def test_conjugacy_with_constant_function(g, a, b):
    # with g = 1 both sides are explicit polynomials; Q(1) is exact on the grid
    x = uniform_grid(1025)
    h = lambda t: t * (1 - t)
    one = lambda t: np.ones_like(t)
    assert np.max(np.abs(_p_exact(h, x, g, a, b) - h(x) * _q_exact(one, x, g, a, b))) <= 1e-15
    q1 = q_gamma_apply(GridFunction(x, np.ones_like(x)), g, a, b).values
    assert np.max(np.abs(q1 - _q_exact(one, x, g, a, b))) <= 1e-15


@pytest.mark.parametrize("points", [257, 1025, 4097])
def test_conjugacy_error_is_second_order(points):
    g, a, b = 0.1, 0.7, 0.3
    f = lambda t: np.cos(3 * t) + t**3
    x = uniform_grid(points)
    lhs = p_gamma_apply(GridFunction(x, f(x) * x * (1 - x)), g, a, b).values
    rhs = x * (1 - x) * q_gamma_apply(GridFunction(x, f(x)), g, a, b).values
    dx = 1.0 / (points - 1)
    err = np.max(np.abs(lhs - rhs))
    # interpolation of a function with |second derivative| <= 12 errs by at most 12 dx^2 / 8
    assert err <= 1.5 * dx * dx
    print(f"points={points} conjugacy error={err:.3e} ({err / dx**2:.3f} dx^2)")


def test_matrix_agrees_with_apply():
    g, a, b = 0.13, 0.8, 0.35
    x = uniform_grid(1001)
    f = GridFunction(x, np.sin(5 * x))
    P = transition_matrix(x, g, a, b)
    assert np.max(np.abs(P @ f.values - p_gamma_apply(f, g, a, b).values)) <= 1e-14
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-14)
    assert P.min() >= 0.0


def test_psi_vanishes_at_the_ends_and_respects_envelope():
    g, a, b = 0.1, 0.7, 0.3
    vals, res = psi_neumann(g, a, b, np.array([0.0, 1.0]))
    assert vals.tolist() == [0.0, 0.0]
    x = res.psi.grid
    psi = res.psi.values
    assert np.all(psi >= 0.0)
    assert np.all(psi <= (1 - x) / ((a - b) * g) + 1e-9)
    assert res.last_term < 1e-14 and res.tail_estimate < 1e-10


def test_psi_rejects_non_positive_drift_and_shallow_depth():
    with pytest.raises(ValueError):
        psi_neumann_grid(0.1, 0.3, 0.3)
    with pytest.raises(NonConvergence):
        psi_neumann_grid(0.1, 0.7, 0.3, points=257, depth=5)


@pytest.mark.parametrize("g,a,b", CASES)
def test_solver_pins_and_monotonicity(g, a, b):
    sol = absorption_solve(g, a, b, points=2049)
    u = sol.u.values
    assert u[0] == 0.0 and u[-1] == 1.0
    assert np.all(np.diff(u) >= -1e-9)
    assert np.all(u >= sol.u.grid - 1e-12)  # submartingale from x upward
    assert sol.residual <= 1e-10


def test_solver_monotone_in_reward_of_a():
    x = np.linspace(0, 1, 101)
    lo = absorption_solve(0.1, 0.6, 0.4, points=2049)(x)
    hi = absorption_solve(0.1, 0.8, 0.4, points=2049)(x)
    assert np.all(hi >= lo - 1e-9)


@pytest.mark.parametrize("g,a,b", CASES)
def test_solver_matches_series(g, a, b):
    sol = absorption_solve(g, a, b, points=2049)
    res = psi_neumann_grid(g, a, b, points=2049)
    x = sol.u.grid
    assert np.max(np.abs(sol.u.values - (x + (a - b) * g * res.psi.values))) <= 1e-7


@pytest.mark.parametrize("g,a,b", CASES)
def test_closed_form_bounds_sandwich_solution(g, a, b):
    sol = absorption_solve(g, a, b, points=2049)
    x = np.linspace(0.01, 1.0, 100)
    u = sol(x)
    f = np.array([failure_lb_constant(t, b, g) for t in x])
    s = np.array([success_lb_constant(t, a, b, g) for t in x])
    assert np.all(s <= u + 1e-6)
    assert np.all(f <= 1 - u + 1e-6)


@pytest.mark.parametrize("g,a,b,x0", [(0.1, 0.7, 0.3, 0.2), (0.1, 0.55, 0.5, 0.5), (0.2, 0.9, 0.1, 0.05), (0.05, 0.6, 0.5, 0.3), (0.2, 0.6, 0.55, 0.7)])
def test_solution_matches_simulation(g, a, b, x0):
    u = float(absorption_solve(g, a, b, points=2049)(x0))
    est = run_batch(BanditParams(a, b, x0), Constant(g), 20_000, 20_000, 31)
    assert est.counts["Undecided"] == 0
    lo, hi = wilson_interval(est.counts["AtOne"], est.M, 0.999)
    assert lo - 1e-4 <= u <= hi + 1e-4


def test_grid_refinement():
    # u is steep near 0, so interpolation error concentrates there; it shrinks at about second order
    x = np.linspace(0, 1, 257)
    u = {p: absorption_solve(0.1, 0.7, 0.3, points=p)(x) for p in (2049, 4097, 8193)}
    d1 = np.abs(u[2049] - u[4097])
    d2 = np.abs(u[4097] - u[8193])
    bulk = x >= 0.25
    print(f"refinement sup: {d1.max():.3e} -> {d2.max():.3e}; on x >= 0.25: {d1[bulk].max():.3e} -> {d2[bulk].max():.3e}")
    assert d2.max() <= 0.4 * d1.max()
    assert d2.max() <= 1e-4
    assert d2[bulk].max() <= 2e-6


def test_solver_limits_and_exports():
    with pytest.raises(MaxIterExceeded):
        absorption_solve(0.1, 0.7, 0.3, points=257, max_iter=5)
    with pytest.raises(ValueError):
        absorption_solve(0.1, 0.3, 0.7)
    sol = absorption_solve(0.2, 0.9, 0.1, points=257)
    d = json.loads(json.dumps(sol.to_dict()))
    assert d["points"] == 257 and d["iterations"] == sol.iterations
    rows = sol.to_csv().splitlines()
    assert rows[0] == "x,u" and len(rows) == 258


def test_grid_function_validation():
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 0.5]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        GridFunction(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    assert h_function(3).values.tolist() == [0.0, 0.25, 0.0]

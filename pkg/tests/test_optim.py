from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from davislab.errors import ModelError
from davislab.market import FiniteMarket, csw_family, truncate
from davislab.optim import (
    duality_gap,
    global_minimize_1d,
    maximize_concave_1d,
    primal_value,
    solve_dual,
    solve_primal,
)
from davislab.utility import evaluate, log_utility, power_utility

from conftest import random_market


def test_two_state_log_closed_form(two_state):
    # max 1/2 log(1 + 2 pi) + 1/2 log(1 - pi): pi = 1/4, value 1/2 log(9/8)
    p = solve_primal(two_state, log_utility())
    assert p.pi_hat == pytest.approx(0.25, abs=1e-14)
    assert p.value == pytest.approx(0.5 * math.log(9 / 8), abs=1e-14)
    assert np.allclose(p.X_hat, [1.5, 0.75])
    d = solve_dual(two_state, log_utility())
    assert np.allclose(d.density, [2 / 3, 4 / 3])
    assert d.total_mass == pytest.approx(1.0)
    assert d.price(two_state.claim) == pytest.approx(1 / 3)


@pytest.mark.parametrize("gamma", [-1.0, 0.5, -4.0])
def test_two_state_power_closed_form(two_state, gamma):
    # FOC (1 + 2 pi) / (1 - pi) = 2**(1 / (1 - gamma))
    k = 2.0 ** (1.0 / (1.0 - gamma))
    p = solve_primal(two_state, power_utility(gamma))
    assert p.pi_hat == pytest.approx((k - 1.0) / (2.0 + k), abs=1e-13)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("gamma", [None, -1.0, 0.5])
def test_primal_matches_scalar_search(seed, gamma):
    rng = np.random.default_rng(seed)
    m = random_market(rng, n_max=30)
    u = log_utility() if gamma is None else power_utility(gamma)
    up, down = m.dS > 0, m.dS < 0
    lo = float(np.max(-m.endowment[up] / m.dS[up]))
    hi = float(np.min(-m.endowment[down] / m.dS[down]))
    f = lambda pi: -m.expect(evaluate(u, m.endowment + pi * m.dS))
    w = 1e-9 * (hi - lo)
    res = minimize_scalar(f, bounds=(lo + w, hi - w), method="bounded", options={"xatol": 1e-13})
    p = solve_primal(m, u)
    assert p.value == pytest.approx(-res.fun, abs=1e-10)
    assert p.pi_hat == pytest.approx(res.x, abs=1e-5)


def test_arbitrage_rejected():
    m = FiniteMarket([0.5, 0.5], [1.0, 2.0], [1.0, 1.0])
    with pytest.raises(ModelError):
        solve_primal(m, log_utility())
    with pytest.raises(ModelError):
        solve_dual(m, log_utility())


def test_nonpositive_endowment_rejected(two_state):
    with pytest.raises(ModelError):
        solve_primal(two_state, log_utility(), [1.0, 0.0])


def test_csw_small_truncation_grid_oracle():
    # independent dense-grid search over the admissible interval
    m = truncate(csw_family(), 20)
    u = log_utility()
    lo, hi = -1.0, 1.0 / (1.0 - 1.0 / 20)  # wealth 1 + pi dS_n > 0 for all n
    edges = np.linspace(lo, hi, 20001)
    f = lambda g: m.expect(np.log1p(g * m.dS))
    i = 1 + int(np.argmax([f(g) for g in edges[1:-1]]))
    # polish on the two cells around the best node; the optimum hugs the right edge
    res = minimize_scalar(lambda g: -f(g), bounds=(edges[i - 1], edges[i + 1]), method="bounded",
                          options={"xatol": 1e-15})
    best = -res.fun
    p = solve_primal(m, u)
    assert p.value == pytest.approx(best, abs=1e-8)
    assert duality_gap(p, solve_dual(m, u)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("N", [200, 1000])
@pytest.mark.parametrize("gamma", [None, 0.5, -1.0])
def test_deep_truncations_solve_without_gap(N, gamma):
    m = truncate(csw_family(), N)
    u = log_utility() if gamma is None else power_utility(gamma)
    p, d = solve_primal(m, u), solve_dual(m, u)
    assert abs(duality_gap(p, d)) < 1e-10
    assert np.all(p.X_hat >= 0)


def test_primal_value_equals_solution(two_state):
    assert primal_value(two_state, log_utility()) == solve_primal(two_state, log_utility()).value


def test_maximize_concave_1d():
    x, v = maximize_concave_1d(lambda t: -(t - 0.3) ** 2 + 2.0, -5.0, 5.0)
    assert x == pytest.approx(0.3, abs=1e-7) and v == pytest.approx(2.0)


def test_global_minimize_1d_finds_global_and_edges():
    f = lambda a: np.cos(3 * a) + 0.1 * a
    x, v, edge = global_minimize_1d(f, -4.0, 4.0)
    grid = np.linspace(-4, 4, 800001)
    assert v == pytest.approx(f(grid).min(), abs=1e-10)
    assert not edge
    _, _, edge = global_minimize_1d(lambda a: a, 0.0, 1.0)
    assert edge


def test_truncation_modes_agree_as_level_grows():
    # renormalized vs cemetery truncation: the tail mass 2**-N / 4 bounds the discrepancy
    f, u = csw_family(), log_utility()
    diffs = []
    for N in (10, 20, 50):
        a = solve_dual(truncate(f, N), u).value
        b = solve_dual(truncate(f, N, "cemetery"), u).value
        diffs.append(abs(a - b))
        assert diffs[-1] <= 2.0**-N
    assert diffs[0] > diffs[1] > diffs[2] or diffs[2] < 1e-14

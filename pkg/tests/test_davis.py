from __future__ import annotations

import numpy as np
import pytest

from davislab.davis import (
    TEST_FUNCTIONS,
    DavisInterval,
    DavisMethod,
    PerturbationCone,
    davis_interval_fd,
    davis_interval_finite,
    directional_derivative_lp,
    interval_derb,
    interval_via_supergradient,
    is_irrelevant,
    projection_price,
)
from davislab.errors import ArgumentError, ConfigError, NumericError
from davislab.optim import solve_dual, solve_primal
from davislab.utility import log_utility, power_utility

from conftest import random_market


def test_two_state_price_is_singleton(two_state):
    iv = davis_interval_finite(two_state, log_utility())
    assert iv.p_low == iv.p_high == pytest.approx(1 / 3)
    assert iv.method is DavisMethod.DUAL_SWEEP
    assert iv.contains(1 / 3 + 1e-14, tol=1e-12)
    assert iv.width == 0.0


def test_interval_rejects_inverted_bounds():
    with pytest.raises(NumericError):
        DavisInterval(1.0, 0.0, DavisMethod.DUAL_SWEEP, 1.0)


@pytest.mark.parametrize("gamma", [None, -1.0, 0.5])
def test_methods_agree_on_random_market(gamma):
    rng = np.random.default_rng(7)
    m = random_market(rng, n_max=20)
    u = log_utility() if gamma is None else power_utility(gamma)
    a = davis_interval_finite(m, u)
    b = interval_via_supergradient(m, u=u)
    c = davis_interval_fd(m, u)
    for iv in (b, c):
        assert iv.p_low == pytest.approx(a.p_low, abs=1e-5)
        assert iv.p_high == pytest.approx(a.p_high, abs=1e-5)


def test_supergradient_on_value_function_with_kink():
    # u(eps, x) = log(1 + x) - |eps| + 0.3 eps has slopes -0.7 and 1.3 in eps, 1 in x
    value = lambda e, x: np.log1p(x) - abs(e) + 0.3 * e
    iv = interval_via_supergradient(value)
    assert iv.p_low == pytest.approx(-0.7, abs=1e-8)
    assert iv.p_high == pytest.approx(1.3, abs=1e-8)
    assert not iv.diagnostics["singleton_within_tolerance"]


def test_irrelevant_set_is_the_annihilator_of_the_deflator():
    rng = np.random.default_rng(11)
    m = random_market(rng, n_max=8)
    u = log_utility()
    w = solve_dual(m, u).weights
    B = m.endowment
    for _ in range(3):
        R = rng.normal(size=m.n_states)
        R0 = R - (w @ R) / w.sum()  # pairs to zero with the deflator
        assert is_irrelevant(m, u, B, 0.1 * R0 / np.abs(R0).max())
    assert not is_irrelevant(m, u, B, np.ones(m.n_states))
    assert is_irrelevant(m, u, B, m.dS)
    # linear combinations of irrelevant directions stay irrelevant
    R1 = rng.normal(size=m.n_states)
    R1 -= (w @ R1) / w.sum()
    combo = 0.3 * R1 - 0.2 * m.dS
    assert is_irrelevant(m, u, B, 0.1 * combo / np.abs(combo).max())


def test_irrelevance_grid_drops_inadmissible_eps(two_state):
    with pytest.warns(RuntimeWarning):
        is_irrelevant(two_state, log_utility(), [1.0, 1.0], [20.0, 0.0])


def test_projection_price_second_entry_is_davis_price():
    rng = np.random.default_rng(5)
    m = random_market(rng, n_max=10)
    u = power_utility(-1.0)
    d = solve_dual(m, u)
    pp = projection_price(m, u)
    assert pp[1] == pytest.approx(d.price(m.claim), abs=1e-6)
    assert pp[0] == pytest.approx(d.price(m.endowment), abs=1e-6)


def test_directional_derivative_is_deflator_pairing(two_state):
    u = log_utility()
    v = directional_derivative_lp(two_state, u)
    d = solve_dual(two_state, u)
    assert v == pytest.approx(d.weights @ two_state.claim, abs=1e-12)


def test_perturbation_cone(two_state):
    X = solve_primal(two_state, log_utility()).X_hat
    cone = PerturbationCone(two_state, X, two_state.claim, 0.1)
    lo, hi = cone.bounds()
    assert lo < 0 < hi
    assert cone.contains(0.5 * (lo + hi)) and not cone.contains(hi + 1.0)
    with pytest.raises(ArgumentError):
        PerturbationCone(two_state, X, two_state.claim, 0.0)


def test_interval_derb():
    iv = interval_derb(lambda e: 2.0 - abs(e), 1.0, 0.4)
    assert iv.width == 0.0 and iv.p_low == pytest.approx(0.4)
    iv = interval_derb(lambda e: 2.0 - abs(e), 1.0, 0.4, defect=0.25)
    assert iv.p_low == pytest.approx(0.4 - 0.25) and iv.p_high == pytest.approx(0.4 + 0.25)
    with pytest.raises(ConfigError):
        interval_derb(lambda e: np.array([2.0, 2.0 + e]), 1.0, 0.0, defect=0.1)


def test_test_functions_bounded_below_by_one():
    n = np.arange(2000)
    for rule in TEST_FUNCTIONS.values():
        h = rule(n)
        assert h.min() >= 1.0 and h.max() <= 2.0

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from davislab.errors import ArgumentError, DomainError
from davislab.utility import (
    check_reasonable_elasticity,
    conjugate_derivative,
    conjugate_value,
    evaluate,
    inverse_marginal,
    log_utility,
    marginal,
    power_utility,
    utility_from_spec,
)

UTILS = [log_utility(), power_utility(-1.0), power_utility(0.5), power_utility(-3.0)]


def test_log_values():
    u = log_utility()
    assert evaluate(u, np.e) == pytest.approx(1.0)
    assert marginal(u, 4.0) == pytest.approx(0.25)
    assert inverse_marginal(u, 0.25) == pytest.approx(4.0)


def test_extension_outside_domain():
    assert evaluate(log_utility(), -1.0) == -np.inf
    assert evaluate(log_utility(), 0.0) == -np.inf
    assert evaluate(power_utility(0.5), 0.0) == 0.0
    assert evaluate(power_utility(-1.0), 0.0) == -np.inf


def test_marginal_rejects_nonpositive():
    with pytest.raises(DomainError):
        marginal(log_utility(), [1.0, 0.0])


@pytest.mark.parametrize("gamma", [1.0, 0.0, 1.5])
def test_power_gamma_range(gamma):
    with pytest.raises(ArgumentError):
        power_utility(gamma)


@pytest.mark.parametrize("u", UTILS, ids=lambda u: str(u.gamma))
@pytest.mark.parametrize("y", [0.05, 0.7, 3.0])
def test_conjugate_matches_numeric_sup(u, y):
    # independent oracle: V(y) = sup_x U(x) - x y by bounded scalar search
    res = minimize_scalar(lambda x: -(evaluate(u, x) - x * y), bounds=(1e-8, 1e4), method="bounded",
                          options={"xatol": 1e-12})
    assert conjugate_value(u, y) == pytest.approx(-res.fun, rel=1e-7, abs=1e-7)
    assert -conjugate_derivative(u, y) == pytest.approx(res.x, rel=1e-4)


@pytest.mark.parametrize("u", UTILS, ids=lambda u: str(u.gamma))
def test_inverse_marginal_roundtrip(u):
    x = np.geomspace(1e-3, 1e3, 25)
    assert np.allclose(inverse_marginal(u, marginal(u, x)), x, rtol=1e-12)


def test_elasticity():
    assert check_reasonable_elasticity(log_utility()).elasticity == 0.0
    r = check_reasonable_elasticity(power_utility(0.5))
    assert r.reasonable and r.elasticity == 0.5
    assert r.ratios[-1] == pytest.approx(0.5)


def test_from_spec():
    assert utility_from_spec("LOG") == log_utility()
    assert utility_from_spec("power", -1) == power_utility(-1.0)
    with pytest.raises(ArgumentError):
        utility_from_spec("power")
    with pytest.raises(ArgumentError):
        utility_from_spec("exp")

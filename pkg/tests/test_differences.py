from __future__ import annotations

import numpy as np
import pytest

from davislab.differences import central_derivative, one_sided_derivative, three_point_one_sided


@pytest.mark.parametrize("side", [1, -1])
def test_one_sided_on_smooth_function(side):
    f = lambda x: np.exp(2 * x) + x**3
    d = one_sided_derivative(f, side)
    assert d.value == pytest.approx(2.0, abs=1e-6)
    assert d.error < 1e-3


def test_kink_one_sided_slopes():
    f = lambda x: -abs(x) + 0.5 * x + x**2
    assert one_sided_derivative(f, 1).value == pytest.approx(-0.5, abs=1e-12)
    assert one_sided_derivative(f, -1).value == pytest.approx(1.5, abs=1e-12)


def test_richardson_removes_quadratic_terms_exactly():
    # forward quotients of a cubic carry h and h**2 errors only
    f = lambda x: 1 + 3 * x - 4 * x**2 + 7 * x**3
    d = one_sided_derivative(f, 1, steps=(0.1, 0.05, 0.025))
    assert d.value == pytest.approx(3.0, abs=1e-12)


def test_three_point_and_central():
    f = np.sin
    assert three_point_one_sided(f, 1, 1e-3).value == pytest.approx(1.0, abs=1e-6)
    assert three_point_one_sided(f, -1, 1e-3).value == pytest.approx(1.0, abs=1e-6)
    c = central_derivative(np.exp, 1e-3)
    assert c.value == pytest.approx(1.0, abs=1e-12)
    assert c.error > 0


def test_side_validated():
    with pytest.raises(ValueError):
        one_sided_derivative(np.sin, 0)

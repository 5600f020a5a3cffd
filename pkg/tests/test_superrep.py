from __future__ import annotations

import itertools

import numpy as np
import pytest

from davislab.errors import ArgumentError, ModelError
from davislab.market import FiniteMarket
from davislab.superrep import (
    Uniqueness,
    is_replicable,
    lower_envelope,
    subreplicate,
    superreplicate,
)

from conftest import random_market


def three_state():
    return FiniteMarket([1 / 3] * 3, [1.0, 0.0, -1.0], [1.0] * 3)


def vertex_price(m, psi):
    """sup E^Q[psi] over the extreme martingale measures.

    With one asset these are two-point measures on an up- and a down-state
    and point masses on states with a flat increment.
    """
    best = -np.inf
    up = np.flatnonzero(m.dS > 0)
    down = np.flatnonzero(m.dS < 0)
    for i, j in itertools.product(up, down):
        wi = -m.dS[j] / (m.dS[i] - m.dS[j])
        best = max(best, wi * psi[i] + (1 - wi) * psi[j])
    for k in np.flatnonzero(m.dS == 0):
        best = max(best, psi[k])
    return best


def test_three_state_not_unique():
    r = superreplicate(three_state(), [-1.0, 0.0, -1.0])
    assert r.unique is Uniqueness.NOT_UNIQUE
    assert r.price == pytest.approx(0.0, abs=1e-12)
    # pi = 0 and pi = +-1 strategies all cost 0, none dominates the others
    lo, hi = r.certificate["optimal_portfolio_range"]
    assert lo == pytest.approx(-1.0, abs=1e-7) and hi == pytest.approx(1.0, abs=1e-7)


def test_three_state_replicable_flip():
    r = superreplicate(three_state(), [1.0, 0.0, -1.0])
    assert r.unique is Uniqueness.REPLICABLE
    assert r.price == pytest.approx(0.0, abs=1e-12) and r.portfolio == pytest.approx(1.0)


def test_three_state_uniquely_super():
    r = superreplicate(three_state(), [1.0, 0.0, 0.0])
    assert r.unique is Uniqueness.UNIQUELY_SUPER
    assert r.price == pytest.approx(0.5)
    assert np.allclose(r.superrep_payoff, [1.0, 0.5, 0.0])


@pytest.mark.parametrize("seed", range(25))
def test_price_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    m = random_market(rng, n_max=12)
    psi = rng.normal(size=m.n_states)
    r = superreplicate(m, psi)
    assert r.price == pytest.approx(vertex_price(m, psi), abs=1e-8)
    assert np.all(r.superrep_payoff >= psi - 1e-9)
    s = subreplicate(m, psi)
    assert s.price == pytest.approx(-vertex_price(m, -psi), abs=1e-8)
    assert s.price <= r.price + 1e-12
    q = r.martingale_measure
    assert q @ m.dS == pytest.approx(0.0, abs=1e-9) and q.sum() == pytest.approx(1.0)


def test_is_replicable(two_state):
    c = is_replicable(two_state, [3.0, 0.0])
    assert c.replicable and c.psi0 == pytest.approx(1.0) and c.pi == pytest.approx(1.0)
    assert not is_replicable(three_state(), [0.0, 1.0, 0.0]).replicable


def test_superreplicate_rejects_arbitrage_and_shape():
    m = FiniteMarket([0.5, 0.5], [1.0, 2.0], [1.0, 1.0])
    with pytest.raises(ModelError):
        superreplicate(m, [0.0, 1.0])
    with pytest.raises(ArgumentError):
        superreplicate(three_state(), [1.0, 2.0])


def test_lower_envelope_finite_and_functional():
    m = three_state()
    assert lower_envelope(m, np.ones(3), [1.0, 0.0, 0.0], 0.5) == pytest.approx(1.0)
    v = lower_envelope(None, lambda a: 2.0 + np.exp(-np.asarray(a) ** 2), np.tanh, 0.1)
    assert v == pytest.approx(2.0 - 0.1, abs=1e-6)

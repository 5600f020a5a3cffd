from __future__ import annotations

import numpy as np
import pytest

from davislab.market import FiniteMarket
from davislab.utility import log_utility, power_utility

CORPUS_SEED = 12345


def random_market(rng, n_max=50, claim=True) -> FiniteMarket:
    """Random two-sided market with up to ``n_max`` states and a positive endowment."""
    n = int(rng.integers(2, n_max + 1))
    p = np.maximum(rng.dirichlet(np.ones(n)), 1e-6)
    p /= p.sum()
    dS = rng.normal(size=n)
    # one state on each side keeps the market free of arbitrage
    dS[0], dS[1] = abs(dS[0]) + 0.1, -abs(dS[1]) - 0.1
    B = rng.uniform(0.5, 2.0, n)
    phi = rng.normal(size=n) if claim else None
    return FiniteMarket(p, dS, B, phi)


CORPUS_UTILITIES = {"log": log_utility(), "power-1": power_utility(-1.0), "power0.5": power_utility(0.5)}


@pytest.fixture(scope="session")
def corpus():
    rng = np.random.default_rng(CORPUS_SEED)
    return [random_market(rng) for _ in range(200)]


@pytest.fixture
def two_state():
    # p = (1/2, 1/2), dS = (2, -1): the log investor holds pi = 1/2
    return FiniteMarket([0.5, 0.5], [2.0, -1.0], [1.0, 1.0], [1.0, 0.0])


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

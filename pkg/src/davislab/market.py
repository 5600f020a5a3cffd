"""One-period finite-state markets and countable families truncated to them.

A :class:`FiniteMarket` carries the physical probabilities, the one-period price
increment of a single risky asset, the investor's endowment paid at the horizon
and optionally a claim to be priced.  Wealth at the horizon from a portfolio
``pi`` is ``endowment + pi * dS`` state by state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ArgumentError, ConfigError, ModelError
from .lp import MAX_VARIABLES, LPInfeasible, solve_lp

__all__ = [
    "FiniteMarket",
    "NoArbitrageReport",
    "CountableMarketFamily",
    "check_no_arbitrage",
    "tilt_market",
    "truncate",
    "csw_family",
    "register_family",
    "get_family",
    "market_from_dict",
    "load_market",
]

PROB_TOL = 1e-12


def _vec(x, name, n=None):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 and n is not None:
        a = np.full(n, float(a))
    a = np.atleast_1d(a).copy()
    if a.ndim != 1:
        raise ArgumentError(f"{name} must be a flat vector")
    if n is not None and a.size != n:
        raise ArgumentError(f"{name} has {a.size} entries, expected {n}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteMarket:
    probs: np.ndarray
    dS: np.ndarray
    endowment: np.ndarray
    claim: np.ndarray | None = None
    name: str = ""
    # log-probabilities are kept separately so states with p_n ~ 1e-300 stay usable
    log_probs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        probs = _vec(self.probs, "probs")
        n = probs.size
        if n < 1:
            raise ArgumentError("a market needs at least one state")
        if np.any(probs <= 0):
            raise ModelError("probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > PROB_TOL * max(1, n):
            raise ModelError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "dS", _vec(self.dS, "dS", n))
        object.__setattr__(self, "endowment", _vec(self.endowment, "endowment", n))
        if self.claim is not None:
            object.__setattr__(self, "claim", _vec(self.claim, "claim", n))
        lp = np.log(probs) if self.log_probs is None else _vec(self.log_probs, "log_probs", n)
        object.__setattr__(self, "log_probs", lp)

    @property
    def n_states(self) -> int:
        return self.probs.size

    def expect(self, x) -> float:
        return float(self.probs @ np.asarray(x, dtype=float))

    def with_endowment(self, endowment) -> FiniteMarket:
        return FiniteMarket(self.probs, self.dS, endowment, self.claim, self.name, self.log_probs)

    def with_claim(self, claim) -> FiniteMarket:
        return FiniteMarket(self.probs, self.dS, self.endowment, claim, self.name, self.log_probs)

    def require_valid_endowment(self, endowment=None) -> np.ndarray:
        b = self.endowment if endowment is None else np.asarray(endowment, dtype=float)
        if not np.all(b > 0):
            raise ModelError(f"endowment must be bounded away from 0; min is {b.min():g}")
        return b

    def to_dict(self) -> dict:
        d = {
            "probs": self.probs.tolist(),
            "dS": self.dS.tolist(),
            "endowment": self.endowment.tolist(),
        }
        if self.claim is not None:
            d["claim"] = self.claim.tolist()
        return d


@dataclass(frozen=True)
class NoArbitrageReport:
    ok: bool
    witness: np.ndarray | None
    arbitrage: float | None
    min_weight: float


def check_no_arbitrage(m: FiniteMarket) -> NoArbitrageReport:
    """Certify existence of a strictly positive martingale measure.

    Solves ``max t`` subject to ``q >= t``, ``sum q = 1``, ``<q, dS> = 0``.  A
    positive optimum yields the witness ``q``; otherwise the one-sided increment
    gives the arbitrage portfolio ``+1`` or ``-1``.
    """
    n = m.n_states
    if n + 1 > MAX_VARIABLES:
        return _no_arbitrage_closed_form(m)
    scale = max(1.0, float(np.abs(m.dS).max()))
    dS = m.dS / scale
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    A_eq = np.vstack([np.append(np.ones(n), 0.0), np.append(dS, 0.0)])
    try:
        res = solve_lp(
            c, A_ub, np.zeros(n), A_eq, [1.0, 0.0], bounds=[(0, 1)] * n + [(None, 1)]
        )
        t = res.x[-1]
    except LPInfeasible:
        # no probability vector at all is a martingale measure
        res, t = None, 0.0
    if t > 1e-12:
        q = res.x[:n]
        # project back onto {sum q = 1, <q, dS> = 0}; the LP is only feasible to ~1e-10
        A = A_eq[:, :n]
        if np.linalg.matrix_rank(A) == 2:
            q = q - A.T @ np.linalg.solve(A @ A.T, A @ q - np.array([1.0, 0.0]))
        if np.all(q > 0):
            return NoArbitrageReport(True, q, None, float(q.min()))
    if np.all(m.dS >= 0) and np.any(m.dS > 0):
        arb = 1.0
    elif np.all(m.dS <= 0) and np.any(m.dS < 0):
        arb = -1.0
    else:
        # mixed signs always admit an equivalent martingale measure
        raise ModelError("no-arbitrage LP returned a degenerate optimum for a two-sided market")
    return NoArbitrageReport(False, None, arb, float(t))


def _no_arbitrage_closed_form(m: FiniteMarket) -> NoArbitrageReport:
    """Witness ``q = p * w`` with one weight for up-states and one for down-states."""
    up, down = m.dS > 0, m.dS < 0
    if not (up.any() and down.any()):
        if not (up.any() or down.any()):
            return NoArbitrageReport(True, m.probs.copy(), None, float(m.probs.min()))
        return NoArbitrageReport(False, None, 1.0 if up.any() else -1.0, 0.0)
    gain_up = float(m.probs[up] @ m.dS[up])
    gain_down = float(-(m.probs[down] @ m.dS[down]))
    w = np.ones(m.n_states)
    w[up] = gain_down
    w[down] = gain_up
    q = m.probs * w
    q = q / q.sum()
    return NoArbitrageReport(True, q, None, float(q.min()))


def tilt_market(m: FiniteMarket, scale) -> FiniteMarket:
    """Scale the increment state by state: ``dS_n -> scale_n * dS_n``."""
    s = _vec(scale, "scale", m.n_states)
    if np.any(s <= 0):
        raise ArgumentError("tilt scale must be strictly positive")
    return FiniteMarket(m.probs, s * m.dS, m.endowment, m.claim, m.name, m.log_probs)


Rule = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CountableMarketFamily:
    """A market on the states ``0, 1, 2, ...`` given by closed-form rules."""

    name: str
    prob_rule: Rule
    dS_rule: Rule
    endowment_rule: Rule = lambda n: np.ones(np.shape(n))
    truncation_levels: tuple[int, ...] = (200, 500, 1000)
    log_prob_rule: Rule | None = None
    tail_rule: Callable[[int], float] | None = None

    def log_probs(self, n: np.ndarray) -> np.ndarray:
        if self.log_prob_rule is not None:
            return self.log_prob_rule(n)
        return np.log(self.prob_rule(n))

    def tail_mass(self, N: int) -> float:
        """Probability of the states beyond ``N``."""
        if self.tail_rule is not None:
            return float(self.tail_rule(N))
        return float(max(0.0, 1.0 - self.prob_rule(np.arange(N + 1)).sum()))

    def tilted(self, scale_rule: Rule, endowment_rule: Rule | None = None, name=None):
        """Family with ``dS_n -> scale_n dS_n`` and optionally a new endowment."""
        base_dS = self.dS_rule
        return CountableMarketFamily(
            name or f"{self.name}-tilted",
            self.prob_rule,
            lambda n: scale_rule(n) * base_dS(n),
            endowment_rule or self.endowment_rule,
            self.truncation_levels,
            self.log_prob_rule,
            self.tail_rule,
        )


def truncate(f: CountableMarketFamily, N: int, mode: str = "renormalize") -> FiniteMarket:
    """Restrict ``f`` to the states ``0..N``.

    ``mode="renormalize"`` divides the probabilities by their partial sum.
    ``mode="cemetery"`` keeps them and adds one extra state carrying the tail
    mass with ``dS = 0`` and the endowment of state ``N + 1``.
    """
    if int(N) != N or N < 2:
        raise ArgumentError(f"truncation level must be an integer >= 2, got {N}")
    N = int(N)
    n = np.arange(N + 1)
    logp = f.log_probs(n)
    dS = f.dS_rule(n)
    B = f.endowment_rule(n)
    if mode == "renormalize":
        top = logp.max()
        logz = top + np.log(np.exp(logp - top).sum())
        logp = logp - logz
    elif mode == "cemetery":
        tail = f.tail_mass(N)
        if tail <= 0:
            raise ArgumentError("cemetery truncation needs positive tail mass")
        logp = np.append(logp, np.log(tail))
        dS = np.append(dS, 0.0)
        B = np.append(B, f.endowment_rule(np.array([N + 1]))[0])
        # restore exact normalization lost to rounding in the closed-form tail
        top = logp.max()
        logp = logp - (top + np.log(np.exp(logp - top).sum()))
    else:
        raise ArgumentError(f"unknown truncation mode {mode!r}")
    probs = np.exp(logp)
    probs = probs / probs.sum()
    return FiniteMarket(probs, dS, B, None, f"{f.name}[{N}]", logp)


def _csw_log_probs(n):
    n = np.asarray(n)
    return np.where(n == 0, np.log(0.75), -n * np.log(2.0) - np.log(4.0))


def _csw_dS(n):
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(n == 0, 1.0, (1.0 - n) / np.where(n == 0, 1.0, n))


def csw_family() -> CountableMarketFamily:
    """p_0 = 3/4, p_n = 2**-n / 4 and dS_0 = 1, dS_n = (1-n)/n."""
    return CountableMarketFamily(
        name="csw",
        prob_rule=lambda n: np.exp(_csw_log_probs(n)),
        dS_rule=_csw_dS,
        endowment_rule=lambda n: np.ones(np.shape(n)),
        log_prob_rule=_csw_log_probs,
        tail_rule=lambda N: 2.0 ** (-N) / 4.0,
    )


_FAMILIES: dict[str, Callable[[], CountableMarketFamily]] = {"csw": csw_family}


def register_family(name: str, factory: Callable[[], CountableMarketFamily]) -> None:
    _FAMILIES[name] = factory


def get_family(name: str) -> CountableMarketFamily:
    try:
        return _FAMILIES[name]()
    except KeyError:
        raise ConfigError(f"unknown market family {name!r}; known: {sorted(_FAMILIES)}") from None


_MARKET_KEYS = {"probs", "dS", "endowment", "claim"}


def market_from_dict(d: dict) -> FiniteMarket:
    """Build a market from the JSON layout ``{probs, dS, endowment, claim}``.

    ``{"family": name, "level": N}`` refers to a registered countable family.
    """
    if not isinstance(d, dict):
        raise ConfigError("a market document must be a JSON object")
    if "family" in d:
        extra = set(d) - {"family", "level", "mode"}
        if extra:
            raise ConfigError(f"unknown market fields: {sorted(extra)}")
        return truncate(get_family(d["family"]), d.get("level", 200), d.get("mode", "renormalize"))
    extra = set(d) - _MARKET_KEYS
    missing = {"probs", "dS"} - set(d)
    if extra:
        raise ConfigError(f"unknown market fields: {sorted(extra)}")
    if missing:
        raise ConfigError(f"market is missing fields: {sorted(missing)}")
    n = len(d["probs"])
    return FiniteMarket(d["probs"], d["dS"], d.get("endowment", np.ones(n)), d.get("claim"))


def load_market(path: str | os.PathLike) -> FiniteMarket:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return market_from_dict(doc)

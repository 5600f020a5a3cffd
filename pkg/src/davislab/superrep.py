"""Superreplication, replicability and the least-element test.

A payoff ``psi`` is superreplicated by ``(x, pi)`` when ``x + pi * dS >= psi`` in
every state.  The cheapest such ``x`` is the superreplication price; by LP duality
it equals ``sup_Q E^Q[psi]`` over martingale measures, and the optimal
multipliers of the LP are such a ``Q``.

``psi`` is *uniquely* superreplicable when the set of dominating outcomes has a
least element that is itself an outcome ``x + pi * dS``.  We compute the
per-state infimum ``m_n = inf {x + pi dS_n : (x, pi) superreplicates psi}`` with
one auxiliary LP per state and check whether ``m`` is attainable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ArgumentError, InternalError, ModelError
from .lp import LPInfeasible, LPUnbounded, solve_lp
from .market import FiniteMarket, check_no_arbitrage

__all__ = [
    "Uniqueness",
    "SuperrepResult",
    "ReplicationCheck",
    "superreplicate",
    "subreplicate",
    "is_replicable",
    "lower_envelope",
]

FEAS_TOL = 1e-12


class Uniqueness(str, enum.Enum):
    UNIQUELY_SUPER = "UniquelySuper"
    NOT_UNIQUE = "NotUnique"
    REPLICABLE = "Replicable"


@dataclass
class SuperrepResult:
    price: float
    portfolio: float
    superrep_payoff: np.ndarray
    unique: Uniqueness
    certificate: dict = field(default_factory=dict)
    martingale_measure: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "price": self.price,
            "portfolio": self.portfolio,
            "superrep_payoff": self.superrep_payoff.tolist(),
            "unique": self.unique.value,
            "certificate": self.certificate,
        }


class ReplicationCheck(NamedTuple):
    replicable: bool
    psi0: float | None
    pi: float | None


def _payoff(m: FiniteMarket, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (m.n_states,):
        raise ArgumentError(f"payoff has shape {psi.shape}, expected ({m.n_states},)")
    if not np.all(np.isfinite(psi)):
        raise ArgumentError("payoff must be finite")
    return psi


def is_replicable(m: FiniteMarket, psi, *, tol=1e-10) -> ReplicationCheck:
    """Is ``psi = psi0 + pi * dS`` for some reals ``psi0, pi``?

    The representation is unique whenever ``dS`` is not constant; with ``dS``
    constant (no risk) the portfolio is reported as 0.
    """
    psi = _payoff(m, psi)
    scale = 1.0 + float(np.abs(psi).max())
    traded = np.ptp(m.dS) > 0
    if not traded:
        psi0 = float(psi.mean())
        ok = np.abs(psi - psi0).max() <= tol * scale
        return ReplicationCheck(bool(ok), psi0 if ok else None, 0.0 if ok else None)
    A = np.column_stack([np.ones(m.n_states), m.dS])
    coef, *_ = np.linalg.lstsq(A, psi, rcond=None)
    resid = float(np.abs(A @ coef - psi).max())
    if resid <= tol * scale * max(1.0, float(np.abs(m.dS).max())):
        return ReplicationCheck(True, float(coef[0]), float(coef[1]))
    return ReplicationCheck(False, None, None)


def _constraints(m: FiniteMarket, psi):
    # variables (x, pi):  -x - pi dS_n <= -psi_n
    A = -np.column_stack([np.ones(m.n_states), m.dS])
    return A, -psi


def _state_infimum(m: FiniteMarket, A, b, n: int, tol: float) -> float:
    try:
        res = solve_lp([1.0, m.dS[n]], A, b, tol=tol)
    except LPUnbounded:
        return -np.inf
    return res.value


def superreplicate(m: FiniteMarket, psi, *, check_unique=True, tol=1e-9, check_arbitrage=True) -> SuperrepResult:
    """Cheapest superreplicating portfolio of ``psi`` and the least-element test.

    Raises:
        ModelError: the market admits arbitrage.
        InternalError: the LP is infeasible or unbounded, which no-arbitrage rules out.
    """
    psi = _payoff(m, psi)
    if check_arbitrage and not check_no_arbitrage(m).ok:
        raise ModelError("market admits arbitrage")
    A, b = _constraints(m, psi)
    try:
        res = solve_lp([1.0, 0.0], A, b, tol=tol)
    except (LPInfeasible, LPUnbounded) as exc:
        raise InternalError(f"superreplication LP failed on a no-arbitrage market: {exc}") from exc
    x, pi = res.x
    q = np.clip(res.y_ub, 0.0, None)
    q_sum = q.sum()
    q = q / q_sum if q_sum > 0 else q
    price = float(q @ psi)
    if abs(price - x) > 10 * tol * (1.0 + abs(x)):
        raise InternalError(f"superreplication price {x} differs from the dual value {price}")
    payoff = x + pi * m.dS
    cert: dict = {"dual_value": price, "lp_gap": res.gap, "slackness": res.slackness}

    rep = is_replicable(m, psi)
    if rep.replicable:
        pi = rep.pi
        x = rep.psi0
        payoff = psi.copy()
        cert["representation"] = [rep.psi0, rep.pi]
        return SuperrepResult(float(x), float(pi), payoff, Uniqueness.REPLICABLE, cert, q)

    verdict = Uniqueness.NOT_UNIQUE
    if check_unique:
        # range of optimal portfolios at the minimal cost
        A_opt = np.vstack([A, [1.0, 0.0]])
        b_opt = np.append(b, x + 10 * tol * (1.0 + abs(x)))
        lo = solve_lp([0.0, 1.0], A_opt, b_opt, tol=tol).x[1]
        hi = solve_lp([0.0, -1.0], A_opt, b_opt, tol=tol).x[1]
        inf_vec = np.array([_state_infimum(m, A, b, n, tol) for n in range(m.n_states)])
        cert["optimal_portfolio_range"] = [float(lo), float(hi)]
        cert["state_infimum"] = inf_vec.tolist()
        attained = False
        if np.all(np.isfinite(inf_vec)):
            M = np.column_stack([np.ones(m.n_states), m.dS])
            coef, *_ = np.linalg.lstsq(M, inf_vec, rcond=None)
            resid = float(np.abs(M @ coef - inf_vec).max())
            cert["least_element_residual"] = resid
            attained = resid <= 1e3 * tol * (1.0 + float(np.abs(inf_vec).max()))
            if attained:
                x, pi = float(coef[0]), float(coef[1])
                payoff = x + pi * m.dS
                # a least outcome has minimal cost under every martingale measure,
                # so it coincides with the minimal-cost representation
                cert["representation"] = [x, pi]
        cert["least_element_attained"] = bool(attained)
        verdict = Uniqueness.UNIQUELY_SUPER if attained else Uniqueness.NOT_UNIQUE
    if np.any(payoff < psi - FEAS_TOL * (1.0 + np.abs(psi))):
        raise InternalError("superreplicating payoff fails to dominate the claim")
    return SuperrepResult(float(x) + 0.0, float(pi) + 0.0, payoff, verdict, cert, q)


def subreplicate(m: FiniteMarket, psi, **kw) -> SuperrepResult:
    """Sub-replication as the mirror of superreplication: ``-superreplicate(-psi)``."""
    r = superreplicate(m, -_payoff(m, psi), **kw)
    return SuperrepResult(-r.price, -r.portfolio, -r.superrep_payoff, r.unique, r.certificate, r.martingale_measure)


def lower_envelope(m, B, phi, eps: float, **kw) -> float:
    """``inf_Q E^Q[B + eps phi]`` on a finite market.

    When ``B`` and ``phi`` are callables of a scalar state parameter ``a`` (the
    Brownian examples), the envelope ``inf_a B(a) + eps phi(a)`` is returned
    instead; ``m`` is then ignored and ``domain`` sets the search interval.
    """
    if callable(B):
        from .brownian import EnvelopeFunctions, lower_envelope_fn

        domain = kw.pop("domain", (-50.0, 50.0))
        return lower_envelope_fn(EnvelopeFunctions(B, phi, domain), eps)
    psi = np.asarray(B, dtype=float) + eps * np.asarray(phi, dtype=float)
    return -superreplicate(m, -psi, check_unique=False, **kw).price

"""Primal and dual utility maximization on one-period finite markets.

With one risky asset both problems reduce to a scalar equation.  The primal
first-order condition reads ``G(pi) = sum_n p_n dS_n U'(B_n + pi dS_n) = 0`` and
the dual KKT system ``V'(Y_n) + B_n + eta dS_n = 0`` gives
``Y_n = U'(B_n + eta dS_n)`` with the martingale condition ``G(eta) = 0``.

``G`` is strictly decreasing on the open interval of portfolios that keep every
state's wealth positive and blows up at both ends.  Optimizers of truncated
countable models sit within ~1e-300 of an end of that interval, so both solvers
locate the root in the coordinate ``t = log(distance to the nearest end)``, where
the binding state's wealth ``e**t |dS_j|`` keeps full relative precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import InternalError, ModelError, NumericError
from .lp import LPInfeasible, LPResult, LPUnbounded, solve_lp
from .market import FiniteMarket, check_no_arbitrage
from .utility import Utility, UtilityKind

__all__ = [
    "PrimalSolution",
    "DualSolution",
    "solve_primal",
    "solve_dual",
    "duality_gap",
    "primal_value",
    "maximize_concave_1d",
    "global_minimize_1d",
    "solve_lp",
    "LPResult",
    "LPInfeasible",
    "LPUnbounded",
]

_T_FLOOR = -1.0e5  # far below any optimum reachable with p_n >= 1e-4000


class _ScalarProblem:
    """Wealth ``B + pi * dS`` and the marginal condition ``G`` on one market."""

    def __init__(self, log_p, dS, B, u: Utility):
        self.log_p = np.asarray(log_p, dtype=float)
        self.dS = np.asarray(dS, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.u = u
        self.p_exp = u._p - 1.0  # U'(w) = w**p_exp
        self.abs_dS = np.abs(self.dS)
        self.log_abs_dS = np.log(np.where(self.abs_dS > 0, self.abs_dS, 1.0))
        self.traded = self.abs_dS > 0
        up, down = self.dS > 0, self.dS < 0
        self.lo = float(np.max(-self.B[up] / self.dS[up])) if up.any() else -np.inf
        self.hi = float(np.min(self.B[down] / self.abs_dS[down])) if down.any() else np.inf
        self.G_scale = float(np.exp(logsumexp(self.log_p + self.log_abs_dS + self.p_exp * np.log(self.B))))

    def anchor(self, side: str):
        """Wealth at the boundary and the states that are ruined there."""
        bound = self.hi if side == "hi" else self.lo
        r = self.B + bound * self.dS
        if side == "hi":
            binding = (self.dS < 0) & (np.isclose(self.B / np.where(self.dS < 0, self.abs_dS, 1.0), bound, rtol=0, atol=0))
        else:
            binding = (self.dS > 0) & (np.isclose(-self.B / np.where(self.dS > 0, self.dS, 1.0), bound, rtol=0, atol=0))
        r = np.where(binding, 0.0, np.maximum(r, 0.0))
        return bound, r, binding

    def log_wealth_natural(self, pi: float) -> np.ndarray:
        w = self.B + pi * self.dS
        with np.errstate(divide="ignore"):
            return np.log(w)

    def log_wealth_offset(self, side: str, t: float, r, binding) -> np.ndarray:
        s = np.exp(t)
        # moving inward by s changes wealth by +s|dS| on the ruined side
        toward = -self.dS if side == "hi" else self.dS
        w = r + s * toward
        with np.errstate(divide="ignore"):
            logw = np.log(w)
        logw[binding] = t + self.log_abs_dS[binding]
        return logw

    def G_from_logw(self, logw) -> float:
        m = self.traded
        mags = self.log_p[m] + self.log_abs_dS[m] + self.p_exp * logw[m]
        sgn = np.sign(self.dS[m])
        pos = mags[sgn > 0]
        neg = mags[sgn < 0]
        a = np.exp(logsumexp(pos)) if pos.size else 0.0
        b = np.exp(logsumexp(neg)) if neg.size else 0.0
        return float(a - b)

    def dG_dpi_from_logw(self, logw) -> float:
        # dG/dpi = sum p dS^2 (p_exp) w^(p_exp-1) < 0
        m = self.traded
        mags = self.log_p[m] + 2 * self.log_abs_dS[m] + (self.p_exp - 1.0) * logw[m]
        return float(self.p_exp * np.exp(logsumexp(mags))) if m.any() else 0.0

    def value_from_logw(self, logw) -> float:
        if self.u.kind is UtilityKind.LOG:
            return float(np.exp(self.log_p) @ logw)
        g = self.u.gamma
        if g < 0 and np.isinf(logw).any():
            return -np.inf
        return float(np.exp(logsumexp(self.log_p + g * logw)) / g)


@dataclass
class _Root:
    pi: float
    side: str | None
    log_offset: float | None
    logw: np.ndarray
    residual: float
    iterations: int


def _newton_in_offset(prob: _ScalarProblem, side: str, t_max: float, tol: float, max_iter=200):
    """Safeguarded Newton with bisection fallback in ``t = log(offset)``."""
    bound, r, binding = prob.anchor(side)
    # F(t) increasing in t on both sides after the sign flip below
    sgn = 1.0 if side == "hi" else -1.0

    def F(t):
        logw = prob.log_wealth_offset(side, t, r, binding)
        return sgn * prob.G_from_logw(logw), logw

    def dF(t, logw):
        # |dG/dpi| * |dpi/dt| in log space; dG/dpi < 0 and dpi/dt = -+e**t
        m = prob.traded
        mags = prob.log_p[m] + 2 * prob.log_abs_dS[m] + (prob.p_exp - 1.0) * logw[m]
        with np.errstate(over="ignore"):
            return float(np.exp(logsumexp(mags) + t) * (1.0 - prob.u._p))

    b = t_max
    Fb, logw_b = F(b)
    if Fb <= 0:
        raise InternalError("root is not on the requested side of the midpoint")
    a, step = b - 1.0, 1.0
    Fa, logw_a = F(a)
    while Fa > 0:
        if a <= _T_FLOOR:
            raise NumericError(f"no sign change of the marginal condition above log-offset {_T_FLOOR}")
        step *= 2.0
        a = max(b - step, _T_FLOOR)
        Fa, logw_a = F(a)
    t, Ft, logw = (a, Fa, logw_a) if abs(Fa) < abs(Fb) else (b, Fb, logw_b)
    it = 0
    for it in range(1, max_iter + 1):
        if abs(Ft) <= tol * prob.G_scale:
            break
        d = dF(t, logw)
        cand = t - Ft / d if d > 0 else np.nan
        if not (np.isfinite(cand) and a < cand < b):
            cand = 0.5 * (a + b)
        Fc, logw_c = F(cand)
        if Fc > 0:
            b = cand
        else:
            a = cand
        t, Ft, logw = cand, Fc, logw_c
        if b - a <= 4e-16 * max(1.0, abs(t)):
            break
    s = np.exp(t)
    pi = bound - s if side == "hi" else bound + s
    return _Root(pi, side, t, logw, abs(Ft), it)


def _solve_foc(prob: _ScalarProblem, tol: float) -> _Root:
    if not prob.traded.any():
        return _Root(0.0, None, None, np.log(prob.B), 0.0, 0)
    G0 = prob.G_from_logw(prob.log_wealth_natural(0.0))
    if G0 == 0.0:
        return _Root(0.0, None, None, prob.log_wealth_natural(0.0), 0.0, 0)
    side = "hi" if G0 > 0 else "lo"
    bound = prob.hi if side == "hi" else prob.lo
    if not np.isfinite(bound):
        raise ModelError("utility is unbounded: the market has a one-sided increment")
    return _newton_in_offset(prob, side, float(np.log(abs(bound))), tol)


def _endowment(m: FiniteMarket, endowment):
    B = m.endowment if endowment is None else np.asarray(endowment, dtype=float)
    if B.shape != m.probs.shape:
        raise ModelError("endowment does not match the number of states")
    return m.require_valid_endowment(B)


@dataclass
class PrimalSolution:
    pi_hat: float
    X_hat: np.ndarray
    value: float
    foc_residual: float
    log_X_hat: np.ndarray = field(repr=False)
    side: str | None = None
    log_offset: float | None = None
    iterations: int = 0

    @property
    def min_wealth(self) -> float:
        return float(self.X_hat.min())


@dataclass
class DualSolution:
    density: np.ndarray
    eta: float
    total_mass: float
    value: float
    kkt_residual: float
    weights: np.ndarray = field(repr=False)
    log_density: np.ndarray = field(repr=False)
    brackets: int = 0

    def pairing(self, x) -> float:
        """``<mu, x>`` for the dual measure ``mu = density * P``."""
        return float(self.weights @ np.asarray(x, dtype=float))

    def price(self, x) -> float:
        """Expectation of ``x`` under the normalized dual measure."""
        return self.pairing(x) / self.total_mass


def solve_primal(m: FiniteMarket, u: Utility, endowment=None, *, tol=1e-13, check_arbitrage=True):
    """Maximize ``sum_n p_n U(B_n + pi dS_n)`` over admissible ``pi``.

    Raises:
        ModelError: the market admits arbitrage or ``B`` is not positive.
    """
    B = _endowment(m, endowment)
    if check_arbitrage and not check_no_arbitrage(m).ok:
        raise ModelError("market admits arbitrage")
    prob = _ScalarProblem(m.log_probs, m.dS, B, u)
    root = _solve_foc(prob, tol)
    value = prob.value_from_logw(root.logw)
    if not np.isfinite(value):
        raise InternalError("primal objective is not finite at the optimizer")
    return PrimalSolution(
        pi_hat=float(root.pi),
        X_hat=np.exp(root.logw),
        value=value,
        foc_residual=root.residual,
        log_X_hat=root.logw,
        side=root.side,
        log_offset=root.log_offset,
        iterations=root.iterations,
    )


def primal_value(m: FiniteMarket, u: Utility, endowment=None, **kw) -> float:
    """``U(B) = sup_pi E[U(B + pi dS)]``; arbitrage is checked once by the caller."""
    kw.setdefault("check_arbitrage", False)
    return solve_primal(m, u, endowment, **kw).value


def _dual_value(prob: _ScalarProblem, log_Y, weights, B) -> float:
    u = prob.u
    p = np.exp(prob.log_p)
    if u.kind is UtilityKind.LOG:
        V = -1.0 - log_Y
        return float(p @ V + weights @ B)
    g = u.gamma
    mags = prob.log_p + (g / (g - 1.0)) * log_Y
    return float(np.exp(logsumexp(mags)) * (1.0 - g) / g + weights @ B)


def solve_dual(m: FiniteMarket, u: Utility, endowment=None, *, eta0=0.0, tol=1e-13, check_arbitrage=True):
    """Minimize ``E[V(Y)] + E[Y B]`` over ``Y >= 0`` with ``E[Y dS] = 0``.

    The multiplier ``eta`` of the martingale constraint is found by expanding a
    bracket geometrically around ``eta0`` until ``g(eta) = E[Y(eta) dS]`` changes
    sign.  A bracket that reaches the edge of the domain of ``eta`` is finished
    in the log-offset coordinate of that edge.
    """
    B = _endowment(m, endowment)
    if check_arbitrage and not check_no_arbitrage(m).ok:
        raise ModelError("market admits arbitrage")
    prob = _ScalarProblem(m.log_probs, m.dS, B, u)
    scale = prob.G_scale
    brackets = 0

    if not prob.traded.any():
        eta, logw = 0.0, np.log(B)
    else:
        lo, hi = prob.lo, prob.hi
        eta0 = float(np.clip(eta0, lo + 0.5 * (0 - lo), hi - 0.5 * hi))

        def g(e):
            return prob.G_from_logw(prob.log_wealth_natural(e))

        g0 = g(eta0)
        width = 1e-3 * max(1.0, abs(eta0))
        a, b = eta0, eta0
        ga = gb = g0
        edge = None
        while ga * gb > 0 or (ga == gb == 0 and False):
            brackets += 1
            width *= 2.0
            if g0 > 0:
                a, ga = b, gb
                b = eta0 + width
                if b >= hi:
                    edge = "hi"
                    break
                gb = g(b)
            else:
                b, gb = a, ga
                a = eta0 - width
                if a <= lo:
                    edge = "lo"
                    break
                ga = g(a)
            if g0 == 0:
                break
        if g0 == 0:
            eta, logw = eta0, prob.log_wealth_natural(eta0)
        elif edge is None:
            eta = brentq(g, a, b, xtol=1e-15, rtol=8.9e-16, maxiter=500)
            logw = prob.log_wealth_natural(eta)
        else:
            inner = a if edge == "hi" else b  # last point known to be inside, sign of g0
            bound, r, binding = prob.anchor(edge)
            sgn = 1.0 if edge == "hi" else -1.0

            def F(t):
                return sgn * prob.G_from_logw(prob.log_wealth_offset(edge, t, r, binding))

            t_hi = float(np.log(abs(bound - inner)))
            if F(t_hi) <= 0:
                raise NumericError(f"dual bracket lost its sign at the {edge} edge")
            step, t_lo = 1.0, t_hi - 1.0
            while F(t_lo) > 0:
                brackets += 1
                if t_lo <= _T_FLOOR:
                    raise NumericError(
                        f"dual multiplier bracket failed: g > 0 down to log-offset {_T_FLOOR} "
                        f"from the {edge} edge {bound:g}"
                    )
                step *= 2.0
                t_lo = max(t_hi - step, _T_FLOOR)
            t = brentq(F, t_lo, t_hi, xtol=1e-14, rtol=8.9e-16, maxiter=500)
            logw = prob.log_wealth_offset(edge, t, r, binding)
            eta = bound - np.exp(t) if edge == "hi" else bound + np.exp(t)

    log_Y = prob.p_exp * logw
    log_weights = prob.log_p + log_Y
    weights = np.exp(log_weights)
    total = float(np.exp(logsumexp(log_weights)))
    resid = abs(prob.G_from_logw(logw))
    if resid > 1e-9 * max(scale, 1.0):
        raise NumericError(f"dual martingale residual {resid:.3e} above tolerance")
    with np.errstate(over="ignore"):
        density = np.exp(log_Y)
    return DualSolution(
        density=density,
        eta=float(eta),
        total_mass=total,
        value=_dual_value(prob, log_Y, weights, B),
        kkt_residual=resid,
        weights=weights,
        log_density=log_Y,
        brackets=brackets,
    )


def duality_gap(p: PrimalSolution, d: DualSolution) -> float:
    """``V(B) - U(B)``; nonnegative by weak duality, zero on finite markets."""
    return d.value - p.value


def maximize_concave_1d(f, lo: float, hi: float, *, xtol=1e-12, max_iter=500):
    """Golden-section search for the maximum of a concave ``f`` on ``[lo, hi]``.

    Returns ``(argmax, max)``.  Used as the oracle for the Newton solvers and
    for the small policy searches in the Monte-Carlo pipelines.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= xtol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc >= fd else d
    return x, max(fc, fd)


def global_minimize_1d(f, lo: float, hi: float, *, n_grid=4001, xtol=1e-12):
    """Minimize a continuous, possibly non-convex ``f`` on ``[lo, hi]``.

    A uniform grid locates the best cell, then bounded Brent refines inside the
    two neighbouring cells.  ``f`` must accept numpy arrays.  Returns
    ``(argmin, min, at_edge)`` where ``at_edge`` flags a minimizer on the
    boundary of the search interval.
    """
    from scipy.optimize import minimize_scalar

    grid = np.linspace(lo, hi, n_grid)
    vals = np.asarray(f(grid), dtype=float)
    k = int(np.argmin(vals))
    best_x, best_v = grid[k], vals[k]
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    if b > a:
        res = minimize_scalar(lambda x: float(f(np.array([x]))[0]), bounds=(a, b), method="bounded",
                              options={"xatol": xtol})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    step = grid[1] - grid[0]
    at_edge = best_x - lo <= step or hi - best_x <= step
    return float(best_x), float(best_v), bool(at_edge)

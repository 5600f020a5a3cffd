"""Small dense linear programs with primal-dual certificates.

Problems have the form::

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lo <= x <= hi          (None means unbounded)

The optimizer is HiGHS through :func:`scipy.optimize.linprog`.  On top of it we
report the dual multipliers with the sign convention of the Lagrangian
``c @ x + y_ub @ (A_ub x - b_ub) + y_eq @ (A_eq x - b_eq)`` (so ``y_ub >= 0``),
check complementary slackness, and build Farkas certificates when the problem is
infeasible or unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ArgumentError, NumericError

__all__ = ["LPResult", "LPInfeasible", "LPUnbounded", "solve_lp"]

MAX_VARIABLES = 200


class LPInfeasible(NumericError):
    """Raised with a Farkas certificate ``(y_ub, y_eq)``.

    The certificate satisfies ``y_ub >= 0``, ``A_ub.T y_ub + A_eq.T y_eq = 0``
    (bounds folded into ``A_ub``) and ``b_ub @ y_ub + b_eq @ y_eq < 0``.
    """

    def __init__(self, message, certificate):
        super().__init__(message)
        self.certificate = certificate


class LPUnbounded(NumericError):
    """Raised with a recession ray ``d``: feasible direction with ``c @ d < 0``."""

    def __init__(self, message, ray):
        super().__init__(message)
        self.ray = ray


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    y_ub: np.ndarray
    y_eq: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    dual_value: float
    slackness: float
    extras: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return abs(self.value - self.dual_value)


def _as2d(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] != n:
        raise ArgumentError(f"constraint matrix has {a.shape[1]} columns, expected {n}")
    return a


def _as1d(b, m):
    if b is None:
        return np.zeros(m)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (m,):
        raise ArgumentError(f"right-hand side has shape {b.shape}, expected ({m},)")
    return b


def _normalize_bounds(bounds, n):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    if isinstance(bounds, tuple) and len(bounds) == 2 and np.ndim(bounds[0]) == 0:
        bounds = [bounds] * n
    lo = np.array([-np.inf if b[0] is None else float(b[0]) for b in bounds])
    hi = np.array([np.inf if b[1] is None else float(b[1]) for b in bounds])
    if lo.shape != (n,):
        raise ArgumentError("one (lo, hi) pair per variable is required")
    return lo, hi


def _fold_bounds(A_ub, b_ub, lo, hi):
    rows, rhs = [A_ub], [b_ub]
    n = A_ub.shape[1]
    eye = np.eye(n)
    fin_hi = np.isfinite(hi)
    fin_lo = np.isfinite(lo)
    rows += [eye[fin_hi], -eye[fin_lo]]
    rhs += [hi[fin_hi], -lo[fin_lo]]
    return np.vstack(rows), np.concatenate(rhs)


def _farkas(A, b, E, e):
    """Find y >= 0, z with A.T y + E.T z = 0 and b @ y + e @ z = -1."""
    m, k = A.shape[0], E.shape[0]
    n = A.shape[1]
    lhs = np.vstack([np.hstack([A.T, E.T]), np.concatenate([b, e])[None, :]])
    rhs = np.concatenate([np.zeros(n), [-1.0]])
    res = linprog(
        np.zeros(m + k),
        A_eq=lhs,
        b_eq=rhs,
        bounds=[(0, None)] * m + [(None, None)] * k,
        method="highs",
    )
    if res.status != 0:
        return None
    return res.x[:m], res.x[m:]


def _ray(c, A, E):
    """Find d with A d <= 0, E d = 0, c @ d = -1."""
    n = c.size
    res = linprog(
        np.zeros(n),
        A_ub=A if A.size else None,
        b_ub=np.zeros(A.shape[0]) if A.size else None,
        A_eq=np.vstack([E, c[None, :]]),
        b_eq=np.concatenate([np.zeros(E.shape[0]), [-1.0]]),
        bounds=[(-1e6, 1e6)] * n,
        method="highs",
    )
    return None if res.status != 0 else res.x


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, *, tol=1e-9):
    """Solve a small dense LP and return the primal-dual pair.

    ``bounds`` defaults to free variables (unlike :func:`scipy.optimize.linprog`).

    Raises:
        LPInfeasible: with a Farkas certificate.
        LPUnbounded: with a recession ray.
        NumericError: if the solver stalls or slackness exceeds ``tol``.
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    n = c.size
    if n > MAX_VARIABLES:
        raise ArgumentError(f"solve_lp handles at most {MAX_VARIABLES} variables, got {n}")
    A = _as2d(A_ub, n)
    b = _as1d(b_ub, A.shape[0])
    E = _as2d(A_eq, n)
    e = _as1d(b_eq, E.shape[0])
    lo, hi = _normalize_bounds(bounds, n)

    res = linprog(
        c,
        A_ub=A if A.shape[0] else None,
        b_ub=b if A.shape[0] else None,
        A_eq=E if E.shape[0] else None,
        b_eq=e if E.shape[0] else None,
        bounds=list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None))),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status == 2:
        Af, bf = _fold_bounds(A, b, lo, hi)
        cert = _farkas(Af, bf, E, e)
        raise LPInfeasible("linear program is infeasible", cert)
    if res.status == 3:
        Af, _ = _fold_bounds(A, b, lo, hi)
        raise LPUnbounded("linear program is unbounded", _ray(c, Af, E))
    if res.status != 0:
        raise NumericError(f"LP solver failed: {res.message}")

    x = res.x
    # scipy reports d(value)/d(rhs); the Lagrangian multipliers are their negatives
    y_ub = -res.ineqlin.marginals if A.shape[0] else np.zeros(0)
    y_eq = -res.eqlin.marginals if E.shape[0] else np.zeros(0)
    y_lo = res.lower.marginals.copy()
    y_hi = -res.upper.marginals
    y_lo[~np.isfinite(lo)] = 0.0
    y_hi[~np.isfinite(hi)] = 0.0
    lo_term = np.where(np.isfinite(lo), lo, 0.0) @ y_lo
    hi_term = np.where(np.isfinite(hi), hi, 0.0) @ y_hi
    dual_value = float(-(b @ y_ub) - (e @ y_eq) + lo_term - hi_term)

    slack_ub = b - A @ x if A.shape[0] else np.zeros(0)
    comp = [np.abs(y_ub * slack_ub)]
    if np.isfinite(lo).any():
        comp.append(np.abs(y_lo * np.where(np.isfinite(lo), x - lo, 0.0)))
    if np.isfinite(hi).any():
        comp.append(np.abs(y_hi * np.where(np.isfinite(hi), hi - x, 0.0)))
    slackness = float(max((v.max() if v.size else 0.0) for v in comp))
    value = float(c @ x)
    scale = 1.0 + abs(value)
    if slackness > tol * scale * 10 or abs(value - dual_value) > tol * scale * 10:
        raise NumericError(
            f"LP certificate check failed: slackness {slackness:.3e}, "
            f"gap {abs(value - dual_value):.3e}"
        )
    return LPResult(x, value, y_ub, y_eq, y_lo, y_hi, dual_value, slackness)

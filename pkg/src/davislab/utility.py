"""CRRA utilities on the positive half-line and their convex conjugates.

Two families are supported:

    Log:    U(x) = log x
    Power:  U(x) = x**gamma / gamma,   gamma < 1, gamma != 0

For both, ``U'(0+) = inf`` and ``U'(inf) = 0``.  Outside ``(0, inf)`` the
utility is extended by ``U(x) = -inf`` for ``x < 0`` and ``U(0) = inf_{x>0} U``,
so evaluating a portfolio that ruins the investor is never an error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .errors import ArgumentError, DomainError

__all__ = [
    "UtilityKind",
    "Utility",
    "Conjugate",
    "ElasticityReport",
    "evaluate",
    "marginal",
    "inverse_marginal",
    "conjugate_value",
    "conjugate_derivative",
    "check_reasonable_elasticity",
    "log_utility",
    "power_utility",
]

NEG_INF = -np.inf


class UtilityKind(str, enum.Enum):
    LOG = "log"
    POWER = "power"


@dataclass(frozen=True)
class Utility:
    """A member of the CRRA family.

    ``gamma`` is only meaningful for ``kind == POWER`` and must satisfy
    ``gamma < 1`` and ``gamma != 0``.
    """

    kind: UtilityKind = UtilityKind.LOG
    gamma: float | None = None

    def __post_init__(self):
        kind = UtilityKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is UtilityKind.POWER:
            if self.gamma is None:
                raise ArgumentError("power utility needs a gamma")
            g = float(self.gamma)
            if not np.isfinite(g) or g >= 1.0 or g == 0.0:
                raise ArgumentError(f"power utility needs gamma < 1, gamma != 0; got {g}")
            object.__setattr__(self, "gamma", g)
        else:
            object.__setattr__(self, "gamma", None)

    @property
    def conjugate(self) -> Conjugate:
        return Conjugate(self)

    # the exponent of U' = x**(p-1); 0 plays the role of log
    @property
    def _p(self) -> float:
        return 0.0 if self.kind is UtilityKind.LOG else self.gamma

    def __call__(self, x):
        return evaluate(self, x)

    def marginal(self, x):
        return marginal(self, x)

    def inverse_marginal(self, y):
        return inverse_marginal(self, y)

    def log_marginal(self, log_x):
        """``log U'(x)`` from ``log x``; stays finite where ``x`` underflows."""
        return (self._p - 1.0) * np.asarray(log_x, dtype=float)

    def from_log(self, log_x):
        """``U(x)`` from ``log x``."""
        log_x = np.asarray(log_x, dtype=float)
        if self.kind is UtilityKind.LOG:
            return log_x
        return np.exp(self.gamma * log_x) / self.gamma

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return (self._p - 1.0) * x ** (self._p - 2.0)

    def describe(self) -> dict:
        if self.kind is UtilityKind.LOG:
            return {"utility": "log"}
        return {"utility": "power", "gamma": self.gamma}


def log_utility() -> Utility:
    return Utility(UtilityKind.LOG)


def power_utility(gamma: float) -> Utility:
    return Utility(UtilityKind.POWER, gamma)


@dataclass(frozen=True)
class Conjugate:
    """``V(y) = sup_{x>0} (U(x) - x y)`` for the owning utility."""

    owner: Utility = field(default_factory=log_utility)

    def __call__(self, y):
        return conjugate_value(self, y)

    def derivative(self, y):
        return conjugate_derivative(self, y)


def _scalar_or_array(x: np.ndarray, was_scalar: bool):
    return float(x[0]) if was_scalar else x


def evaluate(u: Utility, x: ArrayLike):
    """U(x), extended to the whole real line with the ``-inf`` sentinel."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.full(x.shape, NEG_INF)
    pos = x > 0
    if u.kind is UtilityKind.LOG:
        out[pos] = np.log(x[pos])
    else:
        out[pos] = x[pos] ** u.gamma / u.gamma
        if u.gamma > 0:
            out[x == 0] = 0.0
    return _scalar_or_array(out, scalar)


def marginal(u: Utility, x: ArrayLike):
    """U'(x) for x > 0."""
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise DomainError("marginal utility is defined on (0, inf) only")
    return _scalar_or_array(x ** (u._p - 1.0), scalar)


def inverse_marginal(u: Utility, y: ArrayLike):
    """I(y) = (U')^{-1}(y): 1/y for log, y**(1/(gamma-1)) for power."""
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(~(y > 0)):
        raise DomainError("inverse marginal utility needs y > 0")
    return _scalar_or_array(y ** (1.0 / (u._p - 1.0)), scalar)


def conjugate_value(c: Conjugate | Utility, y: ArrayLike):
    """Closed-form V(y).

    Log: ``-1 - log y``.  Power: ``y**(g/(g-1)) * (1-g)/g``.
    """
    u = c.owner if isinstance(c, Conjugate) else c
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(~(y > 0)):
        raise DomainError("the conjugate is evaluated on y > 0 only")
    if u.kind is UtilityKind.LOG:
        out = -1.0 - np.log(y)
    else:
        g = u.gamma
        out = y ** (g / (g - 1.0)) * (1.0 - g) / g
    return _scalar_or_array(out, scalar)


def conjugate_derivative(c: Conjugate | Utility, y: ArrayLike):
    """V'(y) = -I(y)."""
    u = c.owner if isinstance(c, Conjugate) else c
    return -inverse_marginal(u, y)


@dataclass(frozen=True)
class ElasticityReport:
    reasonable: bool
    elasticity: float
    grid: tuple[float, ...]
    ratios: tuple[float, ...]


def check_reasonable_elasticity(u: Utility, exponents=range(3, 9)) -> ElasticityReport:
    """Asymptotic elasticity ``limsup x U'(x) / U(x)``.

    The closed form is ``gamma`` for power and ``0`` for log; the ratio is also
    evaluated at ``x = 10**k`` so callers can see the approach.
    """
    grid = np.array([10.0**k for k in exponents])
    ratios = grid * marginal(u, grid) / evaluate(u, grid)
    closed = 0.0 if u.kind is UtilityKind.LOG else u.gamma
    return ElasticityReport(
        reasonable=closed < 1.0,
        elasticity=closed,
        grid=tuple(grid.tolist()),
        ratios=tuple(np.asarray(ratios).tolist()),
    )


def utility_from_spec(name: str, gamma: float | None = None) -> Utility:
    name = name.lower()
    if name == "log":
        return log_utility()
    if name == "power":
        if gamma is None:
            raise ArgumentError("--gamma is required for power utility")
        return power_utility(gamma)
    raise ArgumentError(f"unknown utility {name!r}")

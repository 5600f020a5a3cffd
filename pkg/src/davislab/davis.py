"""Davis prices: irrelevance, price intervals and the truncated CSW sweep.

A price ``p`` for the claim ``phi`` is a Davis price given the endowment ``B``
when trading ``eps`` units of the claim at ``p`` never raises the optimal
expected utility: ``U(B + eps (phi - p)) <= U(B)`` for every ``eps``.  The set of
such prices is a compact interval.  On finite markets it collapses to a point
and we compute it four ways (dual measure, supergradient of the value
function, one-sided stencils, projection of the 2-d marginal price) so the
methods can cross-check each other.
"""

from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .differences import DerivativeEstimate, central_derivative, one_sided_derivative, three_point_one_sided
from .errors import ArgumentError, ConfigError, NumericError
from .lp import LPUnbounded, solve_lp
from .market import CountableMarketFamily, FiniteMarket, csw_family, truncate
from .optim import DualSolution, PrimalSolution, primal_value, solve_dual, solve_primal
from .utility import Utility, log_utility

__all__ = [
    "DavisMethod",
    "DavisInterval",
    "PerturbationCone",
    "is_irrelevant",
    "davis_interval_finite",
    "davis_interval_fd",
    "directional_derivative_lp",
    "interval_via_supergradient",
    "interval_derb",
    "projection_price",
    "OscillatingTestFunction",
    "find_oscillating_test_function",
    "SweepReport",
    "csw_sweep",
    "TEST_FUNCTIONS",
]

SUPERGRADIENT_STEPS = (1e-2, 5e-3, 2.5e-3)


class DavisMethod(str, enum.Enum):
    DUAL_SWEEP = "DualSweep"
    SUPERGRADIENT = "Supergradient"
    DERB_FORMULA = "DerbFormula"
    FINITE_DIFFERENCE = "FiniteDifference"


@dataclass
class DavisInterval:
    p_low: float
    p_high: float
    method: DavisMethod
    y_B: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p_low > self.p_high + 1e-9:
            raise NumericError(f"inverted Davis interval [{self.p_low}, {self.p_high}]")

    @property
    def width(self) -> float:
        return self.p_high - self.p_low

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.p_low + self.p_high)

    def contains(self, p: float, tol: float = 0.0) -> bool:
        return self.p_low - tol <= p <= self.p_high + tol

    def to_dict(self) -> dict:
        return {
            "p_low": self.p_low,
            "p_high": self.p_high,
            "method": self.method.value,
            "y_B": self.y_B,
            "diagnostics": {k: _jsonable(v) for k, v in self.diagnostics.items()},
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _vectors(m: FiniteMarket, B, phi):
    B = m.endowment if B is None else np.asarray(B, dtype=float)
    phi = m.claim if phi is None else np.asarray(phi, dtype=float)
    if phi is None:
        raise ArgumentError("no claim given and the market carries none")
    if B.shape != (m.n_states,) or phi.shape != (m.n_states,):
        raise ArgumentError("endowment and claim must have one entry per state")
    m.require_valid_endowment(B)
    return B, phi


def _eps_max(B, phi) -> float:
    return 0.5 * float(np.min(B)) / max(float(np.abs(phi).max()), 1.0)


@dataclass
class PerturbationCone:
    """Directions ``delta`` with ``pi_hat + eps delta`` admissible for ``B + eps phi``.

    With one asset the set is an interval ``[lo, hi]`` of reals: every state
    imposes ``X_hat_n + eps (phi_n + delta dS_n) >= 0``.
    """

    market: FiniteMarket
    X_hat: np.ndarray
    phi: np.ndarray
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ArgumentError("perturbation size must be positive")

    def bounds(self) -> tuple[float, float]:
        dS = self.market.dS
        rhs = -(self.X_hat / self.eps + self.phi)  # delta dS_n >= rhs_n
        lo, hi = -np.inf, np.inf
        up, down = dS > 0, dS < 0
        if up.any():
            lo = float(np.max(rhs[up] / dS[up]))
        if down.any():
            hi = float(np.min(rhs[down] / dS[down]))
        flat = dS == 0
        if np.any(rhs[flat] > 0):
            return np.inf, -np.inf
        return lo, hi

    def contains(self, delta: float) -> bool:
        w = self.X_hat + self.eps * (self.phi + delta * self.market.dS)
        return bool(np.all(w >= 0))

    def describe(self) -> dict:
        lo, hi = self.bounds()
        return {"eps": self.eps, "delta_low": lo, "delta_high": hi, "empty": lo > hi}


def is_irrelevant(m: FiniteMarket, u: Utility, B, R, eps_grid=None, *, tol=1e-9) -> bool:
    """Does adding ``eps R`` to the endowment never help, for small ``|eps|``?

    Checks ``U(B + eps R) <= U(B) + tol + 1e-6 eps**2`` on the grid, by default
    ``+-{1e-1, 1e-2, 1e-3}``.  Grid points that push the endowment out of the
    positive orthant are dropped with a warning.
    """
    B = np.asarray(B, dtype=float)
    R = np.asarray(R, dtype=float)
    m.require_valid_endowment(B)
    grid = np.asarray(eps_grid if eps_grid is not None else [s * e for e in (1e-1, 1e-2, 1e-3) for s in (1, -1)])
    ok = np.array([np.all(B + e * R > 0) for e in grid])
    if not ok.all():
        warnings.warn(f"dropping eps {grid[~ok].tolist()}: endowment would leave the positive orthant",
                      RuntimeWarning, stacklevel=2)
        grid = grid[ok]
    if grid.size == 0:
        raise ArgumentError("no admissible eps left in the irrelevance grid")
    base = primal_value(m, u, B, check_arbitrage=True)
    for e in grid:
        if primal_value(m, u, B + e * R) > base + tol + 1e-6 * e * e:
            return False
    return True


def davis_interval_finite(m: FiniteMarket, u: Utility, B=None, phi=None, *, dual: DualSolution | None = None) -> DavisInterval:
    """The singleton ``<Y_hat P, phi> / y_B`` of the unique dual minimizer."""
    B, phi = _vectors(m, B, phi)
    d = dual or solve_dual(m, u, B)
    p = d.price(phi)
    return DavisInterval(p, p, DavisMethod.DUAL_SWEEP, d.total_mass,
                         {"kkt_residual": d.kkt_residual, "eta": d.eta})


def directional_derivative_lp(m: FiniteMarket, u: Utility, B=None, phi=None, *,
                              primal: PrimalSolution | None = None, dual: DualSolution | None = None,
                              tol=1e-9) -> float:
    """``sup_delta E[Y_hat (delta dS + phi)]`` over the admissible perturbation cone.

    The cone only constrains states where the optimal wealth vanishes; since
    ``E[Y_hat dS] = 0`` the value is ``E[Y_hat phi]``.  A nonzero ``E[Y_hat dS]``
    with an unconstrained direction makes the LP unbounded, which means the dual
    solution violates its martingale constraint.
    """
    B, phi = _vectors(m, B, phi)
    p = primal or solve_primal(m, u, B)
    d = dual or solve_dual(m, u, B)
    c = float(d.weights @ m.dS)
    scale = float(d.weights @ np.abs(m.dS)) + 1e-300
    if abs(c) <= tol * scale:
        c = 0.0
    ruined = p.X_hat == 0
    A_ub = -m.dS[ruined][:, None] if ruined.any() else None  # -(delta dS_n) <= phi_n
    b_ub = phi[ruined] if ruined.any() else None
    try:
        res = solve_lp([-c], A_ub, b_ub, tol=tol)
    except LPUnbounded as exc:
        raise NumericError(
            f"directional-derivative LP is unbounded along {exc.ray}: E[Y dS] = {c:.3e} "
            "violates the dual martingale constraint"
        ) from exc
    return float(d.weights @ phi) - res.value


def _finite_value_fn(m: FiniteMarket, u: Utility, B, phi):
    def value(eps, x):
        return primal_value(m, u, B + x + eps * phi)

    return value


def interval_via_supergradient(target, phi=None, *, u: Utility | None = None, B=None,
                               steps=SUPERGRADIENT_STEPS, x_step=None, refine=None) -> DavisInterval:
    """``[d_{eps+} u, d_{eps-} u] / d_x u`` at the origin of ``u(eps, x)``.

    ``target`` is either a finite market (then ``u`` and optionally ``B`` and
    ``phi`` are required) or a value function ``(eps, x) -> float``.  One-sided
    eps-derivatives use Richardson-extrapolated quotients on ``steps``; the
    cash derivative is a central difference.  For a market the steps are
    refined by factors of 10 (at most ``refine`` times, default 3) while the
    error bound keeps dropping; a value function is differenced on ``steps``
    only, unless ``refine`` is given.
    """
    if isinstance(target, FiniteMarket):
        if u is None:
            raise ArgumentError("a utility is required with a market")
        B, phi = _vectors(target, B, phi)
        primal_value(target, u, B, check_arbitrage=True)
        value = _finite_value_fn(target, u, B, phi)
        limit = _eps_max(B, phi)
        h = np.asarray(steps, dtype=float)
        if h[0] > limit:
            h = h * (limit / h[0])
        refine = 3 if refine is None else refine
    elif callable(target):
        value = target
        h = np.asarray(steps, dtype=float)
        refine = refine or 0
    else:
        raise ArgumentError("target must be a FiniteMarket or a value function")
    f0 = value(0.0, 0.0)
    fe = lambda e: value(e, 0.0)
    d_plus = one_sided_derivative(fe, +1, h, f0=f0)
    d_minus = one_sided_derivative(fe, -1, h, f0=f0)
    # a finite market's value is smooth in eps: shrink the stencil while it helps
    for _ in range(refine):
        if d_plus.error + d_minus.error < 1e-8 or h[-1] < 1e-6:
            break
        h2 = h / 10.0
        p2 = one_sided_derivative(fe, +1, h2, f0=f0)
        m2 = one_sided_derivative(fe, -1, h2, f0=f0)
        if p2.error + m2.error >= d_plus.error + d_minus.error:
            break
        h, d_plus, d_minus = h2, p2, m2
    dx = central_derivative(lambda x: value(0.0, x), x_step or float(h[-1]) / 4)
    if not dx.value > 0:
        raise NumericError(f"marginal utility of cash estimated as {dx.value:g}; it must be positive")
    lo, hi = d_plus.value / dx.value, d_minus.value / dx.value
    err = (d_plus.error + d_minus.error) / dx.value + abs(hi) * dx.error / dx.value
    diag = {
        "d_eps_plus": d_plus.value,
        "d_eps_minus": d_minus.value,
        "d_x": dx.value,
        "stencil_error": err,
        "steps": h.tolist(),
        "raw_low": lo,
        "raw_high": hi,
    }
    gap = hi - lo
    if gap < 2 * err:
        # indistinguishable from a point at this stencil resolution
        mid = 0.5 * (lo + hi)
        diag["singleton_within_tolerance"] = True
        lo = hi = mid
    else:
        diag["singleton_within_tolerance"] = False
    return DavisInterval(lo, max(lo, hi), DavisMethod.SUPERGRADIENT, dx.value, diag)


def davis_interval_fd(m: FiniteMarket, u: Utility, B=None, phi=None, *, h=1e-4) -> DavisInterval:
    """One-sided second-order stencils of ``eps -> U(B + eps phi)`` over ``d_x U``."""
    B, phi = _vectors(m, B, phi)
    primal_value(m, u, B, check_arbitrage=True)
    h = min(h, _eps_max(B, phi) / 2)
    value = _finite_value_fn(m, u, B, phi)
    f0 = value(0.0, 0.0)
    dp = three_point_one_sided(lambda e: value(e, 0.0), +1, h, f0=f0)
    dm = three_point_one_sided(lambda e: value(e, 0.0), -1, h, f0=f0)
    dx = central_derivative(lambda x: value(0.0, x), h)
    lo, hi = dp.value / dx.value, dm.value / dx.value
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return DavisInterval(lo, hi, DavisMethod.FINITE_DIFFERENCE, dx.value,
                         {"h": h, "d_eps_plus": dp.value, "d_eps_minus": dm.value, "d_x": dx.value})


def projection_price(m: FiniteMarket, u: Utility, B=None, phi=None, *, h=1e-4) -> np.ndarray:
    """Marginal utility-based price of ``xi = (B, phi)`` at ``q0 = (1, 0)``, ``x0 = 0``.

    The gradient ``(z_B, z_phi, z_x)`` of ``(q, x) -> U(x + q . xi)`` gives the price
    vector ``(z_B, z_phi) / z_x``; its second entry is the Davis price of ``phi``.
    """
    B, phi = _vectors(m, B, phi)
    h = min(h, _eps_max(B, np.maximum(np.abs(phi), np.abs(B))) / 2)
    z_B = central_derivative(lambda t: primal_value(m, u, (1 + t) * B), h).value
    z_phi = central_derivative(lambda t: primal_value(m, u, B + t * phi), h).value
    z_x = central_derivative(lambda t: primal_value(m, u, B + t), h).value
    return np.array([z_B / z_x, z_phi / z_x])


def interval_derb(lower_envelope: Callable[[float], float], y_B: float, E_Y_phi: float,
                  defect: float = 0.0, *, steps=SUPERGRADIENT_STEPS) -> DavisInterval:
    """Endpoint formula ``(E[Y phi] + defect [B'(0+), B'(0-)]) / y_B``.

    ``lower_envelope(eps)`` returns ``inf (B + eps phi)``, which must be a
    deterministic number whenever ``defect`` (the singular mass) is nonzero:
    only the pairing of the singular part with constants is available.
    """
    if y_B <= 0:
        raise ArgumentError("dual mass y_B must be positive")
    if defect < 0:
        raise ArgumentError("singular mass cannot be negative")
    if defect == 0.0:
        p = E_Y_phi / y_B
        return DavisInterval(p, p, DavisMethod.DERB_FORMULA, y_B, {"defect": 0.0})
    b0 = lower_envelope(0.0)
    if np.ndim(b0) != 0:
        raise ConfigError("unsupported configuration: non-constant envelope difference with a singular part")
    f = lambda e: float(lower_envelope(e))
    dp = one_sided_derivative(f, +1, steps, f0=b0)
    dm = one_sided_derivative(f, -1, steps, f0=b0)
    lo = (E_Y_phi + defect * dp.value) / y_B
    hi = (E_Y_phi + defect * dm.value) / y_B
    return DavisInterval(lo, hi, DavisMethod.DERB_FORMULA, y_B,
                         {"defect": defect, "envelope_slope_plus": dp.value, "envelope_slope_minus": dm.value,
                          "envelope_error": dp.error + dm.error})


# ---------------------------------------------------------------- CSW sweep


def _dyadic_block(n):
    n = np.maximum(np.asarray(n), 1)
    return 1.0 + (np.floor(np.log2(n)).astype(int) % 2)


def _parity(n):
    return 1.0 + (np.asarray(n).astype(int) % 2)


def _dyadic_parity(n):
    n = np.asarray(n)
    return 1.0 + ((n + np.floor(np.log2(np.maximum(n, 1))).astype(int)) % 2)


# candidate test functions, in order of preference; all take values in {1, 2}
TEST_FUNCTIONS: dict[str, Callable] = {
    "dyadic_parity": _dyadic_parity,
    "dyadic_block": _dyadic_block,
    "parity": _parity,
}


@dataclass
class OscillatingTestFunction:
    name: str
    rule: Callable
    levels: tuple[int, ...]
    pairings: dict[int, float]
    amplitude: float
    candidates: dict[str, dict] = field(default_factory=dict)

    def __call__(self, n):
        return self.rule(n)


def find_oscillating_test_function(family: CountableMarketFamily | None = None, levels=(200, 500, 1000), *,
                                   u: Utility | None = None, threshold=0.05,
                                   candidates: dict[str, Callable] | None = None) -> OscillatingTestFunction:
    """Pick ``H >= 1`` whose pairing with the truncated dual optimizers oscillates.

    The dual optimizer of the base problem at unit wealth has mass 1 at every
    level; its mass escapes to the states where ``dS_n -> -1``.  A bounded ``H``
    that alternates on those states gives pairings ``<Q^N, H>`` that keep
    jumping between two values.  Candidates are scanned in order and the first
    with amplitude above ``threshold`` across ``levels`` is returned.

    Raises:
        NumericError: every candidate's pairings converge.
    """
    family = family or csw_family()
    u = u or log_utility()
    candidates = candidates or TEST_FUNCTIONS
    duals = {N: solve_dual(truncate(family, N), u) for N in levels}
    report = {}
    chosen = None
    for name, rule in candidates.items():
        H = {N: rule(np.arange(N + 1)) for N in levels}
        if min(float(h.min()) for h in H.values()) < 1.0:
            raise ArgumentError(f"test function {name} must be >= 1")
        pair = {N: duals[N].pairing(H[N]) / duals[N].total_mass for N in levels}
        amp = max(pair.values()) - min(pair.values())
        report[name] = {"pairings": pair, "amplitude": amp, "tail_values": {N: float(H[N][-1]) for N in levels}}
        if chosen is None and amp > threshold:
            chosen = name
    if chosen is None:
        raise NumericError(f"no candidate test function oscillates by more than {threshold}: {report}")
    r = report[chosen]
    return OscillatingTestFunction(chosen, candidates[chosen], tuple(levels), r["pairings"], r["amplitude"], report)


SWEEP_COLUMNS = ("N", "y_N", "pairing_H", "du_plus", "du_minus", "gap")


@dataclass
class SweepReport:
    test_function: str
    rows: list[dict]
    gap_errors: list[float]
    concavity_residual: float
    x_grid: list[float]
    u_grid: dict[int, list[float]]
    pairing_amplitude: float

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r["gap"] for r in self.rows])

    @property
    def relative_spread(self) -> float:
        g = self.gaps
        return float((g.max() - g.min()) / abs(g.mean()))

    @property
    def gap_positive(self) -> bool:
        """Each gap exceeds three times its differencing-error bound."""
        return bool(all(r["gap"] > 3 * e for r, e in zip(self.rows, self.gap_errors)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# davis-lab schema v1\n")
        w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: r[k] for k in SWEEP_COLUMNS})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "test_function": self.test_function,
            "rows": self.rows,
            "gap_errors": self.gap_errors,
            "relative_spread": self.relative_spread,
            "gap_positive": self.gap_positive,
            "concavity_residual": self.concavity_residual,
            "pairing_amplitude": self.pairing_amplitude,
            "x_grid": self.x_grid,
            "u_grid": {str(k): v for k, v in self.u_grid.items()},
        }


def csw_sweep(levels=(200, 500, 1000), *, family: CountableMarketFamily | None = None,
              test_function: OscillatingTestFunction | None = None, steps=SUPERGRADIENT_STEPS,
              x_grid=None) -> SweepReport:
    """One-sided derivatives at 0 of ``x -> sup_pi E[log(x + pi B dS + B)]``, ``B = 1/H``.

    For every truncation level the tilted market is solved, the dual mass
    ``y_N`` and the base pairing ``<Q^N, H>`` are recorded, and the one-sided
    derivatives of the value function in cash are estimated.  A persistent
    positive gap across levels is the numerical signature of the kink at 0.
    """
    levels = tuple(int(n) for n in levels)
    if len(levels) < 3 or list(levels) != sorted(set(levels)):
        raise ArgumentError("sweep needs at least three increasing truncation levels")
    family = family or csw_family()
    u = log_utility()
    H = test_function or find_oscillating_test_function(family, levels, u=u)
    tilted = family.tilted(lambda n: 1.0 / H(n), lambda n: 1.0 / H(n), name=f"{family.name}-tilted")
    x_grid = np.asarray(x_grid if x_grid is not None else np.linspace(-0.02, 0.02, 9))
    rows, errs, u_grid = [], [], {}
    concavity = 0.0
    for N in levels:
        m = truncate(tilted, N)
        B = m.endowment
        f = lambda x: primal_value(m, u, B + x)
        f0 = primal_value(m, u, B, check_arbitrage=True)
        dp = one_sided_derivative(f, +1, steps, f0=f0)
        dm = one_sided_derivative(f, -1, steps, f0=f0)
        d = solve_dual(m, u, check_arbitrage=False)
        vals = np.array([f(x) for x in x_grid])
        u_grid[N] = vals.tolist()
        # second differences of a concave function on a uniform grid are <= 0
        concavity = max(concavity, float(np.max(np.diff(vals, 2), initial=-np.inf)))
        rows.append({
            "N": N,
            "y_N": d.total_mass,
            "pairing_H": H.pairings.get(N, np.nan),
            "du_plus": dp.value,
            "du_minus": dm.value,
            "gap": dm.value - dp.value,
        })
        errs.append(dp.error + dm.error)
    return SweepReport(H.name, rows, errs, max(concavity, 0.0), x_grid.tolist(), u_grid, H.amplitude)

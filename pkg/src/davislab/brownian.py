"""Monte-Carlo pipelines for the Brownian examples.

Two deflator models are simulated.

``constant``: the Samuelson model with constant market price of risk ``lam``.
The minimal martingale density ``Y_T = exp(-lam Z_T - lam**2 T / 2)`` is a true
martingale and is sampled exactly.

``ds_stopped``: the Delbaen-Schachermayer construction on ``T = 1``.  In the
time scale ``s = -log(1 - t)`` the integrals ``beta' = int (1-u)**-1/2 dbeta``
and ``W' = int (1-u)**-1/2 dW`` are standard Brownian motions, so their
stochastic exponentials are sampled exactly on a uniform ``s``-grid (steps
proportional to ``1 - t`` in calendar time).  The deflator is
``E(beta')`` stopped at ``sigma ^ tau`` where ``tau`` is the first time
``E(beta') = 1/2`` and ``sigma`` the first time ``E(W') = 2``.  Optional stopping
gives ``E[Y_T] / Y_0 = 1/2 * 1/2 + 1/2 * 1 = 3/4``: the deflator is a strict
local martingale.

Barrier crossings between grid points are detected with the Brownian-bridge
crossing probability and located by linear interpolation of the exponential.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .davis import DavisInterval, DavisMethod
from .differences import one_sided_derivative
from .errors import ArgumentError, ConfigError, NumericError
from .optim import global_minimize_1d
from .utility import Utility, log_utility

__all__ = [
    "LambdaKind",
    "PathModel",
    "PathSample",
    "DeflatorStats",
    "EnvelopeFunctions",
    "McEstimate",
    "ds_stopped_drift",
    "simulate_paths",
    "simulate_stochastic_exponential",
    "example1_interval",
    "lower_envelope_fn",
    "upper_envelope_fn",
    "envelope_derivatives",
    "EnvelopeDerivatives",
    "example2_interval",
    "corrector_check",
    "CorrectorReport",
    "lemma_lone_check",
    "kinked_envelope",
    "smooth_envelope",
]

LOG_HALF = math.log(0.5)
LOG_TWO = math.log(2.0)
Z95 = 1.959963984540054
BATCH_PAIRS = 8192
CHUNK_STEPS = 64
MIN_PATHS = 10_000


class LambdaKind(str, enum.Enum):
    CONSTANT = "constant"
    DS_STOPPED = "ds_stopped"


class NuKind(str, enum.Enum):
    """The W-integrand of the deflator: none, or the DS process ``nu0``."""

    ZERO = "zero"
    NU0 = "nu0"


@dataclass(frozen=True)
class PathModel:
    """Path-simulation settings.

    ``n_steps`` is the number of steps of the ``s``-grid on ``[0, s_max]`` used
    by the DS model; the constant model is sampled exactly and ignores it.
    """

    kind: LambdaKind = LambdaKind.DS_STOPPED
    lam: float = 0.0
    sigma: float = 1.0
    T: float = 1.0
    n_steps: int = 10_000
    s_max: float = 100.0
    seed: int = 0
    nu: NuKind = NuKind.ZERO
    bridge: bool = True
    snapshot_times: tuple[float, ...] = (0.25, 0.5, 0.75)

    def __post_init__(self):
        object.__setattr__(self, "kind", LambdaKind(self.kind))
        object.__setattr__(self, "nu", NuKind(self.nu))
        if not self.sigma > 0:
            raise ArgumentError("sigma must be positive")
        if self.kind is LambdaKind.DS_STOPPED and self.T != 1.0:
            raise ArgumentError("the DS construction lives on the horizon T = 1")
        if not self.T > 0:
            raise ArgumentError("horizon must be positive")
        if self.n_steps < 1 or not self.s_max > 0:
            raise ArgumentError("time grid needs n_steps >= 1 and s_max > 0")
        if any(not 0 < t < self.T for t in self.snapshot_times):
            raise ArgumentError("snapshot times must lie strictly inside (0, T)")
        if self.seed < 0 or self.seed >= 2**64:
            raise ArgumentError("seed must be a 64-bit unsigned integer")

    @property
    def ds(self) -> float:
        return self.s_max / self.n_steps

    def s_grid(self) -> np.ndarray:
        """Strictly increasing grid in ``s``; its image ``t = 1 - e**-s`` covers ``[0, 1)``."""
        return np.linspace(0.0, self.s_max, self.n_steps + 1)

    def t_grid(self) -> np.ndarray:
        return -np.expm1(-self.s_grid())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "lam": self.lam,
            "sigma": self.sigma,
            "T": self.T,
            "n_steps": self.n_steps,
            "s_max": self.s_max,
            "seed": self.seed,
            "nu": self.nu.value,
            "bridge": self.bridge,
        }


@dataclass
class PathSample:
    """Terminal quantities of ``n_paths`` antithetic paths (pairs are adjacent)."""

    Y_T: np.ndarray  # Y_T / Y_0
    W_T: np.ndarray
    Z_T: np.ndarray | None
    stop_t: np.ndarray | None = None
    stop_kind: np.ndarray | None = None  # 0 none, 1 tau, 2 sigma
    truncated: np.ndarray | None = None
    ties: int = 0
    snapshots: dict = field(default_factory=dict)  # t -> (Y_t, W_t)
    model: PathModel | None = None
    backend: str = ""

    @property
    def n_paths(self) -> int:
        return self.Y_T.size


@dataclass(frozen=True)
class McEstimate:
    mean: float
    halfwidth: float
    n_paths: int

    @property
    def low(self) -> float:
        return self.mean - self.halfwidth

    @property
    def high(self) -> float:
        return self.mean + self.halfwidth

    def covers(self, x: float) -> bool:
        return self.low <= x <= self.high


def mc_mean(values: np.ndarray) -> McEstimate:
    """Mean and 95% half-width, treating adjacent entries as antithetic pairs."""
    v = np.asarray(values, dtype=float)
    if v.size % 2 == 0 and v.size >= 4:
        pm = 0.5 * (v[0::2] + v[1::2])
        hw = Z95 * pm.std(ddof=1) / math.sqrt(pm.size)
        return McEstimate(float(pm.mean()), float(hw), v.size)
    hw = Z95 * v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else np.inf
    return McEstimate(float(v.mean()), float(hw), v.size)


@dataclass
class DeflatorStats:
    Y0: float
    E_YT: float
    ci_halfwidth: float
    n_paths: int
    extras: dict = field(default_factory=dict)

    @property
    def ratio(self) -> McEstimate:
        return McEstimate(self.E_YT / self.Y0, self.ci_halfwidth / self.Y0, self.n_paths)

    @property
    def defect(self) -> float:
        """Singular mass ``Y_0 - E[Y_T]``."""
        return self.Y0 - self.E_YT

    def to_dict(self) -> dict:
        return {"Y0": self.Y0, "E_YT": self.E_YT, "ci_halfwidth": self.ci_halfwidth,
                "n_paths": self.n_paths, **self.extras}


# ------------------------------------------------------------------ simulation


def _batches(n_paths: int):
    n_pairs = (n_paths + 1) // 2
    full, rest = divmod(n_pairs, BATCH_PAIRS)
    sizes = [BATCH_PAIRS] * full + ([rest] if rest else [])
    return sizes


def _sub_rngs(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _simulate_constant(model: PathModel, n_paths: int) -> PathSample:
    Ys, Ws, Zs = [], [], []
    sizes = _batches(n_paths)
    sqT = math.sqrt(model.T)
    for rng, P in zip(_sub_rngs(model.seed, len(sizes)), sizes):
        g = rng.standard_normal((P, 2))
        g = np.stack([g, -g], axis=1).reshape(2 * P, 2)  # antithetic neighbours
        Z = sqT * g[:, 0]
        W = sqT * g[:, 1]
        Ys.append(np.exp(-model.lam * Z - 0.5 * model.lam**2 * model.T))
        Ws.append(W)
        Zs.append(Z)
    Y, W, Z = np.concatenate(Ys), np.concatenate(Ws), np.concatenate(Zs)
    return PathSample(Y, W, Z, model=model, backend="exact")


def _ds_grid_coefficients(model: PathModel):
    s = model.s_grid()
    ds = model.ds
    e1 = np.exp(-s)
    e2 = np.exp(-0.5 * s)
    dt = e1[:-1] - e1[1:]
    cov = 2.0 * (e2[:-1] - e2[1:])
    a = cov / ds
    b = np.sqrt(np.maximum(dt - cov**2 / ds, 0.0))
    return s, a, b


def _simulate_ds_batch(model: PathModel, P: int, rng, backend, snap_k: dict):
    s, a_cov, b_cov = _ds_grid_coefficients(model)
    t_grid = -np.expm1(-s)
    n = 2 * P
    lb = np.zeros(n)
    lw = np.zeros(n)
    W = np.zeros(n)
    kind = np.zeros(n, dtype=np.int8)
    stop_s = np.full(n, np.inf)
    stop_k = np.full(n, model.n_steps, dtype=np.int64)
    theta = np.zeros(n)
    tie = np.zeros(n, dtype=np.int8)
    # last calendar time at which W is known for each path
    W_time = np.zeros(n)
    snaps = {}
    bounds = sorted(set(list(snap_k.values()) + [model.n_steps]))
    k = 0
    nu0 = model.nu is NuKind.NU0

    def snapshot(t_snap, k_snap):
        stopped = kind != 0
        need = stopped & (W_time < t_snap)
        Wc = W.copy()
        if need.any():
            Wc[need] += np.sqrt(t_snap - W_time[need]) * rng.standard_normal(int(need.sum()))
            W[need] = Wc[need]
            W_time[need] = t_snap
        W_time[~stopped] = t_grid[k_snap]
        logY = lb + lw if nu0 else lb
        snaps[t_snap] = (np.exp(logY), Wc)

    for kb in bounds:
        while k < kb:
            m = min(CHUNK_STEPS, kb - k)
            alive_pairs = np.flatnonzero((kind[0::2] == 0) | (kind[1::2] == 0))
            if alive_pairs.size == 0:
                k = kb
                break
            paths = np.stack([2 * alive_pairs, 2 * alive_pairs + 1], axis=1).ravel()
            z = rng.standard_normal((m, alive_pairs.size, 3))
            u = rng.random((m, alive_pairs.size, 2))
            sub = [np.ascontiguousarray(x[paths]) for x in (lb, lw, W, kind, stop_s, stop_k, theta, tie)]
            backend.ds_advance(*sub, z, u, k, model.ds, a_cov, b_cov, s, LOG_HALF, LOG_TWO, bool(model.bridge))
            for dst, src in zip((lb, lw, W, kind, stop_s, stop_k, theta, tie), sub):
                dst[paths] = src
            newly = paths[(sub[3] != 0)]
            W_time[newly] = np.maximum(W_time[newly], t_grid[stop_k[newly]])
            k += m
        for t_snap, ks in snap_k.items():
            if ks == kb:
                snapshot(t_snap, kb)

    truncated = kind == 0
    # complete W to the horizon; stopped paths carry W at the end of their stop step
    W_time[truncated] = t_grid[-1]
    W_T = W + np.sqrt(np.maximum(1.0 - W_time, 0.0)) * rng.standard_normal(n)
    logY = lb + lw if nu0 else lb
    Y_T = np.exp(logY)
    stop_t = np.where(np.isfinite(stop_s), -np.expm1(-stop_s), 1.0)
    return Y_T, W_T, stop_t, kind, truncated, int(tie.sum()), snaps


def simulate_paths(model: PathModel, n_paths: int, *, backend: str | None = None) -> PathSample:
    """Sample terminal deflator ratios ``Y_T / Y_0`` together with ``W_T``.

    Batches use sub-seeds spawned from ``model.seed`` and are reduced in a fixed
    order, so the output depends only on ``(model, n_paths)``.
    """
    if n_paths < 2:
        raise ArgumentError("need at least two paths")
    n_paths += n_paths % 2
    if model.kind is LambdaKind.CONSTANT:
        return _simulate_constant(model, n_paths)
    impl = kernels.get_backend(backend)
    sizes = _batches(n_paths)
    s = model.s_grid()
    snap_k = {}
    for t in model.snapshot_times:
        s_t = -math.log1p(-t)
        snap_k[t] = int(min(np.searchsorted(s, s_t - 1e-12), model.n_steps))
    parts = [_simulate_ds_batch(model, P, rng, impl, snap_k) for rng, P in zip(_sub_rngs(model.seed, len(sizes)), sizes)]
    Y = np.concatenate([p[0] for p in parts])
    if not np.all(np.isfinite(Y)) or np.any(Y < 0):
        bad = int(np.sum(~np.isfinite(Y)))
        raise NumericError(f"{bad} non-finite deflator values; step ds = {model.ds:g} is too coarse")
    snaps = {t: tuple(np.concatenate([p[6][t][i] for p in parts]) for i in range(2)) for t in model.snapshot_times}
    trunc = np.concatenate([p[4] for p in parts])
    if trunc.any():
        warnings.warn(f"{int(trunc.sum())} paths reached s_max = {model.s_max} unstopped", RuntimeWarning, stacklevel=2)
    return PathSample(
        Y_T=Y,
        W_T=np.concatenate([p[1] for p in parts]),
        Z_T=None,
        stop_t=np.concatenate([p[2] for p in parts]),
        stop_kind=np.concatenate([p[3] for p in parts]),
        truncated=trunc,
        ties=sum(p[5] for p in parts),
        snapshots=snaps,
        model=model,
        backend=impl.BACKEND,
    )


def ds_stopped_drift(sample: PathSample) -> Callable[[np.ndarray], np.ndarray]:
    """Per-path market price of risk ``lam_t = -1{t <= sigma ^ tau} / sqrt(1 - t)``.

    Returns a function of calendar time ``t`` (scalar or array) giving the drift
    of every path in ``sample``.
    """
    if sample.stop_t is None:
        raise ArgumentError("drift needs a DS-stopped sample")
    stop = sample.stop_t

    def lam(t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= 1.0) or np.any(t < 0):
            raise ArgumentError("the DS drift is defined on [0, 1)")
        active = t[..., None] <= stop
        return np.where(active, -1.0 / np.sqrt(1.0 - t)[..., None], 0.0)

    lam.stop_t = stop
    lam.hit_prob = {
        "tau_first": float(np.mean(sample.stop_kind == 1)),
        "sigma_first": float(np.mean(sample.stop_kind == 2)),
        "unstopped": float(np.mean(sample.stop_kind == 0)),
    }
    return lam


def simulate_stochastic_exponential(model: PathModel, n_paths: int = 100_000, *, Y0: float = 1.0,
                                    backend: str | None = None, sample: PathSample | None = None) -> DeflatorStats:
    """``E[Y_T]`` with a 95% confidence interval.

    Raises:
        ArgumentError: fewer than 10**4 paths.
    """
    if sample is None:
        if n_paths < MIN_PATHS:
            raise ArgumentError(f"use at least {MIN_PATHS} paths")
        sample = simulate_paths(model, n_paths, backend=backend)
    est = mc_mean(sample.Y_T)
    extras = {"backend": sample.backend}
    if sample.stop_kind is not None:
        extras.update({
            "p_tau_first": float(np.mean(sample.stop_kind == 1)),
            "p_sigma_first": float(np.mean(sample.stop_kind == 2)),
            "truncated": int(sample.truncated.sum()),
            "ties": sample.ties,
            "mean_stop_t": float(np.mean(sample.stop_t)),
        })
        extras["snapshots"] = {str(t): mc_mean(Y0 * v[0]).mean for t, v in sample.snapshots.items()}
    return DeflatorStats(Y0, Y0 * est.mean, Y0 * est.halfwidth, sample.n_paths, extras)


# ------------------------------------------------------------------ envelopes


@dataclass
class EnvelopeFunctions:
    B_fn: Callable
    phi_fn: Callable
    domain: tuple[float, float] = (-50.0, 50.0)
    name: str = ""

    def check(self, n=20001) -> dict:
        a = np.linspace(*self.domain, n)
        B = np.asarray(self.B_fn(a), dtype=float)
        phi = np.asarray(self.phi_fn(a), dtype=float)
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(phi))):
            raise ArgumentError("envelope functions must be finite on the search domain")
        if B.min() <= 0:
            raise ArgumentError("B must be bounded away from 0 (shift it by a constant)")
        return {"inf_B": float(B.min()), "sup_abs_phi": float(np.abs(phi).max())}


def _envelope(f, domain, tol=1e-12):
    lo, hi = domain
    x, v, edge = global_minimize_1d(f, lo, hi)
    if not edge:
        return v, False
    # minimizer sits on the boundary: enlarge once and check the value settled
    width = hi - lo
    x2, v2, edge2 = global_minimize_1d(f, lo - 1.5 * width, hi + 1.5 * width, n_grid=16001)
    if v - v2 > tol * max(1.0, abs(v)):
        raise NumericError(f"envelope minimizer escapes the search domain: {v} -> {v2} at a = {x2}")
    return min(v, v2), True


def lower_envelope_fn(env: EnvelopeFunctions, eps: float) -> float:
    """``inf_a B(a) + eps phi(a)``."""
    return _envelope(lambda a: env.B_fn(a) + eps * env.phi_fn(a), env.domain)[0]


def upper_envelope_fn(env: EnvelopeFunctions, eps: float) -> float:
    """``sup_a eps phi(a) - B(a)``."""
    return -_envelope(lambda a: env.B_fn(a) - eps * env.phi_fn(a), env.domain)[0]


@dataclass
class EnvelopeDerivatives:
    plus: float  # B'(0+)
    minus: float  # B'(0-)
    value: float  # B(0)
    upper_plus: float  # Bbar'(0+), computed from the upper envelope
    error: float
    concavity_residual: float
    sup_abs_phi: float

    @property
    def bound_ok(self) -> bool:
        tol = 1e-9 + self.error
        return abs(self.plus) <= self.sup_abs_phi + tol and abs(self.minus) <= self.sup_abs_phi + tol

    def to_dict(self) -> dict:
        return dict(self.__dict__, bound_ok=self.bound_ok)


def envelope_derivatives(env: EnvelopeFunctions, steps=(1e-2, 5e-3, 2.5e-3)) -> EnvelopeDerivatives:
    """One-sided derivatives at 0 of the concave map ``eps -> inf_a (B + eps phi)``."""
    info = env.check()
    Bl = lambda e: lower_envelope_fn(env, e)
    b0 = Bl(0.0)
    dp = one_sided_derivative(Bl, +1, steps, f0=b0)
    dm = one_sided_derivative(Bl, -1, steps, f0=b0)
    ub = lambda e: upper_envelope_fn(env, e)
    du = one_sided_derivative(ub, +1, steps, f0=ub(0.0))
    h = np.sort(np.asarray(steps, dtype=float))
    grid = np.concatenate([-h[::-1], [0.0], h])
    # grid is not uniform; check slopes of consecutive chords decrease
    vals = np.array([Bl(e) if e != 0 else b0 for e in grid])
    slopes = np.diff(vals) / np.diff(grid)
    conc = float(max(np.max(np.diff(slopes)), 0.0))
    return EnvelopeDerivatives(dp.value, dm.value, b0, du.value, dp.error + dm.error, conc, info["sup_abs_phi"])


def kinked_envelope() -> EnvelopeFunctions:
    """``B = 2 + exp(-a**2)``, ``phi = tanh``: minimizing sequences run to ``-+inf``."""
    return EnvelopeFunctions(lambda a: 2.0 + np.exp(-np.asarray(a) ** 2), np.tanh, name="kinked")


def smooth_envelope() -> EnvelopeFunctions:
    """``B = 2 + a**2 / (1 + a**2)``, ``phi = tanh``: unique interior minimizer."""
    return EnvelopeFunctions(lambda a: 2.0 + np.asarray(a) ** 2 / (1.0 + np.asarray(a) ** 2), np.tanh, name="smooth")


# ------------------------------------------------------------------ examples


def _phi_bounds(phi_fn, domain=(-50.0, 50.0)):
    lo, _ = _envelope(phi_fn, domain)
    hi = -_envelope(lambda a: -phi_fn(a), domain)[0]
    return lo, hi


def example1_interval(model: PathModel, phi_fn, n_paths: int = 100_000, *, Y0: float = 1.0,
                      sample: PathSample | None = None, reference: DeflatorStats | None = None) -> DavisInterval:
    """Davis interval of ``phi(W_T)`` for a log investor with constant endowment.

    ``p_low = E[Y_T (phi - phi_inf)] / Y_0 + phi_inf`` and
    ``p_high = phi_sup - E[Y_T (phi_sup - phi)] / Y_0``.  The width is compared
    with ``(phi_sup - phi_inf)(1 - E[Y_T] / Y_0)`` where ``E[Y_T]`` comes from
    ``reference`` (an independent run) when given.
    """
    sample = sample or simulate_paths(model, n_paths)
    lo_phi, hi_phi = _phi_bounds(phi_fn)
    phi = np.asarray(phi_fn(sample.W_T), dtype=float)
    Y = sample.Y_T
    e_low = mc_mean(Y * (phi - lo_phi))
    e_high = mc_mean(Y * (hi_phi - phi))
    p_low = e_low.mean + lo_phi
    p_high = hi_phi - e_high.mean
    own = mc_mean(Y)
    ref = reference.ratio if reference is not None else own
    closed = (hi_phi - lo_phi) * (1.0 - ref.mean)
    closed_hw = (hi_phi - lo_phi) * ref.halfwidth
    width_hw = e_low.halfwidth + e_high.halfwidth
    diag = {
        "phi_inf": lo_phi,
        "phi_sup": hi_phi,
        "ci_low": e_low.halfwidth,
        "ci_high": e_high.halfwidth,
        "E_YT_ratio": own.mean,
        "closed_form_width": closed,
        "closed_form_ci": closed_hw,
        "assembled_width": p_high - p_low,
        "width_consistent": abs((p_high - p_low) - closed) <= width_hw + closed_hw,
        "n_paths": sample.n_paths,
    }
    if hi_phi - lo_phi < 1e-12:
        warnings.warn("constant payoff: the interval degenerates to a point", RuntimeWarning, stacklevel=2)
    if p_low > p_high:
        # only possible through Monte-Carlo noise when E[Y_T] = Y_0
        mid = 0.5 * (p_low + p_high)
        p_low = p_high = mid
    return DavisInterval(p_low, p_high, DavisMethod.DERB_FORMULA, Y0, diag)


def example2_interval(model: PathModel, env: EnvelopeFunctions, deflator: PathSample | None, *,
                      derivs: EnvelopeDerivatives | None = None, Y0: float = 1.0) -> DavisInterval:
    """Davis interval of ``phi(W_T)`` given the unspanned endowment ``B(W_T)``.

    ``deflator`` supplies joint samples of ``(Y_T / Y_0, W_T)``.  The dual
    integrand of ``W`` is not determined by the model, so it is a configuration
    input.
    """
    if deflator is None:
        raise ConfigError("example 2 needs a deflator sample (the W-integrand is a configuration input)")
    d = derivs or envelope_derivatives(env)
    Y = deflator.Y_T
    phi = np.asarray(env.phi_fn(deflator.W_T), dtype=float)
    e_low = mc_mean(Y * (phi - d.plus))
    e_high = mc_mean(Y * (d.upper_plus - phi))
    p_low = e_low.mean + d.plus
    p_high = d.upper_plus - e_high.mean
    ratio = mc_mean(Y)
    diag = {
        "B_lower_plus": d.plus,
        "B_lower_minus": d.minus,
        "B_upper_plus": d.upper_plus,
        "B_lower_0": d.value,
        "E_YT_ratio": ratio.mean,
        "E_YT_ci": ratio.halfwidth,
        "singular_mass": Y0 * (1.0 - ratio.mean),
        "ci_low": e_low.halfwidth,
        "ci_high": e_high.halfwidth,
        "kink_width": (d.minus - d.plus) * (1.0 - ratio.mean),
        "deflator": model.to_dict(),
    }
    if p_low > p_high:
        p_low = p_high = 0.5 * (p_low + p_high)
    return DavisInterval(p_low, p_high, DavisMethod.DERB_FORMULA, Y0, diag)


# ------------------------------------------------------------------ corrector


@dataclass
class CorrectorReport:
    eps: list[float]
    residual: list[float]
    ratio: list[float]
    base_params: tuple[float, float]
    scale: float
    decreasing: bool
    halved: bool
    violations: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _objective(u: Utility, K, A, Z, lamT, T):
    sqT = math.sqrt(T)

    def f(params):
        theta, c = params
        E = np.exp(theta * lamT + theta * sqT * Z - 0.5 * theta**2 * T)
        w = c * K * (E - 1.0) + A
        if np.any(w <= 0):
            return np.inf, np.zeros(2)
        val = np.mean(u(w))
        up = u.marginal(w)
        g_c = np.mean(up * K * (E - 1.0))
        g_t = np.mean(up * c * K * E * (lamT + sqT * Z - theta * T))
        return -val, -np.array([g_t, g_c])

    return f


def _best(u, K, A, Z, lamT, T, start, c_max):
    f = _objective(u, K, A, Z, lamT, T)
    res = minimize(f, np.asarray(start, dtype=float), jac=True, method="L-BFGS-B",
                   bounds=[(-5.0, 5.0), (0.0, c_max)], options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
    return res.x, -res.fun


def corrector_check(model: PathModel, env: EnvelopeFunctions, eps_list=(0.1, 0.05, 0.025), *,
                    n_paths: int = 100_000, u: Utility | None = None, derivs: EnvelopeDerivatives | None = None,
                    sample: PathSample | None = None) -> CorrectorReport:
    """Residual of the scaled hedge ``(1 + eps B'(0+)/B(0)) pi_hat`` in the Samuelson model.

    Strategies hold a constant fraction ``theta`` of a self-financing account
    started at ``c B(0)``, with gains ``c B(0) (E(theta (lam dt + dZ))_T - 1)``.
    ``U(B + eps phi)`` is estimated by maximizing over ``(theta, c)`` on the same
    paths, so ``r(eps) >= 0`` up to optimizer tolerance.
    """
    if model.kind is not LambdaKind.CONSTANT:
        raise ArgumentError("the corrector runs in the constant-coefficient model")
    u = u or log_utility()
    d = derivs or envelope_derivatives(env)
    sample = sample or simulate_paths(model, n_paths)
    Z, Wt = sample.Z_T, sample.W_T
    B = np.asarray(env.B_fn(Wt), dtype=float)
    phi = np.asarray(env.phi_fn(Wt), dtype=float)
    K = d.value
    lamT = model.lam * model.T
    start = (model.lam, 0.5)
    (th0, c0), _ = _best(u, K, B, Z, lamT, model.T, start, 1.0 - 1e-9)
    scale = d.plus / d.value
    res, ratios, viol = [], [], []
    for e in eps_list:
        A = B + e * phi
        floor = float(np.min(A))
        c_max = min(1.0, floor / K) * (1.0 - 1e-9)
        if e == 0 or not np.any(phi):
            best = -_objective(u, K, A, Z, lamT, model.T)((th0, c0))[0]
        else:
            _, best = _best(u, K, A, Z, lamT, model.T, (th0, c0), c_max)
        c_corr = c0 * (1.0 + e * scale)
        corr = -_objective(u, K, A, Z, lamT, model.T)((th0, c_corr))[0]
        r = best - corr
        if r < -1e-12:
            viol.append({"eps": e, "residual": r})
        res.append(float(r))
        ratios.append(float(r / e) if e else 0.0)
    dec = all(ratios[i + 1] < ratios[i] for i in range(len(ratios) - 1)) if any(ratios) else True
    halved = ratios[-1] < ratios[0] / 2 if ratios[0] > 0 else True
    return CorrectorReport(list(eps_list), res, ratios, (float(th0), float(c0)), scale, dec, halved, viol)


# ------------------------------------------------------------------ lemma check


def lemma_lone_check(sample: PathSample, phi_fn, t0: float, a_grid=None, *, n_quad: int = 40) -> dict:
    """``sup_a E^{Q(a)}[phi(W_T) | F_t0]`` averaged over paths, against ``sup phi``.

    Under ``Q(a)`` the shifted process ``W(a)`` is a Brownian motion and
    ``W_T = a + W_t0 1{|W_t0| > 1/(1-t0)} + (W(a)_T - W(a)_t0) - int_t0^1 nu0``.
    The drift integral is evaluated with the stopping time of the sampled path,
    the Gaussian increment by Gauss-Hermite quadrature.  The lemma's bound
    ``C(t0)`` is reported alongside.
    """
    if t0 not in sample.snapshots:
        raise ArgumentError(f"sample has no snapshot at t = {t0}")
    _, W0 = sample.snapshots[t0]
    a_grid = np.linspace(-3.0, 3.0, 121) if a_grid is None else np.asarray(a_grid, dtype=float)
    h = 1.0 - t0
    keep = np.where(np.abs(W0) > 1.0 / h, W0, 0.0)
    rho = np.minimum(sample.stop_t, 1.0)
    # -int_t0^1 nu0 du = int_t0^{rho} (1-u)**-1/2 du on {rho > t0}
    drift = np.where(rho > t0, 2.0 * (np.sqrt(h) - np.sqrt(np.maximum(1.0 - rho, 0.0))), 0.0)
    x, w = np.polynomial.hermite_e.hermegauss(n_quad)
    w = w / w.sum()
    best, best_a = -np.inf, None
    for a in a_grid:
        WT = a + keep[:, None] + drift[:, None] + math.sqrt(h) * x[None, :]
        val = float(np.mean(np.asarray(phi_fn(WT)) @ w))
        if val > best:
            best, best_a = val, a
    C = math.sqrt(2 * h / math.pi) + 2 * math.sqrt(h) + float(np.mean(np.abs(keep)))
    sup_phi = -_envelope(lambda a: -phi_fn(a), (-50.0, 50.0))[0]
    return {"t0": t0, "estimate": best, "argmax_a": best_a, "sup_phi": sup_phi, "gap": sup_phi - best, "C_t0": C}

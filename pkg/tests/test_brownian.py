from __future__ import annotations

import math

import numpy as np
import pytest

from davislab.brownian import (
    EnvelopeFunctions,
    LambdaKind,
    PathModel,
    corrector_check,
    ds_stopped_drift,
    envelope_derivatives,
    example1_interval,
    example2_interval,
    kinked_envelope,
    lemma_lone_check,
    lower_envelope_fn,
    simulate_paths,
    simulate_stochastic_exponential,
    smooth_envelope,
    upper_envelope_fn,
)
from davislab.errors import ArgumentError, ConfigError

# Conditioning on the independent sigma: if sigma is finite the stopped
# E(beta') is a martingale on a finite horizon (mean 1); otherwise it ends at
# tau with value 1/2.  P(sigma < inf) = 1/2, so E[Y_T] / Y_0 = 3/4.
DS_MEAN = 0.75


@pytest.fixture(scope="module")
def ds_sample():
    return simulate_paths(PathModel(seed=2024, snapshot_times=(0.5, 0.75, 0.9, 0.99)), 40_000)


def test_ds_mean_matches_optional_stopping(ds_sample):
    st = simulate_stochastic_exponential(ds_sample.model, sample=ds_sample)
    lo, hi = st.E_YT - st.ci_halfwidth, st.E_YT + st.ci_halfwidth
    assert lo <= DS_MEAN <= hi
    # P(sigma first) = P(sigma finite) * P(tau > sigma | sigma finite); the
    # stopped mean pins E[Y | sigma first] to (3/4 - p_tau / 2) / (1 - p_tau)
    assert 0.5 < st.extras["p_tau_first"] < 1.0


def test_ds_stopped_values(ds_sample):
    Y = ds_sample.Y_T[ds_sample.stop_kind == 1]
    assert np.allclose(Y, 0.5)
    # paths stopped by sigma freeze beta' strictly between 1/2 and its running value
    assert np.all(ds_sample.Y_T > 0)


def test_snapshot_means_stay_near_one(ds_sample):
    # the stochastic exponential is a martingale on [0, t] for t < 1
    for t, (Yt, _) in ds_sample.snapshots.items():
        if t <= 0.75:
            assert abs(Yt.mean() - 1.0) < 0.05


def test_seed_determinism():
    m = PathModel(seed=9, n_steps=2000)
    a, b = simulate_paths(m, 2000), simulate_paths(m, 2000)
    assert np.array_equal(a.Y_T, b.Y_T) and np.array_equal(a.W_T, b.W_T)
    c = simulate_paths(PathModel(seed=10, n_steps=2000), 2000)
    assert not np.array_equal(a.Y_T, c.Y_T)


def test_antithetic_pairs_in_constant_model():
    s = simulate_paths(PathModel(kind="constant", lam=0.3, seed=1), 1000)
    assert np.allclose(s.W_T[0::2], -s.W_T[1::2])
    assert np.allclose(s.Z_T[0::2], -s.Z_T[1::2])


def test_constant_model_is_true_martingale():
    m = PathModel(kind=LambdaKind.CONSTANT, lam=1.0, seed=5)
    st = simulate_stochastic_exponential(m, 100_000)
    assert st.ratio.covers(1.0)
    # closed form: Var[Y_T] = exp(lam**2 T) - 1
    s = simulate_paths(m, 100_000)
    assert s.Y_T.var() == pytest.approx(math.e - 1, rel=0.1)


def test_minimum_path_count():
    with pytest.raises(ArgumentError):
        simulate_stochastic_exponential(PathModel(), 100)


def test_model_validation():
    with pytest.raises(ArgumentError):
        PathModel(T=2.0)
    with pytest.raises(ArgumentError):
        PathModel(sigma=0.0)
    with pytest.raises(ArgumentError):
        PathModel(snapshot_times=(1.0,))


def test_drift_function(ds_sample):
    lam = ds_stopped_drift(ds_sample)
    t = np.array([0.1, 0.5, 0.9])
    v = lam(t)
    assert v.shape == (t.size, ds_sample.n_paths) and np.all(np.isfinite(v))


def grid_envelope(env, eps, lo=-60, hi=60, n=2_000_001):
    a = np.linspace(lo, hi, n)
    return float(np.min(env.B_fn(a) + eps * env.phi_fn(a)))


@pytest.mark.parametrize("eps", [-0.1, 0.0, 0.05])
def test_envelope_matches_grid(eps):
    for env in (kinked_envelope(), smooth_envelope()):
        assert lower_envelope_fn(env, eps) == pytest.approx(grid_envelope(env, eps), abs=1e-8)


def test_upper_envelope():
    env = kinked_envelope()
    # sup eps tanh - B: approached at a -> +inf for eps > 0
    assert upper_envelope_fn(env, 0.1) == pytest.approx(0.1 - 2.0, abs=1e-8)


def test_kinked_and_smooth_derivatives():
    d = envelope_derivatives(kinked_envelope())
    assert d.plus == pytest.approx(-1.0, abs=1e-10)
    assert d.minus == pytest.approx(1.0, abs=1e-10)
    assert d.value == pytest.approx(2.0) and d.bound_ok and d.concavity_residual == 0.0
    s = envelope_derivatives(smooth_envelope())
    assert abs(s.plus) < 1e-6 and abs(s.minus) < 1e-6


def test_envelope_rejects_nonpositive_B():
    env = EnvelopeFunctions(lambda a: np.sin(a), np.tanh)
    with pytest.raises(ArgumentError):
        envelope_derivatives(env)


def test_example1_interval_brackets_midpoint(ds_sample):
    iv = example1_interval(ds_sample.model, np.tanh, sample=ds_sample)
    assert iv.p_low < iv.p_high
    assert iv.width == pytest.approx(2 * (1 - iv.diagnostics["E_YT_ratio"]), abs=0.05)
    # constant payoff: degenerate interval
    with pytest.warns(RuntimeWarning):
        iv0 = example1_interval(ds_sample.model, lambda a: np.zeros_like(a), sample=ds_sample)
    assert iv0.width == pytest.approx(0.0, abs=1e-12)


def test_example2_needs_deflator():
    with pytest.raises(ConfigError):
        example2_interval(PathModel(), kinked_envelope(), None)


def test_example2_singular_mass(ds_sample):
    iv = example2_interval(ds_sample.model, kinked_envelope(), ds_sample)
    assert iv.diagnostics["singular_mass"] == pytest.approx(0.25, abs=0.05)
    assert iv.p_low < iv.p_high


def test_corrector_zero_claim_has_no_residual():
    env = EnvelopeFunctions(kinked_envelope().B_fn, lambda a: np.zeros_like(np.asarray(a, dtype=float)))
    rep = corrector_check(PathModel(kind="constant", lam=0.4, sigma=0.2, seed=1), env, n_paths=20_000)
    assert rep.residual == [0.0, 0.0, 0.0]


def test_corrector_requires_constant_model():
    with pytest.raises(ArgumentError):
        corrector_check(PathModel(), kinked_envelope())


def test_lemma_conclusion_approaches_sup(ds_sample):
    phi = lambda a: 1.0 / (1.0 + np.asarray(a) ** 2)
    gaps = [lemma_lone_check(ds_sample, phi, t0)["gap"] for t0 in (0.9, 0.99)]
    assert 0.0 <= gaps[1] < gaps[0]
    assert gaps[1] < 0.05
    with pytest.raises(ArgumentError):
        lemma_lone_check(ds_sample, phi, 0.3)

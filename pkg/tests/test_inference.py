import numpy as np
import pytest
from scipy.stats import norm

from ebmtp import inference
from ebmtp.core import Dataset, identity_policy, shift_policy
from ebmtp.estimate import Pipeline, ZeroModel, augmented_estimate, fit_default_model
from ebmtp.inference import (
    BootstrapConfig,
    BootstrapError,
    bootstrap_indices,
    influence_values,
    iqr_scale,
    multiplier_bootstrap_se,
    multiplier_draws,
    nonparametric_bootstrap,
    nonparametric_bootstrap_se,
    wald_ci,
)
from ebmtp.solver import SolverOptions

from conftest import random_dataset, random_feasible_w


def test_phi_examples(rng):
    data = random_dataset(rng, n=30)
    w = np.ones(30)
    mu = augmented_estimate(w, data, identity_policy(), ZeroModel())
    phi = influence_values(w, data, identity_policy(), ZeroModel(), mu)
    np.testing.assert_allclose(phi, data.Y - data.Y.mean(), atol=1e-12)


def test_phi_zero_residuals(rng):
    class Exact:
        def predict(self, X, A):
            return X[:, 0] * A

    X = rng.normal(size=(25, 2))
    A = rng.normal(size=25)
    data = Dataset(X, A, X[:, 0] * A)
    pol = shift_policy(1.3)
    w = random_feasible_w(rng, 25)
    mu = augmented_estimate(w, data, pol, Exact())
    fq = X[:, 0] * (A + 1.3)
    np.testing.assert_allclose(influence_values(w, data, pol, Exact(), mu), fq - fq.mean(), atol=1e-12)


def test_phi_mean_zero_and_mismatch(rng):
    data = random_dataset(rng, n=100)
    pol = shift_policy(0.8)
    m = fit_default_model(data)
    w = random_feasible_w(rng, 100)
    mu = augmented_estimate(w, data, pol, m)
    assert abs(influence_values(w, data, pol, m, mu).mean()) <= 1e-10
    with pytest.raises(ValueError, match="mean"):
        influence_values(w, data, pol, m, mu + 0.01)


def test_multiplier_zero_phi():
    assert multiplier_bootstrap_se(np.zeros(20), BootstrapConfig(R=50)) == 0.0


def test_iqr_scale_quantile_injection():
    R = 1000
    draws = norm.ppf(np.arange(1, R + 1) / (R + 1))
    assert iqr_scale(draws) == pytest.approx(1.0, abs=0.01)


def test_multiplier_calibration():
    rng = np.random.default_rng(11)
    phi = rng.normal(scale=2.0, size=500)
    phi -= phi.mean()
    s = multiplier_bootstrap_se(phi, BootstrapConfig(R=10_000, seed=5))
    assert 1.9 <= s <= 2.1


def test_multiplier_scaling_and_determinism(rng):
    phi = rng.normal(size=80)
    phi -= phi.mean()
    cfg = BootstrapConfig(R=300, seed=9)
    s = multiplier_bootstrap_se(phi, cfg)
    assert multiplier_bootstrap_se(phi, cfg) == s
    assert multiplier_bootstrap_se(-3.0 * phi, cfg) == pytest.approx(3.0 * s, rel=1e-12)
    assert multiplier_bootstrap_se(phi, BootstrapConfig(R=300, seed=10)) != s


def test_multiplier_stream_rule(rng):
    phi = rng.normal(size=10)
    draws = multiplier_draws(phi, BootstrapConfig(R=4, seed=2))
    for r, child in enumerate(np.random.SeedSequence(2).spawn(4)):
        xi = -np.log1p(-np.random.default_rng(child).random(10))
        assert draws[r] == pytest.approx(xi @ phi / np.sqrt(10), abs=1e-14)


def test_wald_examples():
    lo, hi = wald_ci(0.0, 1.0, 100, 0.95)
    assert lo == pytest.approx(-0.196, abs=1e-4) and hi == pytest.approx(0.196, abs=1e-4)
    lo, hi = wald_ci(1.0, 2.0, 4, 0.90)
    assert lo == pytest.approx(-0.6449, abs=1e-4) and hi == pytest.approx(2.6449, abs=1e-4)
    assert wald_ci(3.0, 0.0, 10) == (3.0, 3.0)
    lo, hi = wald_ci(0.5, 1.7, 37, 0.8)
    assert hi - lo == pytest.approx(2 * norm.ppf(0.9) * 1.7 / np.sqrt(37), rel=1e-14)
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            wald_ci(0.0, 1.0, 10, bad)


def test_nonparametric_matches_mean_bootstrap(rng):
    data = random_dataset(rng, n=40)
    cfg = BootstrapConfig(R=60, seed=4)
    pipe = Pipeline(weights="uniform", estimator="weighted")
    got = nonparametric_bootstrap_se(data, identity_policy(), pipe, cfg)
    idx = bootstrap_indices(40, 60, 4)
    ref = np.std([data.Y[i].mean() for i in idx], ddof=1)
    assert abs(got - ref) <= 1e-12


def test_nonparametric_constant_y(rng):
    data = random_dataset(rng, n=30).with_outcome(np.full(30, 2.5))
    se = nonparametric_bootstrap_se(data, shift_policy(0.5), Pipeline(), BootstrapConfig(R=20, seed=1))
    assert se <= 1e-10


def test_nonparametric_thread_invariant(rng):
    data = random_dataset(rng, n=40)
    cfg = BootstrapConfig(R=12, seed=3)
    a = nonparametric_bootstrap(data, shift_policy(0.5), Pipeline(), cfg, threads=1)
    b = nonparametric_bootstrap(data, shift_policy(0.5), Pipeline(), cfg, threads=4)
    np.testing.assert_array_equal(a.replicates, b.replicates)


def test_nonparametric_aborts_on_nonconvergence(rng):
    data = random_dataset(rng, n=40)
    pipe = Pipeline(solver=SolverOptions(max_iters=1, tol=1e-15))
    with pytest.raises(BootstrapError, match="converge"):
        nonparametric_bootstrap(data, shift_policy(2.0), pipe, BootstrapConfig(R=10))


def test_config_validation():
    with pytest.raises(ValueError):
        BootstrapConfig(R=1)
    with pytest.raises(ValueError):
        BootstrapConfig(level=1.0)
    assert inference.NORMAL_IQR == pytest.approx(norm.ppf(0.75) - norm.ppf(0.25), abs=1e-3)

"""Synthetic data-generating processes with known policy effects.

The structure follows the usual continuous-treatment benchmark layout: mixed
uniform / Bernoulli covariates, a treatment whose mean is cubic in the first
four covariates, and an outcome that is quadratic in the treatment times a
cubic in those covariates. Only the first four covariates carry signal, so
outcome scale does not change with ``p``.

The coefficients below are fixed stand-ins chosen for a signal sd of order 1;
they are not taken from any published benchmark table.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from .core import Dataset, PolicySpec, apply_policy, piecewise_shift_policy

# treatment mean
TREAT_INTERCEPT = 3.0
TREAT_NOISE_SD = 1.0
POISSON_RATE = 0.35
# outcome noise
OUTCOME_NOISE_SD = 1.0
# breakpoint of the two-piece benchmark policy (near the median treatment)
POLICY_BREAK = 3.0


@dataclass(frozen=True)
class DGPSpec:
    n: int
    p: int
    complexity: Literal["moderate", "high"] = "moderate"
    treatment_kind: Literal["continuous", "discrete"] = "continuous"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 10:
            raise ValueError(f"n must be >= 10, got {self.n}")
        if self.p < 2:
            raise ValueError(f"p must be >= 2, got {self.p}")
        if self.complexity not in ("moderate", "high"):
            raise ValueError(f"unknown complexity {self.complexity!r}")
        if self.treatment_kind not in ("continuous", "discrete"):
            raise ValueError(f"unknown treatment kind {self.treatment_kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MCTruth:
    value: float
    mcse: float
    N: int

    def __float__(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return asdict(self)


def _covariates(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    X = np.empty((n, p))
    uni = np.arange(0, p, 2)
    ber = np.arange(1, p, 2)
    X[:, uni] = rng.random((n, uni.size))
    X[:, ber] = (rng.random((n, ber.size)) < 0.5).astype(np.float64)
    return X


def _signal(X: np.ndarray):
    """Centred uniforms ``u1, u3`` and Bernoullis ``x2, x4``; absent columns
    (p < 4) enter at their centre value 0."""
    zero = np.zeros(X.shape[0])
    u1 = 2.0 * X[:, 0] - 1.0
    x2 = X[:, 1]
    u3 = 2.0 * X[:, 2] - 1.0 if X.shape[1] > 2 else zero
    x4 = X[:, 3] if X.shape[1] > 3 else zero
    return u1, x2, u3, x4


def treatment_mean(X: np.ndarray) -> np.ndarray:
    u1, x2, u3, x4 = _signal(X)
    return TREAT_INTERCEPT + 1.5 * u1 + u1**3 + x2 + u3**2 - 0.5 * x2 * x4


def _dose(a: np.ndarray) -> np.ndarray:
    s = a / 3.0
    return 0.5 + 0.5 * s + 0.25 * s**2


def _covariate_effect(X: np.ndarray) -> np.ndarray:
    u1, x2, u3, x4 = _signal(X)
    return 1.0 + 0.8 * u1 + 0.5 * u1**3 + 0.5 * x2 - 0.5 * u3 + 0.3 * x4


def outcome_mean(X: np.ndarray, a: np.ndarray, complexity: str = "moderate") -> np.ndarray:
    """Noise-free outcome regression ``E[Y | X, A = a]``."""
    mu = _dose(a) * _covariate_effect(X)
    if complexity == "high":
        u1, x2, u3, x4 = _signal(X)
        mu = mu + 0.5 * u1 * u3 * x2 + 0.5 * x2 * x4 + 0.3 * u3 * a / 3.0
    return mu


def _draw(spec: DGPSpec, rng: np.random.Generator, n: int):
    X = _covariates(rng, n, spec.p)
    m = treatment_mean(X)
    if spec.treatment_kind == "continuous":
        A = m + TREAT_NOISE_SD * rng.standard_normal(n)
    else:
        A = rng.poisson(np.exp(POISSON_RATE * m)).astype(np.float64)
    return X, A


def generate(spec: DGPSpec) -> Dataset:
    """Draw one dataset; identical ``spec`` gives bit-identical data."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    X, A = _draw(spec, rng, spec.n)
    Y = outcome_mean(X, A, spec.complexity) + OUTCOME_NOISE_SD * rng.standard_normal(spec.n)
    names = tuple(f"x{j + 1}" for j in range(spec.p))
    return Dataset(X, A, Y, names)


def mc_truth(spec: DGPSpec, policy: PolicySpec, N: int = 100_000) -> MCTruth:
    """Monte-Carlo mean of the noise-free outcome at the policy-shifted treatment.

    Uses a stream independent of :func:`generate` (same seed, different spawn
    key) so truth and data draws do not share randomness.
    """
    if N < 10_000:
        raise ValueError(f"N must be >= 10000, got {N}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1,)))
    X, A = _draw(spec, rng, N)
    vals = outcome_mean(X, apply_policy(policy, A), spec.complexity)
    return MCTruth(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(N)), N)


def benchmark_policy(tau: float = 0.0) -> PolicySpec:
    """Two-piece increase: ``a + 2*tau`` below :data:`POLICY_BREAK`, ``a + tau`` above."""
    return piecewise_shift_policy([POLICY_BREAK], [2.0, 1.0], tau)

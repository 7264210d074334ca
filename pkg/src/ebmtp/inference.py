"""Standard errors and Wald intervals: multiplier and nonparametric bootstrap.

Random streams: replicate ``r`` of a bootstrap seeded with ``seed`` draws from
``default_rng(SeedSequence(seed).spawn(R)[r])``. Each replicate owns its
stream, so results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from ._parallel import pmap
from .core import Dataset, PolicySpec, validate
from .energy import check_weights
from .estimate import Pipeline, _model_terms, _wvec, run_pipeline

logger = logging.getLogger(__name__)

# z_0.75 - z_0.25, as used to turn an IQR into a standard deviation
NORMAL_IQR = 1.349
MAX_NONCONVERGED_FRACTION = 0.10


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    R: int = 1000
    seed: int = 0
    level: float = 0.95

    def __post_init__(self) -> None:
        if self.R < 2:
            raise ValueError(f"R must be >= 2, got {self.R}")
        if not 0 < self.level < 1:
            raise ValueError(f"level must be in (0, 1), got {self.level}")


def replicate_rngs(seed: int, R: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(R)]


def bootstrap_indices(n: int, R: int, seed: int) -> np.ndarray:
    """``(R, n)`` row indices drawn with replacement, one stream per replicate."""
    return np.stack([rng.integers(0, n, size=n) for rng in replicate_rngs(seed, R)])


# -- multiplier bootstrap ---------------------------------------------------


def influence_values(w, data: Dataset, policy: PolicySpec, model, mu_hat: float,
                     atol: Optional[float] = None) -> np.ndarray:
    """Plug-in influence values ``w_i (Y_i - m(X_i, A_i)) + m(X_i, q(A_i)) - mu_hat``.

    Their mean is zero when ``mu_hat`` is the augmented estimate built from the
    same weights and model; anything else raises.
    """
    validate(data)
    w = check_weights(_wvec(w), data.n)
    fit_obs, fit_pol = _model_terms(data, policy, model)
    phi = w * (data.Y - fit_obs) + fit_pol - mu_hat
    if atol is None:
        atol = 1e-10 * max(1.0, float(np.max(np.abs(phi))), abs(mu_hat))
    if abs(phi.mean()) > atol:
        raise ValueError(
            f"influence values have mean {phi.mean():.3e}; mu_hat does not match "
            "the weights and model"
        )
    return phi


def iqr_scale(draws: np.ndarray) -> float:
    q75, q25 = np.percentile(draws, [75, 25])
    return float((q75 - q25) / NORMAL_IQR)


def multiplier_draws(phi: np.ndarray, cfg: BootstrapConfig) -> np.ndarray:
    """``R`` replicates of ``sum(xi * phi) / sqrt(n)`` with ``xi ~ Exp(1)``."""
    phi = np.asarray(phi, dtype=np.float64)
    n = phi.shape[0]
    out = np.empty(cfg.R)
    for r, rng in enumerate(replicate_rngs(cfg.seed, cfg.R)):
        xi = -np.log1p(-rng.random(n))
        out[r] = xi @ phi
    return out / np.sqrt(n)


def multiplier_bootstrap_se(phi: np.ndarray, cfg: BootstrapConfig = BootstrapConfig()) -> float:
    """Scale ``Sigma^{1/2}`` of ``sqrt(n) * (mu_hat - mu)``; divide by sqrt(n) for an SE."""
    return iqr_scale(multiplier_draws(phi, cfg))


def wald_ci(mu_hat: float, sigma_half: float, n: int, level: float = 0.95) -> tuple[float, float]:
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if sigma_half < 0:
        raise ValueError(f"sigma_half must be >= 0, got {sigma_half}")
    half = norm.ppf(0.5 + level / 2) * sigma_half / np.sqrt(n)
    return float(mu_hat - half), float(mu_hat + half)


# -- nonparametric bootstrap ------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    replicates: np.ndarray
    nonconverged: int


def nonparametric_bootstrap(
    data: Dataset,
    policy: PolicySpec,
    pipe: Pipeline,
    cfg: BootstrapConfig = BootstrapConfig(R=100),
    threads: int = 1,
) -> BootstrapResult:
    """Resample rows, rerun the whole pipeline, and take the sd of the estimates."""
    validate(data)
    idx = bootstrap_indices(data.n, cfg.R, cfg.seed)

    def one(r: int):
        fit = run_pipeline(data.subset(idx[r]), policy, pipe)
        return fit.mu_hat, fit.weights.converged

    results = pmap(one, range(cfg.R), threads)
    reps = np.array([mu for mu, _ in results])
    bad = sum(1 for _, ok in results if not ok)
    if bad > MAX_NONCONVERGED_FRACTION * cfg.R:
        raise BootstrapError(
            f"weight solver failed to converge in {bad}/{cfg.R} bootstrap replicates"
        )
    return BootstrapResult(float(np.std(reps, ddof=1)), reps, bad)


def nonparametric_bootstrap_se(data: Dataset, policy: PolicySpec, pipe: Pipeline,
                               cfg: BootstrapConfig = BootstrapConfig(R=100), threads: int = 1) -> float:
    return nonparametric_bootstrap(data, policy, pipe, cfg, threads).se

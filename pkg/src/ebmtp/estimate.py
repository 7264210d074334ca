"""Weighted and augmented estimators of the mean outcome under a policy."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Optional, Protocol

import numpy as np

from .comparators import gps_density_ratio_weights, uniform_weights
from .core import Dataset, PolicySpec, WeightVector, apply_policy, validate
from .energy import EnergyReport, check_weights
from .solver import BalanceProblem, SolverOptions

RIDGE_GRID = tuple(np.logspace(-4, 2, 7))


class NotFittedError(RuntimeError):
    pass


class OutcomeModel(Protocol):
    """Anything with ``fit(X, A, Y)`` and ``predict(X, A)``."""

    def fit(self, X: np.ndarray, A: np.ndarray, Y: np.ndarray) -> "OutcomeModel": ...

    def predict(self, X: np.ndarray, A: np.ndarray) -> np.ndarray: ...


class ZeroModel:
    """Predicts 0 everywhere; turns the augmented estimator into the weighted one."""

    fitted = True

    def fit(self, X, A, Y) -> "ZeroModel":
        return self

    def predict(self, X, A) -> np.ndarray:
        return np.zeros(np.asarray(A).shape[0])


def ridge_features(X: np.ndarray, A: np.ndarray) -> np.ndarray:
    """``[X, A, A**2, X*A]``, no intercept column."""
    X = np.asarray(X, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    return np.column_stack([X, A, A**2, X * A[:, None]])


def _ridge_path(F: np.ndarray, y: np.ndarray, alphas) -> list[np.ndarray]:
    # F and y centred; one SVD serves the whole grid
    U, s, Vt = np.linalg.svd(F, full_matrices=False)
    Uty = U.T @ y
    return [Vt.T @ (s / (s**2 + a) * Uty) for a in alphas]


class RidgeOutcomeModel:
    """Ridge regression on a fixed polynomial expansion of ``(X, A)``.

    Features are z-scored on the training data and the intercept is not
    penalized. The penalty is picked from ``alphas`` by K-fold CV with folds
    fixed by ``seed``.
    """

    def __init__(self, alphas=RIDGE_GRID, n_folds: int = 5, seed: int = 0):
        self.alphas = tuple(float(a) for a in alphas)
        self.n_folds = n_folds
        self.seed = seed
        self.fitted = False

    def _fit_fixed(self, F, y, alphas):
        mu_F = F.mean(axis=0)
        sd_F = F.std(axis=0)
        sd_F = np.where(sd_F > 0, sd_F, 1.0)
        Fs = (F - mu_F) / sd_F
        y_bar = y.mean()
        coefs = _ridge_path(Fs, y - y_bar, alphas)
        return [(mu_F, sd_F, y_bar, c) for c in coefs]

    @staticmethod
    def _apply(params, F):
        mu_F, sd_F, y_bar, coef = params
        return y_bar + ((F - mu_F) / sd_F) @ coef

    def fit(self, X, A, Y) -> "RidgeOutcomeModel":
        F = ridge_features(X, A)
        y = np.asarray(Y, dtype=np.float64)
        n = y.shape[0]
        k = min(self.n_folds, n)
        folds = np.random.default_rng(self.seed).permutation(n) % k
        cv_mse = np.zeros(len(self.alphas))
        for f in range(k):
            test = folds == f
            train = ~test
            if train.sum() < 2 or not test.any():
                continue
            for j, params in enumerate(self._fit_fixed(F[train], y[train], self.alphas)):
                resid = y[test] - self._apply(params, F[test])
                cv_mse[j] += resid @ resid
        self.cv_mse_ = cv_mse / n
        self.alpha_ = self.alphas[int(np.argmin(self.cv_mse_))]
        (self.params_,) = self._fit_fixed(F, y, [self.alpha_])
        self.fitted = True
        return self

    def predict(self, X, A) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError("call fit() first")
        return self._apply(self.params_, ridge_features(X, A))


def fit_default_model(data: Dataset, seed: int = 0) -> RidgeOutcomeModel:
    validate(data)
    return RidgeOutcomeModel(seed=seed).fit(data.X, data.A, data.Y)


# -- estimators -------------------------------------------------------------


def _wvec(w) -> np.ndarray:
    return w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=np.float64)


def weighted_estimate(w, Y) -> float:
    """``sum(w * Y) / n``."""
    w = _wvec(w)
    Y = np.asarray(Y, dtype=np.float64)
    if w.shape != Y.shape:
        raise ValueError(f"length mismatch: weights {w.shape} vs Y {Y.shape}")
    return float(np.sum(w * Y) / Y.shape[0])


def _model_terms(data: Dataset, policy: PolicySpec, model) -> tuple[np.ndarray, np.ndarray]:
    if not getattr(model, "fitted", True):
        raise NotFittedError("outcome model is not fitted")
    fit_obs = np.asarray(model.predict(data.X, data.A), dtype=np.float64)
    fit_pol = np.asarray(model.predict(data.X, apply_policy(policy, data.A)), dtype=np.float64)
    if fit_obs.shape != (data.n,) or fit_pol.shape != (data.n,):
        raise ValueError("outcome model returned predictions of the wrong length")
    return fit_obs, fit_pol


def augmented_estimate(w, data: Dataset, policy: PolicySpec, model: OutcomeModel) -> float:
    """Weighted mean of model residuals plus the mean model prediction at the
    policy-shifted treatment."""
    validate(data)
    w = check_weights(_wvec(w), data.n)
    fit_obs, fit_pol = _model_terms(data, policy, model)
    n = data.n
    return float(np.sum(w * (data.Y - fit_obs)) / n + np.sum(fit_pol) / n)


@dataclass(frozen=True)
class EstimateResult:
    mu_hat: float
    method: str
    energy: EnergyReport
    n: int
    se: Optional[float] = None
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None
    level: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["energy"] = self.energy.to_dict()
        return out


# -- pipeline ---------------------------------------------------------------

WeightMethod = Literal["ebw", "uniform", "gps"]


@dataclass(frozen=True)
class Pipeline:
    """Everything needed to go from data to a point estimate.

    ``estimator="augmented"`` fits ``model_factory(data)``; ``"weighted"`` uses
    the weights alone.
    """

    weights: WeightMethod = "ebw"
    estimator: Literal["augmented", "weighted"] = "augmented"
    solver: SolverOptions = SolverOptions()
    model_seed: int = 0
    model_factory: Optional[Callable[[Dataset, int], OutcomeModel]] = None

    def label(self) -> str:
        return f"{self.weights}/{self.estimator}"

    def to_dict(self) -> dict:
        return {
            "weights": self.weights,
            "estimator": self.estimator,
            "solver": self.solver.to_dict(),
            "model_seed": self.model_seed,
        }


@dataclass(frozen=True)
class PipelineFit:
    mu_hat: float
    weights: WeightVector
    model: OutcomeModel
    problem: BalanceProblem


def make_weights(data: Dataset, policy: PolicySpec, method: str, opts: SolverOptions,
                 problem: Optional[BalanceProblem] = None) -> WeightVector:
    if method == "uniform":
        return uniform_weights(data.n)
    if method == "gps":
        return gps_density_ratio_weights(data, policy)
    if method == "ebw":
        if problem is None:
            problem = BalanceProblem.from_data(data, policy, opts.metric, opts.bandwidth, opts.standardize)
        return problem.solve(opts)
    raise ValueError(f"unknown weight method {method!r}")


def run_pipeline(data: Dataset, policy: PolicySpec, pipe: Pipeline = Pipeline()) -> PipelineFit:
    validate(data)
    opts = pipe.solver
    prob = BalanceProblem.from_data(data, policy, opts.metric, opts.bandwidth, opts.standardize)
    wv = make_weights(data, policy, pipe.weights, opts, prob)
    if pipe.estimator == "augmented":
        factory = pipe.model_factory or fit_default_model
        model = factory(data, pipe.model_seed)
    else:
        model = ZeroModel()
    mu = augmented_estimate(wv, data, policy, model)
    return PipelineFit(mu, wv, model, prob)

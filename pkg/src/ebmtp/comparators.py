"""Baseline weights to benchmark energy balancing against."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, PolicySpec, ValidationError, WeightVector, validate

CLIP_PERCENTILE = 99.5


def uniform_weights(n: int) -> WeightVector:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return WeightVector(np.ones(n), label="uniform")


@dataclass(frozen=True)
class GaussianGPS:
    """Gaussian linear model for ``A | X``."""

    coef: np.ndarray
    sd: float

    @classmethod
    def fit(cls, X: np.ndarray, A: np.ndarray) -> "GaussianGPS":
        design = np.column_stack([np.ones(X.shape[0]), X])
        coef, _, rank, _ = np.linalg.lstsq(design, A, rcond=None)
        resid = A - design @ coef
        dof = max(X.shape[0] - rank, 1)
        sd = float(np.sqrt(resid @ resid / dof))
        if not sd > 1e-12 * max(float(np.std(A)), 1.0):
            raise ValidationError("treatment is an exact linear function of X; GPS sd is 0")
        return cls(coef, sd)

    def mean(self, X: np.ndarray) -> np.ndarray:
        return self.coef[0] + X @ self.coef[1:]

    def log_density(self, a: np.ndarray, X: np.ndarray) -> np.ndarray:
        z = (a - self.mean(X)) / self.sd
        return -0.5 * z**2 - np.log(self.sd) - 0.5 * np.log(2 * np.pi)


def gps_density_ratios(data: Dataset, policy: PolicySpec, gps: GaussianGPS | None = None) -> np.ndarray:
    """Unnormalized ratios ``f^q(A_i | X_i) / f(A_i | X_i)``.

    ``f^q`` is the density of ``q(A) | X`` by change of variables: a sum over
    pieces ``j`` whose inverse image ``(a - c_j) / s_j`` falls in the piece,
    each term ``f((a - c_j) / s_j | x) / |s_j|``.
    """
    validate(data)
    if gps is None:
        gps = GaussianGPS.fit(data.X, data.A)
    A = data.A
    log_f = gps.log_density(A, data.X)
    ratio = np.zeros(data.n)
    for pc in policy.pieces:
        pre = (A - pc.intercept(policy.tau)) / pc.slope
        inside = (pre >= pc.lower) & (pre < pc.upper)
        if not inside.any():
            continue
        log_term = gps.log_density(pre[inside], data.X[inside]) - np.log(abs(pc.slope))
        ratio[inside] += np.exp(log_term - log_f[inside])
    return ratio


def gps_density_ratio_weights(
    data: Dataset, policy: PolicySpec, clip_percentile: float = CLIP_PERCENTILE
) -> WeightVector:
    """IPW-style density-ratio weights from a Gaussian linear GPS.

    Ratios are clipped at their ``clip_percentile`` percentile, then scaled to
    sum to n.
    """
    r = gps_density_ratios(data, policy)
    r = np.minimum(r, np.percentile(r, clip_percentile))
    total = r.sum()
    if not total > 0:
        raise ValidationError("all density ratios are zero; policy leaves the GPS support")
    return WeightVector(
        r * (data.n / total),
        label="gps",
        meta={"clip_percentile": clip_percentile},
    )

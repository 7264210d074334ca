"""Weighted energy distance and Gaussian MMD between a weighted observed
sample and the policy-shifted target sample."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Literal, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import Dataset, PolicySpec, observed_sample, shifted_sample, standardize_columns

Metric = Literal["energy", "gaussian_mmd"]

WEIGHT_SUM_RTOL = 1e-8


class DegenerateDataError(ValueError):
    """Raised when distances carry no information (e.g. all rows identical)."""


@dataclass(frozen=True)
class EnergyReport:
    value: float
    cross_term: float
    obs_term: float
    target_term: float
    metric: str = "energy"
    bandwidth: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def check_weights(w: np.ndarray, n: int, label: str = "weights") -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{label}: expected length {n}, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError(f"{label}: non-finite entries")
    if np.any(w < 0):
        raise ValueError(f"{label}: negative entry at index {int(np.argmax(w < 0))}")
    if abs(w.sum() - n) > WEIGHT_SUM_RTOL * n:
        raise ValueError(f"{label}: weights sum to {w.sum()!r}, expected {n}")
    return w


def _as_matrix(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    return Z.reshape(-1, 1) if Z.ndim == 1 else Z


def pairwise_distances(Z1, Z2) -> np.ndarray:
    """Euclidean distance between every row of ``Z1`` and every row of ``Z2``."""
    Z1, Z2 = _as_matrix(Z1), _as_matrix(Z2)
    if Z1.shape[1] != Z2.shape[1]:
        raise ValueError(f"column mismatch: {Z1.shape[1]} vs {Z2.shape[1]}")
    return cdist(Z1, Z2, metric="euclidean")


def gaussian_kernel(dist: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-(dist**2) / (2.0 * bandwidth**2))


def _vstat_terms(w, K_oo, K_ot, K_tt):
    n = w.shape[0]
    n2 = float(n) * n
    cross = np.sum(w[:, None] * K_ot) / n2
    obs = np.sum(np.outer(w, w) * K_oo) / n2
    tgt = np.sum(K_tt) / n2
    return cross, obs, tgt


def _prep(w, Z_obs, Z_tgt):
    Z_obs, Z_tgt = _as_matrix(Z_obs), _as_matrix(Z_tgt)
    if Z_obs.shape != Z_tgt.shape:
        raise ValueError(f"shape mismatch: {Z_obs.shape} vs {Z_tgt.shape}")
    w = check_weights(w, Z_obs.shape[0])
    return w, Z_obs, Z_tgt


def weighted_energy_distance(w, Z_obs, Z_tgt) -> EnergyReport:
    """Energy distance between the ``w``-weighted empirical distribution of
    ``Z_obs`` and the empirical distribution of ``Z_tgt``.

    ``value = 2*cross_term - obs_term - target_term`` where each term is the
    corresponding double sum of distances divided by n**2.
    """
    w, Z_obs, Z_tgt = _prep(w, Z_obs, Z_tgt)
    cross, obs, tgt = _vstat_terms(
        w,
        pairwise_distances(Z_obs, Z_obs),
        pairwise_distances(Z_obs, Z_tgt),
        pairwise_distances(Z_tgt, Z_tgt),
    )
    return EnergyReport(2.0 * cross - obs - tgt, cross, obs, tgt, "energy", None)


def gaussian_mmd(w, Z_obs, Z_tgt, bandwidth: float) -> EnergyReport:
    """Biased (V-statistic) squared MMD with a Gaussian kernel."""
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    w, Z_obs, Z_tgt = _prep(w, Z_obs, Z_tgt)
    cross, obs, tgt = _vstat_terms(
        w,
        gaussian_kernel(pairwise_distances(Z_obs, Z_obs), bandwidth),
        gaussian_kernel(pairwise_distances(Z_obs, Z_tgt), bandwidth),
        gaussian_kernel(pairwise_distances(Z_tgt, Z_tgt), bandwidth),
    )
    return EnergyReport(obs + tgt - 2.0 * cross, cross, obs, tgt, "gaussian_mmd", float(bandwidth))


def median_heuristic(Z) -> float:
    """Median of the pairwise distances between distinct rows of ``Z``."""
    Z = _as_matrix(Z)
    if Z.shape[0] < 2:
        raise ValueError("median heuristic needs at least 2 rows")
    D = pairwise_distances(Z, Z)
    h = float(np.median(D[np.triu_indices(Z.shape[0], k=1)]))
    if h <= 0:
        raise DegenerateDataError("median pairwise distance is 0; bandwidth is degenerate")
    return h


def balance_matrices(
    data: Dataset, policy: PolicySpec, standardize: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Observed rows ``(X, A)`` and target rows ``(X, q(A))`` ready for distances.

    With ``standardize`` both are centred and scaled by the observed column
    means and sds, so the treatment column of the target shares the observed
    scale.
    """
    Z_tgt = shifted_sample(data, policy)
    Z_obs = observed_sample(data)
    if standardize:
        center, scale = standardize_columns(Z_obs)
        Z_obs = (Z_obs - center) / scale
        Z_tgt = (Z_tgt - center) / scale
    return Z_obs, Z_tgt


def energy_report(
    w,
    data: Dataset,
    policy: PolicySpec,
    metric: Metric = "energy",
    bandwidth: Optional[float] = None,
    standardize: bool = True,
) -> EnergyReport:
    """Distance of ``w``-weighted data to the policy-shifted sample."""
    Z_obs, Z_tgt = balance_matrices(data, policy, standardize)
    if metric == "energy":
        return weighted_energy_distance(w, Z_obs, Z_tgt)
    if metric == "gaussian_mmd":
        if bandwidth is None:
            bandwidth = median_heuristic(np.vstack([Z_obs, Z_tgt]))
        return gaussian_mmd(w, Z_obs, Z_tgt, bandwidth)
    raise ValueError(f"unknown metric {metric!r}")

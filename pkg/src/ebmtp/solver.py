"""Energy balancing weights: minimize the (penalized) weighted energy distance
over the scaled simplex ``{w >= 0, sum(w) = n}``, optionally with an upper cap."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Literal, Optional

import numpy as np

from .core import Dataset, PolicySpec, WeightVector, validate
from .energy import (
    DegenerateDataError,
    EnergyReport,
    balance_matrices,
    gaussian_kernel,
    median_heuristic,
    pairwise_distances,
)

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_FACTOR = 1e-4


@dataclass(frozen=True)
class SolverOptions:
    """Options for :func:`solve_ebw`.

    ``lam=None`` resolves to ``1e-4 * mean(D)`` for the problem at hand, where
    ``D`` is the observed-sample distance (or kernel) matrix. ``cap`` is an
    absolute upper bound on every weight; see :func:`ca2_cap`.
    """

    lam: Optional[float] = None
    metric: Literal["energy", "gaussian_mmd"] = "energy"
    cap: Optional[float] = None
    max_iters: int = 10_000
    tol: float = 1e-7
    seed: int = 0
    bandwidth: Optional[float] = None
    standardize: bool = True

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.cap is not None and not self.cap >= 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")
        if self.lam is not None and not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.metric not in ("energy", "gaussian_mmd"):
            raise ValueError(f"unknown metric {self.metric!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def ca2_cap(B: float, n: int) -> float:
    """Weight cap ``B * n**(1/3)``."""
    return float(B) * n ** (1.0 / 3.0)


# -- projections ------------------------------------------------------------


def project_simplex(y: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum(w) = total}`` (sort based)."""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, y.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def project_capped_simplex(y: np.ndarray, total: float, cap: Optional[float] = None) -> np.ndarray:
    """Euclidean projection onto ``{0 <= w <= cap, sum(w) = total}``.

    The solution is ``clip(y - theta, 0, cap)``; ``theta`` is found by sorting
    the 2n breakpoints of the piecewise-linear map theta -> sum(clip(...)).
    """
    if cap is None or not np.isfinite(cap):
        return project_simplex(y, total)
    n = y.size
    if cap * n < total * (1 - 1e-12):
        raise ValueError(f"cap {cap} infeasible for total {total} with n={n}")
    bps = np.concatenate([y - cap, y])
    deltas = np.concatenate([-np.ones(n), np.ones(n)])
    order = np.argsort(bps, kind="stable")
    bps, deltas = bps[order], deltas[order]
    # slope of s(theta) on (bps[k], bps[k+1]) is cumsum(deltas)[k]
    slopes = np.cumsum(deltas)
    s = n * cap + np.concatenate([[0.0], np.cumsum(slopes[:-1] * np.diff(bps))])
    # s is nonincreasing from n*cap down to 0
    k = np.searchsorted(-s, -total, side="left")
    if k == 0:
        theta = bps[0]
    elif k >= s.size:
        theta = bps[-1]
    else:
        s0, s1 = s[k - 1], s[k]
        frac = 0.0 if s0 == s1 else (s0 - total) / (s0 - s1)
        theta = bps[k - 1] + frac * (bps[k] - bps[k - 1])
    return np.clip(y - theta, 0.0, cap)


# -- the quadratic program ---------------------------------------------------


def qp_components(Z_obs, Z_tgt, metric: str = "energy", bandwidth: Optional[float] = None):
    """``(b, D, c)`` such that the distance is ``(2 b.w - w.D.w - c) / n**2``.

    For the Gaussian MMD the kernel sums enter with flipped sign so the same
    formula applies.
    """
    Z_obs = np.asarray(Z_obs, dtype=np.float64)
    Z_tgt = np.asarray(Z_tgt, dtype=np.float64)
    if Z_obs.ndim == 1:
        Z_obs, Z_tgt = Z_obs.reshape(-1, 1), Z_tgt.reshape(-1, 1)
    if Z_obs.shape != Z_tgt.shape:
        raise ValueError(f"shape mismatch: {Z_obs.shape} vs {Z_tgt.shape}")
    D_oo = pairwise_distances(Z_obs, Z_obs)
    D_ot = pairwise_distances(Z_obs, Z_tgt)
    D_tt = pairwise_distances(Z_tgt, Z_tgt)
    if metric == "energy":
        return D_ot.sum(axis=1), D_oo, float(np.sum(D_tt))
    if metric == "gaussian_mmd":
        if bandwidth is None or not bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        K_ot = gaussian_kernel(D_ot, bandwidth)
        K_oo = gaussian_kernel(D_oo, bandwidth)
        K_tt = gaussian_kernel(D_tt, bandwidth)
        return -K_ot.sum(axis=1), -K_oo, -float(np.sum(K_tt))
    raise ValueError(f"unknown metric {metric!r}")


class BalanceProblem:
    """Cached distance components for one (data, policy, metric) triple.

    Build once and reuse for repeated solves and for scoring arbitrary weights.
    """

    def __init__(self, Z_obs, Z_tgt, metric: str = "energy", bandwidth: Optional[float] = None):
        Z_obs = np.asarray(Z_obs, dtype=np.float64)
        Z_tgt = np.asarray(Z_tgt, dtype=np.float64)
        if Z_obs.ndim == 1:
            Z_obs, Z_tgt = Z_obs.reshape(-1, 1), Z_tgt.reshape(-1, 1)
        if metric == "gaussian_mmd" and bandwidth is None:
            bandwidth = median_heuristic(np.vstack([Z_obs, Z_tgt]))
        self.metric = metric
        self.bandwidth = None if metric == "energy" else float(bandwidth)
        self.Z_obs, self.Z_tgt = Z_obs, Z_tgt
        self.b, self.D, self.c = qp_components(Z_obs, Z_tgt, metric, self.bandwidth)
        for arr in (self.b, self.D):
            arr.setflags(write=False)
        self.n = Z_obs.shape[0]

    @classmethod
    def from_data(
        cls,
        data: Dataset,
        policy: PolicySpec,
        metric: str = "energy",
        bandwidth: Optional[float] = None,
        standardize: bool = True,
    ) -> "BalanceProblem":
        validate(data)
        Z_obs, Z_tgt = balance_matrices(data, policy, standardize)
        return cls(Z_obs, Z_tgt, metric, bandwidth)

    @property
    def degenerate(self) -> bool:
        return bool(np.all(self.Z_obs == self.Z_obs[0]))

    def default_lambda(self) -> float:
        return DEFAULT_LAMBDA_FACTOR * float(np.mean(np.abs(self.D)))

    def distance(self, w) -> float:
        """Distance of the ``w``-weighted observed sample to the target."""
        w = np.asarray(w, dtype=np.float64)
        return float((2.0 * self.b @ w - w @ (self.D @ w) - self.c) / (self.n * self.n))

    def objective(self, w, lam: float = 0.0) -> float:
        w = np.asarray(w, dtype=np.float64)
        return self.distance(w) + lam * float(w @ w) / (self.n * self.n)

    def report(self, w) -> EnergyReport:
        """Full three-term report; agrees with :func:`~ebmtp.energy.weighted_energy_distance`."""
        w = np.asarray(w, dtype=np.float64)
        n2 = float(self.n) ** 2
        sign = 1.0 if self.metric == "energy" else -1.0
        cross = sign * float(self.b @ w) / n2
        obs = sign * float(w @ (self.D @ w)) / n2
        tgt = sign * self.c / n2
        value = 2 * cross - obs - tgt if self.metric == "energy" else obs + tgt - 2 * cross
        return EnergyReport(value, cross, obs, tgt, self.metric, self.bandwidth)

    def solve(self, opts: SolverOptions = SolverOptions()) -> WeightVector:
        if self.degenerate:
            raise DegenerateDataError("all observed rows are identical")
        lam = self.default_lambda() if opts.lam is None else float(opts.lam)
        return _mfista(self, lam, opts)


def _mfista(prob: BalanceProblem, lam: float, opts: SolverOptions) -> WeightVector:
    """Monotone accelerated projected gradient with backtracking and restart.

    Works with the unscaled objective ``F = n**2 * f``. Every accepted iterate
    lowers F; a rejected momentum step restarts from the last accepted point.
    Converged when an accepted step lowers F by less than ``tol`` relative.
    """
    n = prob.n
    b, D, c = prob.b, prob.D, prob.c
    total = float(n)
    cap = opts.cap
    n2 = float(n) * n
    scale = n2 * max(float(np.mean(np.abs(D))), 1e-300)

    def F(w, Dw):
        return 2.0 * (b @ w) - w @ Dw - c + lam * (w @ w)

    x = np.ones(n)
    Dx = D @ x
    Fx = F(x, Dx)
    y, Dy, Fy = x, Dx, Fx
    t = 1.0
    L = 2.0 * max(lam, 1e-3 * float(np.mean(np.abs(D))))
    history = [Fx / n2]
    converged = False
    it = 0
    while it < opts.max_iters:
        it += 1
        g = 2.0 * (b - Dy + lam * y)
        slack = 1e-13 * (abs(Fy) + scale)
        while True:
            z = project_capped_simplex(y - g / L, total, cap)
            Dz = D @ z
            Fz = F(z, Dz)
            v = z - y
            if Fz <= Fy + g @ v + 0.5 * L * (v @ v) + slack:
                break
            L *= 2.0
        if Fz <= Fx:
            dec = Fx - Fz
            x_prev, Dx_prev = x, Dx
            x, Dx, Fx = z, Dz, Fz
            history.append(Fx / n2)
            if dec <= opts.tol * max(abs(Fx), 1e-12 * scale):
                converged = True
                break
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            y = x + beta * (x - x_prev)
            Dy = Dx + beta * (Dx - Dx_prev)
            Fy = F(y, Dy)
            t = t_new
        else:
            if y is x:
                # a plain projected step failed to descend: rounding floor
                converged = True
                break
            y, Dy, Fy, t = x, Dx, Fx, 1.0
    if not converged:
        logger.warning("EBW solver hit max_iters=%d without converging", opts.max_iters)
    return WeightVector(
        w=x,
        objective=Fx / n2,
        converged=converged,
        iterations=it,
        lam=lam,
        history=tuple(history),
    )


def solve_ebw(data: Dataset, policy: PolicySpec, opts: SolverOptions = SolverOptions()) -> WeightVector:
    """Energy balancing weights for ``data`` toward the ``policy``-shifted sample."""
    prob = BalanceProblem.from_data(data, policy, opts.metric, opts.bandwidth, opts.standardize)
    return prob.solve(opts)

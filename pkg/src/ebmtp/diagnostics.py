"""Feasible policy scale and ranking of weight sets by energy distance."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ._parallel import pmap
from .core import Dataset, PolicySpec, WeightVector, validate
from .energy import balance_matrices, check_weights, pairwise_distances
from .inference import bootstrap_indices
from .solver import BalanceProblem, SolverOptions

DEFAULT_LEVELS = (0.90, 0.95, 0.975)

PolicyFamily = Union[PolicySpec, Callable[[float], PolicySpec]]


def level_column(level: float) -> str:
    """0.9 -> 'thr_90', 0.975 -> 'thr_975'."""
    digits = f"{level * 100:.6f}".rstrip("0").rstrip(".").replace(".", "")
    return f"thr_{digits}"


def null_energy_draws(data: Dataset, policy: PolicySpec, R: int = 1000, seed: int = 0,
                      standardize: bool = True) -> np.ndarray:
    """Energy distances between bootstrap resamples of the shifted sample and
    the shifted sample itself (uniform weights on the resample).

    A resample is the shifted sample weighted by its multiplicity counts, so
    each draw is a quadratic form in the count vector.
    """
    validate(data)
    _, Z_tgt = balance_matrices(data, policy, standardize)
    n = data.n
    D = pairwise_distances(Z_tgt, Z_tgt)
    idx = bootstrap_indices(n, R, seed)
    counts = np.zeros((R, n))
    np.add.at(counts, (np.repeat(np.arange(R), n), idx.ravel()), 1.0)
    rowsum = D.sum(axis=1)
    CD = counts @ D
    quad = np.einsum("ij,ij->i", CD, counts)
    draws = (2.0 * counts @ rowsum - quad - rowsum.sum()) / (n * n)
    return np.maximum(draws, 0.0)


def feasibility_thresholds(data: Dataset, policy: PolicySpec, R: int = 1000,
                           levels: Sequence[float] = DEFAULT_LEVELS, seed: int = 0,
                           standardize: bool = True) -> np.ndarray:
    """Upper quantiles of the bootstrap null distribution of the energy distance."""
    if R < 50:
        raise ValueError(f"R must be >= 50, got {R}")
    draws = null_energy_draws(data, policy, R, seed, standardize)
    return np.quantile(draws, np.asarray(levels, dtype=np.float64))


def max_safe_tau(tau_grid, balanced_distance, thresholds, levels) -> dict[float, Optional[float]]:
    """Per level, the largest tau before the first grid point whose distance
    reaches the threshold. None if the first point already fails."""
    out = {}
    for j, lev in enumerate(levels):
        safe = None
        for k, tau in enumerate(tau_grid):
            d = balanced_distance[k]
            if not (np.isfinite(d) and d < thresholds[k, j]):
                break
            safe = float(tau)
        out[float(lev)] = safe
    return out


@dataclass
class TauScanResult:
    tau_grid: np.ndarray
    balanced_distance: np.ndarray
    thresholds: np.ndarray
    levels: np.ndarray
    max_safe_tau: dict
    converged: np.ndarray
    errors: list = field(default_factory=list)
    weights: list = field(default_factory=list, compare=False, repr=False)

    def to_rows(self) -> list[dict]:
        rows = []
        for k, tau in enumerate(self.tau_grid):
            row = {"tau": float(tau), "balanced_distance": float(self.balanced_distance[k])}
            for j, lev in enumerate(self.levels):
                row[level_column(lev)] = float(self.thresholds[k, j])
            rows.append(row)
        return rows

    def summary(self) -> dict:
        return {
            "levels": [float(x) for x in self.levels],
            "max_safe_tau": {repr(float(k)): v for k, v in self.max_safe_tau.items()},
            "tau_grid": [float(x) for x in self.tau_grid],
            "balanced_distance": [float(x) for x in self.balanced_distance],
            "thresholds": [[float(x) for x in row] for row in self.thresholds],
            "converged": [bool(x) for x in self.converged],
            "errors": list(self.errors),
        }

    def write(self, csv_path, json_path, extra: Optional[dict] = None) -> None:
        rows = self.to_rows()
        fields = ["tau", "balanced_distance"] + [level_column(lev) for lev in self.levels]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(fields)
            for row in rows:
                writer.writerow([repr(row[f]) for f in fields])
        doc = self.summary()
        if extra:
            doc.update(extra)
        with open(json_path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, csv_path, json_path) -> "TauScanResult":
        with open(json_path) as fh:
            doc = json.load(fh)
        levels = np.array(doc["levels"])
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        tau = np.array([float(r["tau"]) for r in rows])
        dist = np.array([float(r["balanced_distance"]) for r in rows])
        thr = np.array([[float(r[level_column(lev)]) for lev in levels] for r in rows])
        thr = thr.reshape(len(rows), len(levels))
        safe = {float(k): v for k, v in doc["max_safe_tau"].items()}
        return cls(tau, dist, thr, levels, safe, np.array(doc["converged"], dtype=bool), doc["errors"])


def _policy_at(family: PolicyFamily, tau: float) -> PolicySpec:
    if isinstance(family, PolicySpec):
        return family.with_tau(tau)
    return family(tau)


def tau_scan(
    data: Dataset,
    family: PolicyFamily,
    tau_grid: Sequence[float],
    solver_opts: SolverOptions = SolverOptions(),
    R: int = 1000,
    levels: Sequence[float] = DEFAULT_LEVELS,
    seed: int = 0,
    threads: int = 1,
) -> TauScanResult:
    """Solve energy balancing weights and null thresholds at every tau.

    Every tau reuses the same resampling stream (``seed``), so threshold
    curves are smooth in tau. A failure at one tau is recorded and the scan
    moves on.
    """
    validate(data)
    grid = np.asarray(tau_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("tau grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("tau grid must be strictly ascending")
    levels = np.asarray(levels, dtype=np.float64)

    def one(k: int):
        pol = _policy_at(family, grid[k])
        thr = feasibility_thresholds(data, pol, R, levels, seed, solver_opts.standardize)
        try:
            prob = BalanceProblem.from_data(data, pol, solver_opts.metric, solver_opts.bandwidth,
                                            solver_opts.standardize)
            wv = prob.solve(solver_opts)
            if solver_opts.metric != "energy":
                prob = BalanceProblem.from_data(data, pol, "energy", None, solver_opts.standardize)
            return prob.distance(wv.w), thr, wv, None
        except Exception as exc:  # noqa: BLE001 - recorded per tau
            return math.nan, thr, None, f"tau={grid[k]!r}: {exc}"

    results = pmap(one, range(grid.size), threads)
    dist = np.array([r[0] for r in results])
    thr = np.vstack([r[1] for r in results])
    wvs = [r[2] for r in results]
    conv = np.array([wv is not None and wv.converged for wv in wvs])
    errors = [r[3] for r in results if r[3] is not None]
    safe = max_safe_tau(grid, dist, thr, levels)
    return TauScanResult(grid, dist, thr, levels, safe, conv, errors, wvs)


# -- weight comparison ------------------------------------------------------


@dataclass(frozen=True)
class RankedWeights:
    label: str
    distance: float
    dispersion: float
    rank: int

    def to_dict(self) -> dict:
        return {"rank": self.rank, "label": self.label, "distance": self.distance,
                "dispersion": self.dispersion}


def compare_weights(data: Dataset, policy: PolicySpec, candidates, standardize: bool = True,
                    problem: Optional[BalanceProblem] = None) -> list[RankedWeights]:
    """Rank weight sets by weighted energy distance to the shifted sample.

    Ties go to the smaller ``sum((w - 1)**2)``, then to the label.
    """
    candidates = list(candidates)
    if len(candidates) < 2:
        raise ValueError("need >= 2 candidates to compare")
    validate(data)
    if problem is None:
        problem = BalanceProblem.from_data(data, policy, "energy", None, standardize)
    scored = []
    for label, w in candidates:
        w = w.w if isinstance(w, WeightVector) else w
        w = check_weights(w, data.n, label=f"candidate {label!r}")
        scored.append((problem.distance(w), float(np.sum((w - 1.0) ** 2)), str(label)))
    scored.sort()
    return [RankedWeights(lab, d, disp, k + 1) for k, (d, disp, lab) in enumerate(scored)]

import numpy as np
import pytest

from ebmtp.comparators import gps_density_ratio_weights, uniform_weights
from ebmtp.core import Dataset, identity_policy, shift_policy
from ebmtp.diagnostics import (
    TauScanResult,
    compare_weights,
    feasibility_thresholds,
    level_column,
    max_safe_tau,
    tau_scan,
)
from ebmtp.energy import pairwise_distances
from ebmtp.inference import bootstrap_indices
from ebmtp.sim import DGPSpec, benchmark_policy, generate
from ebmtp.solver import BalanceProblem, solve_ebw

from conftest import random_dataset, random_feasible_w


def test_level_columns():
    assert [level_column(x) for x in (0.9, 0.95, 0.975)] == ["thr_90", "thr_95", "thr_975"]


def test_identical_rows_zero_thresholds():
    data = Dataset([[1.0], [1.0]], [2.0, 2.0], [0.0, 1.0])
    thr = feasibility_thresholds(data, shift_policy(1.0), R=50, standardize=False)
    np.testing.assert_array_equal(thr, 0.0)


def test_thresholds_monotone_and_deterministic(rng):
    data = random_dataset(rng, n=50)
    a = feasibility_thresholds(data, shift_policy(1.0), R=200, seed=3)
    assert np.all(np.diff(a) >= 0) and np.all(a >= 0)
    np.testing.assert_array_equal(a, feasibility_thresholds(data, shift_policy(1.0), R=200, seed=3))
    with pytest.raises(ValueError):
        feasibility_thresholds(data, shift_policy(1.0), R=49)


def test_thresholds_shared_index_oracle():
    data = generate(DGPSpec(100, 10, seed=8))
    pol = benchmark_policy(0.5)
    R, seed = 200, 17
    Zo = np.column_stack([data.X, data.A])
    Zt = np.column_stack([data.X, data.A + np.where(data.A < 3, 1.0, 0.5)])
    center, scale = Zo.mean(axis=0), Zo.std(axis=0, ddof=1)
    Zt = (Zt - center) / scale
    n = data.n
    tt = pairwise_distances(Zt, Zt).sum()
    draws = []
    for idx in bootstrap_indices(n, R, seed):
        Zr = Zt[idx]
        e = (2 * pairwise_distances(Zr, Zt).sum() - pairwise_distances(Zr, Zr).sum() - tt) / n**2
        draws.append(max(e, 0.0))
    ref = np.quantile(draws, [0.9, 0.95, 0.975])
    got = feasibility_thresholds(data, pol, R=R, seed=seed)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)


def test_max_safe_tau_prefix_rule():
    grid = [0.0, 1.0, 2.0, 3.0]
    dist = np.array([0.0, 0.5, 2.0, 0.1])
    thr = np.ones((4, 1))
    assert max_safe_tau(grid, dist, thr, [0.95]) == {0.95: 1.0}
    assert max_safe_tau(grid, np.full(4, 5.0), thr, [0.95]) == {0.95: None}
    # reaching the threshold exactly is not safe
    assert max_safe_tau(grid, np.array([0.0, 1.0, 0.0, 0.0]), thr, [0.95]) == {0.95: 0.0}


def test_tau_scan_shape_and_identity(rng):
    data = generate(DGPSpec(120, 6, seed=2))
    res = tau_scan(data, benchmark_policy(), [0.0, 0.5, 1.0], R=100, seed=1)
    assert res.balanced_distance.shape == (3,)
    assert res.thresholds.shape == (3, 3)
    assert np.all(np.diff(res.thresholds, axis=1) >= 0)
    assert abs(res.balanced_distance[0]) <= 1e-8
    assert np.all(res.balanced_distance[0] < res.thresholds[0])
    assert res.converged.all() and not res.errors
    for k, tau in enumerate(res.tau_grid):
        prob = BalanceProblem.from_data(data, benchmark_policy(tau))
        assert res.balanced_distance[k] <= prob.distance(np.ones(data.n)) + 1e-12
    with pytest.raises(ValueError):
        tau_scan(data, benchmark_policy(), [1.0, 0.5], R=100)


def test_tau_scan_records_failures():
    data = Dataset(np.ones((6, 1)), np.ones(6), np.arange(6.0))
    res = tau_scan(data, shift_policy(0.0), [0.0, 1.0], R=50)
    assert len(res.errors) == 2 and np.isnan(res.balanced_distance).all()
    assert res.max_safe_tau[0.95] is None


def test_tau_scan_round_trip(tmp_path, rng):
    data = random_dataset(rng, n=40)
    res = tau_scan(data, shift_policy(0.0), [0.0, 0.25], R=60, seed=2)
    res.write(tmp_path / "s.csv", tmp_path / "s.json")
    back = TauScanResult.read(tmp_path / "s.csv", tmp_path / "s.json")
    np.testing.assert_array_equal(back.tau_grid, res.tau_grid)
    np.testing.assert_array_equal(back.balanced_distance, res.balanced_distance)
    np.testing.assert_array_equal(back.thresholds, res.thresholds)
    assert back.max_safe_tau == res.max_safe_tau


def test_compare_weights_examples(rng):
    data = generate(DGPSpec(150, 6, seed=5))
    pol = benchmark_policy(0.5)
    ebw = solve_ebw(data, pol)
    ranking = compare_weights(data, pol, [("uniform", uniform_weights(data.n)), ("ebw", ebw)])
    assert [r.label for r in ranking] == ["ebw", "uniform"]

    ranking = compare_weights(data, identity_policy(),
                              [("rand", random_feasible_w(rng, data.n)), ("uniform", np.ones(data.n))])
    assert ranking[0].label == "uniform" and abs(ranking[0].distance) <= 1e-12

    cands = [("gps", gps_density_ratio_weights(data, pol)), ("uniform", np.ones(data.n)), ("ebw", ebw)]
    ranking = compare_weights(data, pol, cands)
    assert sorted(r.label for r in ranking) == ["ebw", "gps", "uniform"]
    d = [r.distance for r in ranking]
    assert d == sorted(d)
    assert [r.rank for r in ranking] == [1, 2, 3]


def test_compare_weights_ties_and_errors(rng):
    data = random_dataset(rng, n=20)
    w = np.ones(20)
    ranking = compare_weights(data, identity_policy(), [("b", w), ("a", w)])
    assert [r.label for r in ranking] == ["a", "b"]
    with pytest.raises(ValueError, match="2"):
        compare_weights(data, identity_policy(), [("a", w)])
    bad = np.ones(20)
    bad[0] = -1.0
    with pytest.raises(ValueError, match="bad"):
        compare_weights(data, identity_policy(), [("a", w), ("bad", bad)])

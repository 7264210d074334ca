import math
import time

import numpy as np
import pytest
from scipy import integrate

from ebmtp.energy import (
    DegenerateDataError,
    gaussian_mmd,
    median_heuristic,
    pairwise_distances,
    weighted_energy_distance,
)

from conftest import naive_energy, naive_mmd, random_feasible_w


def test_pairwise_examples(rng):
    np.testing.assert_array_equal(pairwise_distances([[0.0], [2.0]], [[0.0], [2.0]]), [[0, 2], [2, 0]])
    assert pairwise_distances([[0.0, 0.0]], [[3.0, 4.0]])[0, 0] == 5.0
    Z1 = rng.normal(size=(10, 3))
    Z2 = rng.normal(size=(10, 3))
    D = pairwise_distances(Z1, Z2)
    for i in range(10):
        for j in range(10):
            assert abs(D[i, j] - math.sqrt(sum((Z1[i] - Z2[j]) ** 2))) <= 1e-12
    with pytest.raises(ValueError, match="column"):
        pairwise_distances(Z1, Z2[:, :2])


def test_hand_v_statistic():
    rep = weighted_energy_distance([1.0, 1.0], [[0.0], [2.0]], [[1.0], [3.0]])
    assert abs(rep.value - 1.0) <= 1e-12
    assert rep.cross_term == pytest.approx(6 / 4)
    assert rep.obs_term == pytest.approx(1.0)
    assert rep.target_term == pytest.approx(1.0)


def test_identical_samples_zero(rng):
    Z = rng.normal(size=(7, 2))
    assert abs(weighted_energy_distance(np.ones(7), Z, Z).value) <= 1e-12
    assert abs(gaussian_mmd(np.ones(7), Z, Z, 0.7).value) <= 1e-12
    perm = rng.permutation(7)
    assert abs(weighted_energy_distance(np.ones(7), Z, Z[perm]).value) <= 1e-10


def test_energy_matches_naive(rng):
    for _ in range(20):
        n = int(rng.integers(2, 9))
        Zo, Zt = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        w = random_feasible_w(rng, n)
        rep = weighted_energy_distance(w, Zo, Zt)
        assert abs(rep.value - naive_energy(w, Zo, Zt)) <= 1e-10
        assert abs(rep.value - (2 * rep.cross_term - rep.obs_term - rep.target_term)) <= 1e-10 * max(1, abs(rep.value))


def test_mmd_matches_naive_and_closed_form(rng):
    for _ in range(20):
        n = int(rng.integers(2, 7))
        Zo, Zt = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        w = random_feasible_w(rng, n)
        h = float(rng.uniform(0.3, 3))
        assert abs(gaussian_mmd(w, Zo, Zt, h).value - naive_mmd(w, Zo, Zt, h)) <= 1e-10
    for t, h in [(0.5, 1.0), (2.0, 0.7), (-1.3, 2.5)]:
        got = gaussian_mmd([1.0], [[0.0]], [[t]], h).value
        assert abs(got - (2 - 2 * math.exp(-t * t / (2 * h * h)))) <= 1e-14
    with pytest.raises(ValueError, match="bandwidth"):
        gaussian_mmd([1.0], [[0.0]], [[1.0]], 0.0)


def test_median_heuristic():
    assert median_heuristic([[0.0], [1.0], [3.0]]) == 2.0
    with pytest.raises(DegenerateDataError):
        median_heuristic([[1.0, 2.0], [1.0, 2.0]])
    with pytest.raises(ValueError):
        median_heuristic([[1.0]])


def test_median_heuristic_sort_oracle(rng):
    for m in (20, 21):
        Z = rng.normal(size=(m, 4))
        d = sorted(
            math.sqrt(sum((Z[i] - Z[j]) ** 2)) for i in range(m) for j in range(i + 1, m)
        )
        k = len(d)
        ref = d[k // 2] if k % 2 else 0.5 * (d[k // 2 - 1] + d[k // 2])
        assert median_heuristic(Z) == pytest.approx(ref, rel=1e-15, abs=0)


def test_nonnegativity(rng):
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 15))
        Zo, Zt = rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + rng.normal()
        w = random_feasible_w(rng, n)
        worst = min(worst, weighted_energy_distance(w, Zo, Zt).value)
    assert worst >= -1e-10


def test_permutation_invariance(rng):
    n = 12
    Zo, Zt = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    w = random_feasible_w(rng, n)
    base = weighted_energy_distance(w, Zo, Zt).value
    p1, p2 = rng.permutation(n), rng.permutation(n)
    assert abs(weighted_energy_distance(w[p1], Zo[p1], Zt[p2]).value - base) <= 1e-12


def test_infeasible_weights_rejected(rng):
    Z = rng.normal(size=(3, 1))
    with pytest.raises(ValueError, match="sum"):
        weighted_energy_distance([1.0, 1.0, 0.5], Z, Z)
    with pytest.raises(ValueError, match="negative"):
        weighted_energy_distance([2.0, 2.0, -1.0], Z, Z)
    with pytest.raises(ValueError, match="shape"):
        weighted_energy_distance([1.0, 1.0, 1.0], Z, Z[:2])


def _echf_integral(w, zo, zt, T=4000.0):
    n = len(w)

    def integrand(t):
        if t == 0.0:
            return 0.0
        re = np.sum(w * np.cos(t * zo)) / n - np.mean(np.cos(t * zt))
        im = np.sum(w * np.sin(t * zo)) / n - np.mean(np.sin(t * zt))
        return (re * re + im * im) / (t * t)

    # integrand is even in t; C_1 = pi
    edges = np.concatenate([[0.0], np.geomspace(1e-3, T, 400)])
    total = sum(integrate.quad(integrand, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
    return 2.0 * total / math.pi


def test_characteristic_function_identity(rng):
    for n in (2, 3, 4):
        zo, zt = rng.normal(size=n), rng.normal(size=n) + 0.5
        w = random_feasible_w(rng, n)
        v = weighted_energy_distance(w, zo, zt).value
        assert _echf_integral(w, zo, zt) == pytest.approx(v, rel=1e-2)


def test_oracle_timing(rng):
    t0 = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(1, 13))
        Zo, Zt = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        w = random_feasible_w(rng, n)
        weighted_energy_distance(w, Zo, Zt)
        gaussian_mmd(w, Zo, Zt, 1.0)
    assert time.perf_counter() - t0 < 5.0

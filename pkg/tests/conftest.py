"""Shared fixtures and slow-but-obvious reference implementations."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ebmtp.core import Dataset


def naive_energy(w, Zo, Zt) -> float:
    """Triple-loop V-statistic, no vectorisation."""
    n = len(w)

    def d(x, y):
        return math.sqrt(sum((xi - yi) ** 2 for xi, yi in zip(x, y)))

    cross = obs = tgt = 0.0
    for i in range(n):
        for k in range(n):
            cross += w[i] * d(Zo[i], Zt[k])
            obs += w[i] * w[k] * d(Zo[i], Zo[k])
            tgt += d(Zt[i], Zt[k])
    return (2 * cross - obs - tgt) / n**2


def naive_mmd(w, Zo, Zt, h) -> float:
    n = len(w)

    def k(x, y):
        return math.exp(-sum((xi - yi) ** 2 for xi, yi in zip(x, y)) / (2 * h * h))

    cross = obs = tgt = 0.0
    for i in range(n):
        for j in range(n):
            cross += w[i] * k(Zo[i], Zt[j])
            obs += w[i] * w[j] * k(Zo[i], Zo[j])
            tgt += k(Zt[i], Zt[j])
    return (obs + tgt - 2 * cross) / n**2


def random_feasible_w(rng, n) -> np.ndarray:
    w = rng.exponential(size=n)
    return w * (n / w.sum())


def random_dataset(rng, n=30, p=3) -> Dataset:
    X = rng.normal(size=(n, p))
    A = X[:, 0] + rng.normal(size=n)
    Y = A + X.sum(axis=1) + rng.normal(size=n)
    return Dataset(X, A, Y)


def grid_min(prob, step=0.01):
    """Exhaustive search over {w >= 0, sum(w) = 4} on a lattice of spacing ``step``."""
    n = 4
    k = int(round(n / step))
    g = np.arange(k + 1) * step
    G2, G3 = np.meshgrid(g, g, indexing="ij")
    best = np.inf
    for i1 in range(k + 1):
        w2, w3 = G2.ravel(), G3.ravel()
        w4 = n - g[i1] - w2 - w3
        keep = w4 >= -1e-12
        W = np.column_stack([np.full(keep.sum(), g[i1]), w2[keep], w3[keep], np.maximum(w4[keep], 0)])
        vals = (2 * W @ prob.b - np.einsum("ij,jk,ik->i", W, prob.D, W) - prob.c) / n**2
        best = min(best, vals.min())
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

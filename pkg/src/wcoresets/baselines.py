"""Comparison summaries: uniform subsampling and kernel herding."""

from __future__ import annotations

import numpy as np

from .measures import Sampler, as_points, make_rng
from .metrics import KernelSpec


def uniform_indices(size: int, n: int, seed: int = 0) -> np.ndarray:
    """``n`` i.i.d. uniform row indices into a pool of ``size`` rows."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if size < 1:
        raise ValueError("empty pool")
    return make_rng(seed, "uniform").integers(0, size, size=n)


def uniform_baseline(pool_or_sampler, n: int, seed: int = 0) -> np.ndarray:
    """``n`` i.i.d. uniform draws from a pool (with replacement) or from a sampler."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(pool_or_sampler, Sampler):
        return pool_or_sampler.draw(n)
    pool = as_points(pool_or_sampler)
    return pool[uniform_indices(pool.shape[0], n, seed)]


def herding_indices(pool, n: int, kernel: KernelSpec = KernelSpec()) -> np.ndarray:
    """Row indices chosen by kernel herding over ``pool``, without repeats."""
    X = as_points(pool)
    N = X.shape[0]
    if N == 0:
        raise ValueError("empty pool")
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= pool size")
    K = kernel(X, X)
    mean_k = K.mean(axis=1)
    chosen = np.empty(n, dtype=np.int64)
    taken = np.zeros(N, dtype=bool)
    acc = np.zeros(N)  # sum of k(x, x_s) over selected x_s
    for t in range(n):
        score = mean_k - acc / (t + 1)
        score[taken] = -np.inf
        i = int(np.argmax(score))
        chosen[t] = i
        taken[i] = True
        acc += K[i]
    return chosen


def herding_baseline(pool, n: int, kernel: KernelSpec = KernelSpec()) -> np.ndarray:
    """Greedy kernel herding: at step ``t`` take the unused pool point maximizing
    ``mean_j k(x, pool_j) - sum_s k(x, x_s) / (t + 1)``.
    """
    return as_points(pool)[herding_indices(pool, n, kernel)]

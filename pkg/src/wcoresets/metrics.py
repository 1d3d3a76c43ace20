"""Kernel discrepancies and measure-coreset conditions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.spatial.distance import cdist

from .exact_ot import MAX_SUPPORT, exact_wp
from .measures import as_points, make_rng


@dataclass(frozen=True)
class KernelSpec:
    """``gaussian`` with ``bandwidth`` sigma, or ``negative-distance`` ``-|x-y|^power``."""

    kind: str = "gaussian"
    bandwidth: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.bandwidth > 0:
                raise ValueError("bandwidth must be positive")
        elif self.kind == "negative-distance":
            if not 0 < self.power < 2:
                raise ValueError("power must lie in (0, 2)")
        else:
            raise ValueError(f"unknown kernel {self.kind!r}")

    def __call__(self, x, y) -> np.ndarray:
        if self.kind == "gaussian":
            return np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * self.bandwidth**2))
        return -cdist(x, y) ** self.power


def mmd(a, b, kernel: KernelSpec = KernelSpec(), unbiased: bool = False) -> float:
    """Squared MMD between the uniform measures on ``a`` and ``b``.

    The default V-statistic keeps the diagonal terms, so identical samples give
    exactly zero; the result is clamped at zero. ``unbiased=True`` drops the
    within-sample diagonals (U-statistic, can be negative, not clamped).
    """
    x, y = as_points(a), as_points(b)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("empty point set")
    kxx, kyy, kxy = kernel(x, x), kernel(y, y), kernel(x, y)
    if unbiased:
        nx, ny = x.shape[0], y.shape[0]
        if nx < 2 or ny < 2:
            raise ValueError("the unbiased estimate needs two points per sample")
        txx = (kxx.sum() - np.trace(kxx)) / (nx * (nx - 1))
        tyy = (kyy.sum() - np.trace(kyy)) / (ny * (ny - 1))
        return float(txx + tyy - 2 * kxy.mean())
    return max(float(kxx.mean() + kyy.mean() - 2 * kxy.mean()), 0.0)


@dataclass
class ConditionResult:
    family: str
    passed: bool
    margin: float
    distance: float
    epsilon: float
    subsampled: bool = False


def coreset_condition_check(mu_sample, nu, epsilon: float, family: Union[str, tuple] = "lip1",
                            seed: int = 0) -> ConditionResult:
    """Check a sufficient condition for ``nu`` to be an epsilon measure coreset of ``mu``.

    ``family`` is ``"lip1"`` (W1 <= eps), ``("sobolev", M)`` (sqrt(M) W2 <=
    eps) or ``("rkhs", kernel)`` (MMD <= eps, with MMD the square root of
    :func:`mmd`). ``margin`` is ``eps`` minus the bound; zero margin passes.
    Samples too large for the exact solver are subsampled without replacement.
    """
    x, y = as_points(mu_sample), as_points(nu)
    subsampled = False
    name = family if isinstance(family, str) else family[0]
    if name in ("lip1", "sobolev") and x.shape[0] + y.shape[0] > MAX_SUPPORT:
        keep = MAX_SUPPORT - y.shape[0]
        if keep < 1:
            raise ValueError("nu alone exceeds the exact solver size guard")
        x = x[np.sort(make_rng(seed, "condition").choice(x.shape[0], keep, replace=False))]
        subsampled = True
    if name == "lip1":
        dist = exact_wp(x, y, 1)[0]
        bound = dist
    elif name == "sobolev":
        M = float(family[1])
        if not M > 0:
            raise ValueError("density bound M must be positive")
        dist = exact_wp(x, y, 2)[0]
        bound = np.sqrt(M) * dist
    elif name == "rkhs":
        kernel = family[1] if not isinstance(family, str) and len(family) > 1 else KernelSpec()
        dist = bound = float(np.sqrt(mmd(x, y, kernel)))
    else:
        raise ValueError(f"unknown function family {family!r}")
    margin = float(epsilon - bound)
    return ConditionResult(name, margin >= 0, margin, float(dist), float(epsilon), subsampled)

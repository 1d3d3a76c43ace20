"""Entropic optimal transport between point clouds and the Sinkhorn divergence."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import xlogy

from .measures import as_points, weights_of
from .semidiscrete import cost_matrix


@dataclass
class SinkhornResult:
    plan: np.ndarray
    f: np.ndarray
    g: np.ndarray
    cost: float
    converged: bool
    residual: float
    iterations: int


def logsumexp(M: np.ndarray, axis: int) -> np.ndarray:
    # max-shifted log-sum-exp; scipy's version spends most of its time on
    # argument handling for the small matrices in the inner loops here
    m = M.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(M - m).sum(axis=axis))


def _round_to_polytope(P, a, b):
    # Rescale rows/columns that carry too much mass, then add back the deficit
    # as a rank-one correction; the result has exact marginals a and b.
    r = np.minimum(a / np.maximum(P.sum(1), 1e-300), 1.0)
    P = P * r[:, None]
    c = np.minimum(b / np.maximum(P.sum(0), 1e-300), 1.0)
    P = P * c[None, :]
    # deficits are nonnegative in exact arithmetic; clamp rounding noise
    err_a = np.maximum(a - P.sum(1), 0.0)
    err_b = np.maximum(b - P.sum(0), 0.0)
    s = err_a.sum()
    if s > 0:
        P = P + np.outer(err_a, err_b) / s
    return P


def sinkhorn_plan(a, b, p: int = 2, eta: float = 0.1, iters: int = 100, tol: float = 1e-6,
                  a_weights=None, b_weights=None, warn: bool = True) -> SinkhornResult:
    """Entropic transport between two weighted point sets.

    Solves ``min_pi <pi, C> + eta * KL(pi | a x b)`` over couplings of the two
    weight vectors, with ``C_ij = |a_i - b_j|^p``, by log-domain Sinkhorn
    iterations. Iteration stops once the row-marginal L1 residual drops below
    ``tol`` (column marginals are exact after every update). The returned
    plan is projected onto the coupling polytope before the cost is
    evaluated, so ``cost`` is the objective at a feasible coupling.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    xa, xb = as_points(a), as_points(b)
    wa = weights_of(a) if a_weights is None else np.asarray(a_weights, float)
    wb = weights_of(b) if b_weights is None else np.asarray(b_weights, float)
    C = cost_matrix(xa, xb, p)
    log_a, log_b = np.log(wa), np.log(wb)
    f = np.zeros(C.shape[0])
    g = np.zeros(C.shape[1])
    residual = np.inf
    it = 0
    for it in range(1, iters + 1):
        f = -eta * logsumexp(log_b[None, :] + (g[None, :] - C) / eta, axis=1)
        g = -eta * logsumexp(log_a[:, None] + (f[:, None] - C) / eta, axis=0)
        logP = log_a[:, None] + log_b[None, :] + (f[:, None] + g[None, :] - C) / eta
        residual = float(np.abs(np.exp(logP).sum(1) - wa).sum())
        if residual <= tol:
            break
    return _finish(logP, C, wa, wb, eta, f, g, residual, tol, it, warn)


def _finish(logP, C, wa, wb, eta, f, g, residual, tol, it, warn):
    converged = residual <= tol
    if not converged and warn:
        warnings.warn(f"Sinkhorn did not converge in {it} iterations (residual {residual:.2e})",
                      RuntimeWarning, stacklevel=3)
    P = _round_to_polytope(np.exp(logP), wa, wb)
    kl = float(np.sum(xlogy(P, P) - P * (np.log(wa)[:, None] + np.log(wb)[None, :])))
    cost = float(np.sum(P * C) + eta * kl)
    return SinkhornResult(P, f, g, cost, converged, residual, it)


def _averaged_plan(x, y, p, eta, iters, tol, warn) -> SinkhornResult:
    # Sinkhorn between uniform sets where both potentials are updated from the
    # previous pair and averaged with it. On a set against itself the two
    # potentials stay equal, so the divergence of a set with itself is exactly
    # zero, and averaging removes the oscillation of alternating updates there.
    C = cost_matrix(x, y, p)
    wa, wb = np.full(x.shape[0], 1.0 / x.shape[0]), np.full(y.shape[0], 1.0 / y.shape[0])
    log_a, log_b = np.log(wa), np.log(wb)
    f, g = np.zeros(C.shape[0]), np.zeros(C.shape[1])
    residual = np.inf
    it = 0
    for it in range(1, iters + 1):
        f_new = -eta * logsumexp(log_b[None, :] + (g[None, :] - C) / eta, axis=1)
        g_new = -eta * logsumexp(log_a[:, None] + (f[:, None] - C) / eta, axis=0)
        f, g = 0.5 * (f + f_new), 0.5 * (g + g_new)
        logP = log_a[:, None] + log_b[None, :] + (f[:, None] + g[None, :] - C) / eta
        P = np.exp(logP)
        residual = float(np.abs(P.sum(1) - wa).sum() + np.abs(P.sum(0) - wb).sum())
        if residual <= tol:
            break
    return _finish(logP, C, wa, wb, eta, f, g, residual, tol, it, warn)


def _self_plan(x, p, eta, iters, tol, warn) -> SinkhornResult:
    # _averaged_plan(x, x, ...) with the two equal potentials computed once
    C = cost_matrix(x, x, p)
    w = np.full(x.shape[0], 1.0 / x.shape[0])
    log_w = np.log(w)
    f = np.zeros(x.shape[0])
    residual = np.inf
    it = 0
    for it in range(1, iters + 1):
        f = 0.5 * (f - eta * logsumexp(log_w[None, :] + (f[None, :] - C) / eta, axis=1))
        logP = log_w[:, None] + log_w[None, :] + (f[:, None] + f[None, :] - C) / eta
        residual = 2.0 * float(np.abs(np.exp(logP).sum(1) - w).sum())
        if residual <= tol:
            break
    return _finish(logP, C, w, w, eta, f, f, residual, tol, it, warn)


def _cost_grad(x, y, P, p):
    # sum_j P_ij * d/dx_i |x_i - y_j|^p
    diff = x[:, None, :] - y[None, :, :]
    if p == 2:
        return 2.0 * np.einsum("ij,ijk->ik", P, diff)
    dist = np.linalg.norm(diff, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(dist[..., None] > 1e-12, diff / dist[..., None], 0.0)
    if p == 1:
        return np.einsum("ij,ijk->ik", P, unit)
    return p * np.einsum("ij,ijk->ik", P * dist ** (p - 1), unit)


def sinkhorn_divergence(minibatch, sites, p: int = 2, eta: Optional[float] = None, iters: int = 100,
                        tol: float = 1e-6, warn: bool = True):
    """Debiased entropic cost between the uniform measures on ``sites`` and ``minibatch``.

    Returns ``(value, grad)`` where ``grad[i]`` is the derivative of the value
    with respect to site ``i``. Each term is differentiated at its converged
    coupling (envelope theorem); the site-site term depends on the sites
    through both arguments, which doubles its symmetric contribution.
    """
    y = as_points(minibatch)
    x = as_points(sites)
    if eta is None:
        eta = default_eta(y, p)
    xy = _averaged_plan(x, y, p, eta, iters, tol, warn)
    xx = _self_plan(x, p, eta, iters, tol, warn)
    yy = _self_plan(y, p, eta, iters, tol, warn)
    value = xy.cost - 0.5 * (xx.cost + yy.cost)
    grad = _cost_grad(x, y, xy.plan, p) - 0.5 * _cost_grad(x, x, xx.plan + xx.plan.T, p)
    return value, grad


def default_eta(y, p: int = 2) -> float:
    """0.05 times the median pairwise cost within ``y``."""
    y = as_points(y)
    if y.shape[0] < 2:
        return 0.05
    d = pdist(y)
    med = float(np.median(d**p))
    return 0.05 * med if med > 0 else 0.05

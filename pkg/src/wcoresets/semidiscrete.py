"""Semi-discrete optimal transport between a finite site set and a sampled measure.

For sites ``x_1..x_n`` carrying mass ``1/n`` each, the transport cost to a
measure ``mu`` is the maximum over dual weights ``v`` of::

    E_mu[ min_i ( |X - x_i|^p - v_i ) ] + mean(v)

The inner minimum partitions space into power cells. This module evaluates
that objective on minibatches, its supergradient in ``v``, and runs averaged
stochastic ascent to estimate the optimal ``v``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .measures import PointSet, Sampler, StreamExhausted, as_points


@dataclass
class SiteSet:
    """Coreset support: ``n`` pairwise distinct points, each with mass ``1/n``."""

    sites: np.ndarray

    def __post_init__(self):
        self.sites = as_points(self.sites).copy()
        if not np.all(np.isfinite(self.sites)):
            raise ValueError("sites must be finite")
        if self.n > 1 and pdist(self.sites).min() <= 0:
            raise ValueError("sites must be pairwise distinct")

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    @property
    def dim(self) -> int:
        return self.sites.shape[1]

    def __len__(self):
        return self.n

    def as_pointset(self) -> PointSet:
        return PointSet(self.sites)


def site_array(sites) -> np.ndarray:
    if isinstance(sites, SiteSet):
        return sites.sites
    return as_points(sites)


def cost_matrix(y, x, p: float) -> np.ndarray:
    """Matrix of ``|y_k - x_i|^p``; squared distances are computed without roots."""
    if p == 2:
        return cdist(y, x, "sqeuclidean")
    d = cdist(y, x, "euclidean")
    return d if p == 1 else d**p


@dataclass
class CellAssignment:
    """Power-cell index of every query point (0-based) and per-cell counts."""

    indices: np.ndarray
    counts: np.ndarray

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.indices.shape[0]


def _prepare(queries, sites, v, p):
    y = as_points(queries)
    x = site_array(sites)
    if y.shape[1] != x.shape[1]:
        raise ValueError(f"dimension mismatch: queries have d={y.shape[1]}, sites d={x.shape[1]}")
    if y.shape[0] == 0:
        raise ValueError("empty minibatch")
    v = np.zeros(x.shape[0]) if v is None else np.asarray(v, dtype=np.float64)
    if v.shape != (x.shape[0],):
        raise ValueError(f"dual weights must have length {x.shape[0]}")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    return y, x, v


def _relative_cost(y, x, p, sq_norms):
    """Cost matrix up to a per-row constant, plus the mean of that constant.

    For p=2 this is ``|x|^2 - 2 y.x`` (one matrix product); argmins and cell
    counts are those of the full squared distance.
    """
    if p == 2:
        yn = (y**2).sum(1)
        return sq_norms - 2.0 * (y @ x.T), float(yn.mean())
    return cost_matrix(y, x, p), 0.0


def _assign_cost(C, v):
    shifted = C - v
    idx = np.argmin(shifted, axis=1)  # first minimum: lowest index wins ties
    return idx, shifted[np.arange(C.shape[0]), idx]


def assign(queries, sites, v=None, p: int = 2) -> CellAssignment:
    """Map each query ``y`` to ``argmin_i |y - x_i|^p - v_i``."""
    y, x, v = _prepare(queries, sites, v, p)
    idx, _ = _assign_cost(cost_matrix(y, x, p), v)
    return CellAssignment(idx, np.bincount(idx, minlength=x.shape[0]))


def dual_objective(minibatch, sites, v=None, p: int = 2) -> float:
    """Minibatch estimate of the semi-discrete dual objective at ``v``."""
    y, x, v = _prepare(minibatch, sites, v, p)
    _, vals = _assign_cost(cost_matrix(y, x, p), v)
    return float(vals.mean() + v.mean())


def dual_gradient_v(minibatch, sites, v=None, p: int = 2,
                    assignment: Optional[CellAssignment] = None) -> np.ndarray:
    """Supergradient of :func:`dual_objective` in ``v``: ``1/n - (cell occupancy)``."""
    if assignment is None:
        assignment = assign(minibatch, sites, v, p)
    n = assignment.counts.shape[0]
    return 1.0 / n - assignment.fractions


def gauge_fix(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


@dataclass
class DualState:
    v: np.ndarray
    v_avg: np.ndarray
    step_count: int = 0
    objective_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"v": self.v.tolist(), "v_avg": self.v_avg.tolist(), "step_count": self.step_count}

    @classmethod
    def from_dict(cls, d: dict) -> "DualState":
        return cls(np.asarray(d["v"], float), np.asarray(d["v_avg"], float), int(d["step_count"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "DualState":
        return cls.from_dict(json.loads(s))

    @classmethod
    def zeros(cls, n: int) -> "DualState":
        return cls(np.zeros(n), np.zeros(n))


class DualSolveInterrupted(Exception):
    """The sampler ran out of data before ``T_v`` steps completed."""

    def __init__(self, state: DualState, completed: int):
        super().__init__(f"sampler exhausted after {completed} dual steps")
        self.state = state
        self.completed = completed


def step_scale(C: np.ndarray, n: int) -> float:
    """Unit for dual steps: ``n`` times the mean nearest-site cost.

    Changing ``v_i`` by about the nearest-site cost moves a cell boundary by
    about a cell width, i.e. shifts about ``1/n`` of the mass, so this makes
    the step size ``alpha`` dimensionless. Falls back to the mean cost when
    every query sits exactly on a site and some cell is empty.
    """
    nearest = C.min(axis=1)
    s = float(nearest.mean())
    if s == 0.0:
        occupied = np.unique(C.argmin(axis=1)).shape[0]
        s = float(C.mean()) if occupied < C.shape[1] else 0.0
    return n * s


def solve_dual(source: Union[Sampler, PointSet, np.ndarray], sites, p: int = 2, m: int = 256,
               T_v: int = 200, alpha: float = 1.0, warm_start: Optional[DualState] = None,
               scale: Optional[float] = None) -> DualState:
    """Averaged stochastic dual ascent for the optimal weights ``v``.

    With a :class:`Sampler` source every step draws ``m`` fresh points. With a
    fixed point array every step uses the whole array (deterministic
    supergradient of the empirical problem); its cost matrix is computed once.

    Iterates follow ``v <- v + (alpha * scale / sqrt(k)) * grad`` with ``k``
    counted from 1 within this call; ``v_avg`` is the mean of the iterates of
    this call and is returned gauge-fixed to zero mean. ``scale`` defaults to
    :func:`step_scale` on the first batch.
    """
    if T_v < 1:
        raise ValueError("T_v must be >= 1")
    x = site_array(sites)
    n = x.shape[0]
    v = np.zeros(n) if warm_start is None else gauge_fix(np.asarray(warm_start.v_avg, float)).copy()
    if v.shape != (n,):
        raise ValueError("warm start has the wrong number of dual weights")
    total = np.zeros(n)
    trace = []
    fixed = None if isinstance(source, Sampler) else cost_matrix(as_points(source, x.shape[1]), x, p)
    sq_norms = (x**2).sum(1)
    state = DualState(v.copy(), v.copy(), 0, trace)

    for k in range(1, T_v + 1):
        if fixed is None:
            try:
                y = source.draw(m)
            except StreamExhausted:
                state.v, state.v_avg, state.step_count = v, gauge_fix(total / max(k - 1, 1)), k - 1
                raise DualSolveInterrupted(state, k - 1) from None
            if y.shape[1] != x.shape[1]:
                raise ValueError("dimension mismatch between sampler and sites")
            if scale is None:
                scale = step_scale(cost_matrix(y, x, p), n)
            C, offset = _relative_cost(y, x, p, sq_norms)
        else:
            C, offset = fixed, 0.0
        if scale is None:
            scale = step_scale(C, n)
        idx, vals = _assign_cost(C, v)
        trace.append(float(vals.mean() + offset + v.mean()))
        grad = 1.0 / n - np.bincount(idx, minlength=n) / C.shape[0]
        v = v + (alpha * scale / np.sqrt(k)) * grad
        total += v

    state.v = gauge_fix(v)
    state.v_avg = gauge_fix(total / T_v)
    state.step_count = T_v
    return state


@dataclass
class WpEstimate:
    """Monte Carlo transport estimate: ``value`` is W_p, ``objective`` is W_p^p."""

    value: float
    stderr: float
    objective: float
    objective_stderr: float
    samples: int


def _estimate_from_values(vals: np.ndarray, p: int) -> WpEstimate:
    M = vals.shape[0]
    obj = float(vals.mean())
    obj_se = float(vals.std(ddof=1) / np.sqrt(M))
    w = max(obj, 0.0) ** (1.0 / p)
    if p == 1:
        se = obj_se
    else:
        se = obj_se / (p * w ** (p - 1)) if w > 0 else obj_se ** (1.0 / p)
    return WpEstimate(w, se, obj, obj_se, M)


def estimate_wp(sampler: Sampler, sites, dual: Optional[DualState] = None, p: int = 2,
                M: int = 100_000, chunk: int = 20_000) -> WpEstimate:
    """Estimate W_p between the uniform measure on ``sites`` and the sampler's law.

    The dual objective at ``dual.v_avg`` is averaged over ``M`` fresh samples
    and rooted by ``1/p``; any ``v`` gives a lower bound in expectation. The
    standard error of the root uses the delta method.
    """
    if M < 30:
        raise ValueError("M must be at least 30 for a meaningful standard error")
    x = site_array(sites)
    v = np.zeros(x.shape[0]) if dual is None else gauge_fix(np.asarray(dual.v_avg, float))
    vals = np.empty(M)
    done = 0
    while done < M:
        c = min(chunk, M - done)
        y = sampler.draw(c)
        _, vals[done:done + c] = _assign_cost(cost_matrix(y, x, p), v)
        done += c
    vals += v.mean()
    return _estimate_from_values(vals, p)


def stochastic_wp(sampler: Sampler, sites, p: int = 2, M: int = 100_000, T_v: int = 500,
                  m: Optional[int] = None, alpha: float = 1.0) -> WpEstimate:
    """Solve the dual on one sub-stream of ``sampler`` and evaluate on another."""
    x = site_array(sites)
    m = max(256, 4 * x.shape[0]) if m is None else m
    dual = solve_dual(sampler.spawn(1), x, p, m=m, T_v=T_v, alpha=alpha)
    return estimate_wp(sampler.spawn(2), x, dual, p, M)

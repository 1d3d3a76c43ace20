"""Online construction of uniform measure coresets.

Three outer loops share one skeleton: draw a minibatch, refresh the
semi-discrete dual weights on it, move the sites.

* ``w1``: each site steps along the average unit vector towards the points of
  its power cell, with step ``gamma / sqrt(k)``.
* ``w2``: each site jumps to the barycenter of its power cell (fixed point).
* ``sd``: each site follows the gradient of the Sinkhorn divergence between
  the sites and the minibatch.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .measures import Sampler, StreamExhausted, StreamSampler, make_rng, stream_id
from .semidiscrete import (
    DualState,
    SiteSet,
    _assign_cost,
    cost_matrix,
    site_array,
    solve_dual,
    step_scale,
)
from .sinkhorn import default_eta, sinkhorn_divergence

log = logging.getLogger(__name__)

#: consecutive empty iterations after which a site is re-seeded
DEAD_SITE_PATIENCE = 20
#: window for the trailing-mean gradient-norm stopping rule
GRAD_WINDOW = 10


@dataclass
class SolverConfig:
    """Hyperparameters of :func:`build_coreset`.

    ``eta`` selects the path: ``0`` runs the unregularized W1 (``p=1``) or W2
    (``p=2``) solver, a positive value or ``"auto"`` runs the Sinkhorn
    divergence solver. ``m=None`` means ``max(256, 4n)``; ``grad_tolerance``
    of ``None`` means ``1e-4`` times the RMS spread of the first minibatch.
    """

    n: int
    p: int = 2
    m: Optional[int] = None
    gamma: float = 1.0
    outer_iters: int = 100
    T_v: int = 200
    alpha: float = 1.0
    eta: Union[float, str] = 0.0
    sinkhorn_iters: int = 100
    seed: int = 0
    grad_tolerance: Optional[float] = None
    keep_history: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.outer_iters < 0:
            raise ValueError("outer_iters must be >= 0")
        if self.T_v < 1:
            raise ValueError("T_v must be >= 1")
        if self.eta != "auto" and not (isinstance(self.eta, (int, float)) and self.eta >= 0):
            raise ValueError("eta must be >= 0 or 'auto'")
        if self.m is None:
            self.m = max(256, 4 * self.n)
        if self.m < 1:
            raise ValueError("minibatch size must be positive")
        if self.m < self.n:
            warnings.warn(f"minibatch size {self.m} is smaller than coreset size {self.n}", stacklevel=2)

    @property
    def metric(self) -> str:
        if self.eta == "auto" or self.eta > 0:
            return "sd"
        return "w1" if self.p == 1 else "w2"

    @classmethod
    def for_metric(cls, metric: str, n: int, **kw) -> "SolverConfig":
        """Config for ``"w1"``, ``"w2"`` or ``"sd"`` (Sinkhorn divergence, p=2 unless given)."""
        if metric == "w1":
            return cls(n=n, p=1, **kw)
        if metric == "w2":
            return cls(n=n, p=2, **kw)
        if metric == "sd":
            kw.setdefault("eta", "auto")
            kw.setdefault("p", 2)
            return cls(n=n, **kw)
        raise ValueError(f"unknown metric {metric!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverTrace:
    wp_estimate: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    occupancy: list = field(default_factory=list)
    max_displacement: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    sites: list = field(default_factory=list)

    def __len__(self):
        return len(self.objective)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "sites"}
        if self.sites:
            d["sites"] = [np.asarray(s).tolist() for s in self.sites]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverTrace":
        t = cls(**{k: list(v) for k, v in d.items() if k != "sites"})
        t.sites = [np.asarray(s) for s in d.get("sites", [])]
        return t


@dataclass
class CoresetResult:
    sites: SiteSet
    trace: SolverTrace
    config: SolverConfig
    terminated_by: str
    state: Optional["SolverState"] = None

    @property
    def points(self) -> np.ndarray:
        return self.sites.sites


@dataclass
class SolverState:
    """Everything needed to resume :func:`build_coreset` mid-run."""

    sites: np.ndarray
    dual: DualState
    k: int
    empty_run: np.ndarray
    dual_scale: Optional[float]
    eta: Optional[float]
    grad_tolerance: Optional[float]
    rng_state: dict
    sampler_state: dict
    trace: SolverTrace

    def to_dict(self) -> dict:
        return {
            "sites": self.sites.tolist(),
            "dual": self.dual.to_dict(),
            "k": self.k,
            "empty_run": self.empty_run.tolist(),
            "dual_scale": self.dual_scale,
            "eta": self.eta,
            "grad_tolerance": self.grad_tolerance,
            "rng_state": self.rng_state,
            "sampler_state": self.sampler_state,
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolverState":
        return cls(
            sites=np.asarray(d["sites"], float),
            dual=DualState.from_dict(d["dual"]),
            k=int(d["k"]),
            empty_run=np.asarray(d["empty_run"], dtype=np.int64),
            dual_scale=d["dual_scale"],
            eta=d["eta"],
            grad_tolerance=d["grad_tolerance"],
            rng_state=d["rng_state"],
            sampler_state=d["sampler_state"],
            trace=SolverTrace.from_dict(d["trace"]),
        )


def _data_scale(pts: np.ndarray) -> float:
    return float(np.sqrt(((pts - pts.mean(0)) ** 2).sum(1).mean()))


def _make_distinct(pts: np.ndarray, rng: np.random.Generator, scale: float) -> np.ndarray:
    pts = pts.copy()
    jitter = 1e-9 * (scale if scale > 0 else 1.0)
    while pts.shape[0] > 1:
        _, first = np.unique(pts, axis=0, return_index=True)
        dup = np.setdiff1d(np.arange(pts.shape[0]), first)
        if dup.size == 0:
            break
        pts[dup] += jitter * rng.standard_normal((dup.size, pts.shape[1]))
    return pts


def init_sites(sampler: Sampler, n: int, seed: int = 0) -> SiteSet:
    """``n`` draws from the sampler; repeated draws are jittered by ``1e-9`` times the data scale."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = sampler.draw(n)
    scale = float(np.ptp(pts, axis=0).max()) if n > 1 else 0.0
    return SiteSet(_make_distinct(pts, make_rng(seed, "jitter"), scale))


def w1_step(sites, dual: Optional[DualState], minibatch, gamma: float, k: int,
            assignment: Optional[np.ndarray] = None) -> np.ndarray:
    """Move every site by ``gamma/sqrt(k)`` times the mean unit vector towards its cell's points.

    Points closer than ``1e-12`` to their site are left out of that site's
    mean; sites whose cell holds no usable point do not move.
    """
    x = site_array(sites)
    y = np.asarray(minibatch, dtype=np.float64)
    if y.shape[1] != x.shape[1]:
        raise ValueError("dimension mismatch")
    n, d = x.shape
    if assignment is None:
        v = np.zeros(n) if dual is None else dual.v_avg
        assignment, _ = _assign_cost(cost_matrix(y, x, 1), v)
    diff = y - x[assignment]
    dist = np.linalg.norm(diff, axis=1)
    keep = dist >= 1e-12
    unit = diff[keep] / dist[keep, None]
    idx = assignment[keep]
    counts = np.bincount(idx, minlength=n)
    sums = np.zeros((n, d))
    np.add.at(sums, idx, unit)
    moved = counts > 0
    out = x.copy()
    out[moved] += (gamma / np.sqrt(k)) * sums[moved] / counts[moved, None]
    return out


def w2_step(sites, dual: Optional[DualState], minibatch,
            assignment: Optional[np.ndarray] = None) -> np.ndarray:
    """Replace every site by the barycenter of its cell's points; empty cells stay put."""
    x = site_array(sites)
    y = np.asarray(minibatch, dtype=np.float64)
    if y.shape[1] != x.shape[1]:
        raise ValueError("dimension mismatch")
    n, d = x.shape
    if assignment is None:
        v = np.zeros(n) if dual is None else dual.v_avg
        assignment, _ = _assign_cost(cost_matrix(y, x, 2), v)
    counts = np.bincount(assignment, minlength=n)
    sums = np.zeros((n, d))
    np.add.at(sums, assignment, y)
    out = x.copy()
    moved = counts > 0
    out[moved] = sums[moved] / counts[moved, None]
    return out


def build_coreset(sampler: Sampler, config: SolverConfig, resume: Optional[SolverState] = None,
                  checkpoint: Optional[Callable[[SolverState], None]] = None) -> CoresetResult:
    """Run the online coreset solver selected by ``config``.

    Stops after ``config.outer_iters`` iterations, when the trailing mean of
    the gradient norm over the last 10 iterations falls below the tolerance,
    or when a stream sampler runs out of rows. ``checkpoint`` is called with
    the solver state after every iteration; pass a state back as ``resume``
    to continue a run.
    """
    cfg = config
    metric = cfg.metric
    rng = make_rng(cfg.seed, "solver")

    if resume is None:
        sites = init_sites(sampler, cfg.n, cfg.seed).sites
        state = SolverState(sites, DualState.zeros(cfg.n), 0, np.zeros(cfg.n, dtype=np.int64),
                            None, None, cfg.grad_tolerance, {}, {}, SolverTrace())
        if cfg.keep_history:
            state.trace.sites.append(sites.copy())
    else:
        state = resume
        rng.bit_generator.state = state.rng_state
        sampler.set_state(state.sampler_state)
        sites = state.sites.copy()

    # Fresh draws for the dual come from a dedicated sub-stream; a stream
    # cannot be re-read, so there the dual is fitted on the minibatch itself.
    try:
        dual_source = None if isinstance(sampler, StreamSampler) else sampler.spawn(stream_id("dual"))
    except NotImplementedError:
        dual_source = None
    if resume is not None and dual_source is not None and "dual_sampler" in state.sampler_state:
        dual_source.set_state(state.sampler_state["dual_sampler"])

    trace = state.trace
    terminated_by = "iter-budget"
    p = cfg.p

    while state.k < cfg.outer_iters:
        k = state.k + 1
        try:
            y = sampler.draw(cfg.m)
        except StreamExhausted:
            terminated_by = "stream-end"
            break
        if state.grad_tolerance is None:
            state.grad_tolerance = 1e-4 * _data_scale(y)

        if metric == "sd":
            if state.eta is None:
                state.eta = default_eta(y, p) if cfg.eta == "auto" else float(cfg.eta)
            value, grad = sinkhorn_divergence(y, sites, p, state.eta, cfg.sinkhorn_iters, warn=False)
            step = cfg.gamma / np.sqrt(k)
            new = sites - step * (cfg.n / p) * grad
            idx, _ = _assign_cost(cost_matrix(y, sites, p), np.zeros(cfg.n))
            objective, wp = float(value), None
            gnorm_unit = step
        else:
            C = cost_matrix(y, sites, p)
            if state.dual_scale is None:
                state.dual_scale = step_scale(C, cfg.n)
            dual = solve_dual(y if dual_source is None else dual_source, sites, p, m=cfg.m, T_v=cfg.T_v, alpha=cfg.alpha, warm_start=state.dual,
                              scale=state.dual_scale)
            state.dual = dual
            idx, vals = _assign_cost(C, dual.v_avg)
            objective = float(vals.mean() + dual.v_avg.mean())
            wp = max(objective, 0.0) ** (1.0 / p)
            if metric == "w1":
                new = w1_step(sites, dual, y, cfg.gamma, k, assignment=idx)
                gnorm_unit = cfg.gamma / np.sqrt(k)
            else:
                new = w2_step(sites, dual, y, assignment=idx)
                gnorm_unit = 1.0

        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite site coordinates at iteration {k}")
        counts = np.bincount(idx, minlength=cfg.n)
        state.empty_run = np.where(counts == 0, state.empty_run + 1, 0)
        dead = np.flatnonzero(state.empty_run >= DEAD_SITE_PATIENCE)
        if dead.size:
            new[dead] = y[rng.choice(y.shape[0], size=dead.size, replace=False)]
            state.empty_run[dead] = 0
            log.debug("re-seeded %d dead sites at iteration %d", dead.size, k)
        new = _make_distinct(new, rng, _data_scale(y))

        delta = new - sites
        trace.wp_estimate.append(wp)
        trace.objective.append(objective)
        trace.occupancy.append(counts.tolist())
        trace.max_displacement.append(float(np.linalg.norm(delta, axis=1).max()))
        trace.grad_norm.append(float(np.linalg.norm(delta) / gnorm_unit))
        sites = new
        if cfg.keep_history:
            trace.sites.append(sites.copy())

        state.k = k
        state.sites = sites
        state.rng_state = rng.bit_generator.state
        state.sampler_state = sampler.get_state()
        if dual_source is not None:
            state.sampler_state["dual_sampler"] = dual_source.get_state()
        if checkpoint is not None:
            checkpoint(state)

        if len(trace.grad_norm) >= GRAD_WINDOW and \
                np.mean(trace.grad_norm[-GRAD_WINDOW:]) <= state.grad_tolerance:
            terminated_by = "grad-tolerance"
            break

    state.sites = sites
    return CoresetResult(SiteSet(sites), trace, cfg, terminated_by, state)

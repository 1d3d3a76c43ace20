"""Paired-seed experiment grids: summary method x size x repeat on a downstream task.

Synthetic datasets are regenerated from each repeat's seed; user datasets are
held fixed and only the construction seeds vary. Within one repeat every
method sees the same data and the same full-data reference model.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .baselines import herding_indices, uniform_indices
from .measures import EmpiricalSampler, SyntheticSampler, SyntheticSpec, make_rng, stream_id
from .metrics import KernelSpec
from .semidiscrete import assign
from .solvers import SolverConfig, build_coreset
from .tasks import (
    TaskReport,
    _signed,
    kmeans_task,
    laplace_posterior,
    lloyd,
    logreg_posterior_task,
    svm_accuracy,
    svm_task,
    train_svm,
)

TASKS = ("kmeans", "svm", "logreg")
METHODS = ("w1", "w2", "sd", "uniform", "herding")
CORESET_METHODS = ("w1", "w2", "sd")
#: herding works on an n x n kernel matrix; larger pools are subsampled
HERDING_POOL = 2000


@dataclass
class Dataset:
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "data"


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def cluster_mixture(seed: int, n_points: int = 2000, dim: int = 16, clusters: int = 10,
                    spread: float = 4.0) -> Dataset:
    """Equal-weight isotropic Gaussian clusters (unit variance) with N(0, spread^2) means."""
    rng = make_rng(seed, "data")
    means = spread * rng.standard_normal((clusters, dim))
    lab = rng.integers(0, clusters, n_points)
    return Dataset(means[lab] + rng.standard_normal((n_points, dim)), lab, "cluster-mixture")


def svm_blobs(seed: int, n_points: int = 2000, dim: int = 2, separation: float = 1.5,
              label_noise: float = 0.1) -> Dataset:
    """Two unit-variance blobs at +-separation/sqrt(dim) per axis, labels flipped w.p. label_noise."""
    rng = make_rng(seed, "data")
    y = rng.integers(0, 2, n_points)
    center = separation / np.sqrt(dim) * np.ones(dim)
    X = np.where(y[:, None] == 1, center, -center) + rng.standard_normal((n_points, dim))
    flip = rng.random(n_points) < label_noise
    return Dataset(X, np.where(flip, 1 - y, y), "svm-blobs")


def logreg_data(seed: int, n_points: int = 20000, dim: int = 5) -> Dataset:
    """x ~ N(0, I), theta ~ N(0, I), y | x ~ Bernoulli(sigmoid(x . theta))."""
    rng = make_rng(seed, "data")
    X = rng.standard_normal((n_points, dim))
    theta = rng.standard_normal(dim)
    y = (rng.random(n_points) < 1.0 / (1.0 + np.exp(-X @ theta))).astype(np.int64)
    return Dataset(X, y, "logreg")


def four_wells(sigma: float = 0.1, radius: float = 1.0) -> SyntheticSpec:
    """Equal mixture of isotropic Gaussians centred at (+-radius, +-radius)."""
    means = radius * np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], float)
    return SyntheticSpec.mixture([(m, sigma**2 * np.eye(2)) for m in means])


def herding_mixture(seed: int = 0, n_points: int = 1000) -> np.ndarray:
    """2-D pool from a fixed 5-component Gaussian mixture with random covariances."""
    rng = make_rng(0, "herding-mixture")
    comps = []
    for _ in range(5):
        A = rng.standard_normal((2, 2)) * 0.5
        comps.append((rng.uniform(-4, 4, 2), A @ A.T + 0.1 * np.eye(2)))
    return SyntheticSampler(SyntheticSpec.mixture(comps), seed, stream_id("pool")).draw(n_points)


SYNTHETIC_SPECS = {
    "gaussian2d": lambda: SyntheticSpec.gaussian(np.zeros(2)),
    "uniform2d": lambda: SyntheticSpec.uniform_cube(2),
    "banana": SyntheticSpec.banana,
    "mixture4": four_wells,
}

SYNTHETIC_DATASETS = {
    "cluster-mixture": cluster_mixture,
    "svm-blobs": svm_blobs,
    "logreg5d": logreg_data,
}


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------


def repeat_seed(seed: int, r: int) -> int:
    return int(make_rng(seed, "repeat", r).integers(0, 2**63 - 1))


def class_sizes(labels: np.ndarray, n: int, split: str) -> dict:
    """Per-class summary sizes: ``equal`` shares or ``proportional`` (largest remainder)."""
    classes, counts = np.unique(labels, return_counts=True)
    k = classes.shape[0]
    if n < k:
        raise ValueError(f"summary size {n} is smaller than the number of classes {k}")
    if split == "equal":
        sizes = np.full(k, n // k)
        sizes[: n % k] += 1
    elif split == "proportional":
        exact = n * counts / counts.sum()
        sizes = np.maximum(np.floor(exact).astype(int), 1)
        while sizes.sum() < n:
            sizes[np.argmax(exact - sizes)] += 1
        while sizes.sum() > n:
            sizes[np.argmax(np.where(sizes > 1, sizes - exact, -np.inf))] -= 1
    else:
        raise ValueError(f"unknown split {split!r}")
    return dict(zip(classes.tolist(), sizes.tolist()))


def _summarize_one(method, X, n, seed, tag, solver_kw):
    """Summary points of ``X``, plus the selected rows (baselines) or the solver result."""
    if method in CORESET_METHODS:
        sampler = EmpiricalSampler(X, seed, stream_id(f"{method}/{tag}"))
        cfg = SolverConfig.for_metric(method, n, seed=seed, **(solver_kw or {}))
        result = build_coreset(sampler, cfg)
        return result.points, None, result
    if method == "uniform":
        rows = uniform_indices(X.shape[0], n, int(make_rng(seed, f"uniform/{tag}").integers(2**62)))
        return X[rows], rows, None
    if method == "herding":
        rows = np.arange(X.shape[0])
        if rows.shape[0] > HERDING_POOL:
            rows = np.sort(make_rng(seed, f"herding/{tag}").choice(rows.shape[0], HERDING_POOL, replace=False))
        pool = X[rows]
        rows = rows[herding_indices(pool, n, median_kernel(pool))]
        return X[rows], rows, None
    raise ValueError(f"unknown method {method!r}")


def median_kernel(X: np.ndarray, max_points: int = 1000) -> KernelSpec:
    """Gaussian kernel with the median-heuristic bandwidth."""
    d = pdist(X[:max_points])
    med = float(np.median(d)) if d.size else 1.0
    return KernelSpec("gaussian", bandwidth=med if med > 0 else 1.0)


def cell_label_means(X: np.ndarray, positive: np.ndarray, result) -> np.ndarray:
    """Fraction of positive rows of ``X`` in each power cell of a solver result.

    Cells use the solver's final averaged dual weights. An empty cell takes
    the overall positive rate.
    """
    p = result.config.p
    v = result.state.dual.v_avg if result.state is not None else None
    cells = assign(X, result.points, v, p)
    pos = np.bincount(cells.indices, weights=positive, minlength=cells.counts.shape[0])
    return np.where(cells.counts > 0, pos / np.maximum(cells.counts, 1), positive.mean())


def summarize(method: str, X: np.ndarray, n: int, seed: int, labels: Optional[np.ndarray] = None,
              split: str = "equal", solver_kw: Optional[dict] = None):
    """Summary of ``X`` with ``n`` points; returns ``(points, labels)``.

    With labels and ``split`` in {"equal", "proportional"}, one summary is
    built per class and the results are merged. With ``split="soft"`` a
    single summary is built on the features of binary-labelled data and
    every point carries the probability of the larger label: the fraction
    of positive rows in its cell for coresets, 0 or 1 for selected rows.
    """
    X = np.asarray(X, dtype=np.float64)
    if labels is None:
        return _summarize_one(method, X, n, seed, "all", solver_kw)[0], None
    labels = np.asarray(labels)
    if split == "soft":
        classes = np.unique(labels)
        if classes.shape[0] != 2:
            raise ValueError("soft labels need exactly two classes")
        positive = (labels == classes[1]).astype(np.float64)
        S, rows, result = _summarize_one(method, X, n, seed, "all", solver_kw)
        return S, positive[rows] if rows is not None else cell_label_means(X, positive, result)
    pts, labs = [], []
    for c, nc in class_sizes(labels, n, split).items():
        S = _summarize_one(method, X[labels == c], nc, seed, f"class{c}", solver_kw)[0]
        pts.append(S)
        labs.append(np.full(S.shape[0], c))
    return np.vstack(pts), np.concatenate(labs)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass
class TaskSpec:
    task: str
    k: int = 10
    lam: float = 0.01
    svm_epochs: int = 10_000
    restarts: int = 50
    solver_kw: Optional[dict] = None

    @property
    def split(self) -> Optional[str]:
        return {"kmeans": None, "svm": "equal", "logreg": "soft"}[self.task]


def _reference(spec: TaskSpec, data: Dataset, seed: int):
    if spec.task == "kmeans":
        return lloyd(data.X, spec.k, seed, spec.restarts)[0]
    if spec.task == "svm":
        y, _ = _signed(data.labels)
        return svm_accuracy(train_svm(data.X, y, spec.lam, spec.svm_epochs), data.X, y)
    classes = np.unique(data.labels)
    return laplace_posterior(data.X, (data.labels == classes[-1]).astype(float))


def _metric(spec: TaskSpec, data: Dataset, ref, S, yS, seed: int) -> float:
    if spec.task == "kmeans":
        return kmeans_task(data.X, S, spec.k, seed, spec.restarts, full_centers=ref)
    if spec.task == "svm":
        return svm_task(data.X, data.labels, S, yS, spec.lam, spec.svm_epochs, full_accuracy=ref)
    return logreg_posterior_task(data.X, data.labels, S, yS, full_posterior=ref, soft_labels=True)


def run_repeat(spec: TaskSpec, data_factory: Callable[[int], Dataset], methods: Sequence[str],
               sizes: Sequence[int], seed: int, r: int, on_summary=None) -> list:
    """All (method, size) cells of repeat ``r``; returns ``(method, size, seed_r, metric)`` rows."""
    s = repeat_seed(seed, r)
    data = data_factory(s)
    ref = _reference(spec, data, s)
    rows = []
    use_labels = data.labels if spec.task != "kmeans" else None
    for method in methods:
        for size in sizes:
            S, yS = summarize(method, data.X, size, s, use_labels, spec.split or "equal", spec.solver_kw)
            if on_summary is not None:
                on_summary(method, size, s, S, yS)
            rows.append((method, int(size), s, _metric(spec, data, ref, S, yS, s)))
    return rows


def _run_repeat_star(args):
    return run_repeat(*args)


def run_experiment(spec: TaskSpec, data_factory: Callable[[int], Dataset], methods: Sequence[str],
                   sizes: Sequence[int], repeats: int = 20, seed: int = 0, workers: Optional[int] = None,
                   on_summary=None) -> TaskReport:
    """Full grid over methods x sizes x repeats with paired seeds.

    Repeats run in a process pool of ``workers`` (default: ``MC_THREADS`` or 1);
    rows are merged in (method, size, seed) order so the report does not
    depend on scheduling. ``on_summary`` forces serial execution.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if workers is None:
        workers = int(os.environ.get("MC_THREADS", "1"))
    report = TaskReport(spec.task)
    jobs = [(spec, data_factory, tuple(methods), tuple(sizes), seed, r) for r in range(repeats)]
    if workers > 1 and on_summary is None and repeats > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_repeat_star, jobs))
    else:
        results = [run_repeat(*job, on_summary=on_summary) for job in jobs]
    for rows in results:
        for row in rows:
            report.add(*row)
    report.rows = report.sorted_rows()
    return report


class FixedData:
    """Picklable data factory returning the same dataset for every seed."""

    def __init__(self, data: Dataset):
        self.data = data

    def __call__(self, seed: int) -> Dataset:
        return self.data

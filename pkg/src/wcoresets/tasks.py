"""Downstream tasks used to judge a summary of a dataset.

Each task trains the same model on the summary and on the full data and
compares them on the full data:

* k-means: relative excess cost of the summary's centers.
* linear soft-margin SVM: accuracy ratio.
* Bayesian logistic regression: KL divergence between Laplace posteriors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, log_expit

from .measures import as_points, make_rng


# ---------------------------------------------------------------------------
# k-means
# ---------------------------------------------------------------------------


def _sqdist(X, Y):
    return cdist(X, Y, "sqeuclidean")


def kmeans_cost(X: np.ndarray, centers: np.ndarray) -> float:
    """Sum over ``X`` of the squared distance to the nearest center."""
    return float(_sqdist(X, centers).min(axis=1).sum())


def _kmeanspp(X, k, rng):
    # D^2 seeding
    centers = [X[rng.integers(X.shape[0])]]
    d2 = _sqdist(X, centers[0][None]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            i = int(rng.integers(X.shape[0]))
        else:
            i = int(rng.choice(X.shape[0], p=d2 / total))
        centers.append(X[i])
        d2 = np.minimum(d2, _sqdist(X, X[i][None]).ravel())
    return np.array(centers)


def lloyd(X, k: int, seed: int = 0, restarts: int = 50, max_iter: int = 200, tol: float = 1e-9):
    """Best of ``restarts`` Lloyd runs from k-means++ seeds.

    Returns ``(centers, cost, history)`` where ``history`` is the objective
    after each iteration of the winning run. Empty clusters keep their center.
    """
    X = as_points(X)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k={k} must lie in [1, {X.shape[0]}]")
    rng = make_rng(seed, "lloyd")
    best = None
    for _ in range(restarts):
        centers = _kmeanspp(X, k, rng)
        history = []
        prev = np.inf
        for _ in range(max_iter):
            d2 = _sqdist(X, centers)
            lab = d2.argmin(axis=1)
            cost = float(d2[np.arange(X.shape[0]), lab].sum())
            history.append(cost)
            counts = np.bincount(lab, minlength=k)
            sums = np.zeros_like(centers)
            np.add.at(sums, lab, X)
            nz = counts > 0
            centers = centers.copy()
            centers[nz] = sums[nz] / counts[nz, None]
            if prev - cost <= tol * max(cost, 1e-300):
                break
            prev = cost
        cost = kmeans_cost(X, centers)
        history.append(cost)
        if best is None or cost < best[1]:
            best = (centers, cost, history)
    return best


def kmeans_task(full, summary, k: int, seed: int = 0, restarts: int = 50,
                full_centers: Optional[np.ndarray] = None) -> float:
    """``|1 - J(Q_c) / J(Q*)|`` on the full data, with ``Q_c`` fit on the summary.

    ``full_centers`` can pass in a previously computed ``Q*``.
    """
    X, S = as_points(full), as_points(summary)
    if k > S.shape[0]:
        raise ValueError("k exceeds the summary size")
    Qc = lloyd(S, k, seed, restarts)[0]
    Qs = lloyd(X, k, seed, restarts)[0] if full_centers is None else full_centers
    return abs(1.0 - kmeans_cost(X, Qc) / kmeans_cost(X, Qs))


# ---------------------------------------------------------------------------
# SVM
# ---------------------------------------------------------------------------


def _signed(labels):
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.shape[0] != 2:
        raise ValueError(f"expected exactly two labels, found {classes.tolist()}")
    return np.where(labels == classes[1], 1.0, -1.0), classes


def train_svm(X, y, lam: float = 0.01, epochs: int = 10_000) -> np.ndarray:
    """Linear soft-margin SVM by full-batch projected subgradient descent.

    Features are augmented with a constant 1 for the bias; step ``1/(lam t)``;
    iterates are projected on the ball of radius ``1/sqrt(lam)``. ``y`` is in
    {-1, +1}. Returns the augmented weight vector.
    """
    Z = np.column_stack([as_points(X), np.ones(len(y))])
    yZ = y[:, None] * Z
    w = np.zeros(Z.shape[1])
    radius = 1.0 / np.sqrt(lam)
    N = Z.shape[0]
    for t in range(1, epochs + 1):
        active = yZ @ w < 1.0
        grad = lam * w - yZ[active].sum(0) / N
        w = w - grad / (lam * t)
        nrm = np.linalg.norm(w)
        if nrm > radius:
            w *= radius / nrm
    return w


def svm_accuracy(w, X, y) -> float:
    Z = np.column_stack([as_points(X), np.ones(len(y))])
    pred = np.where(Z @ w >= 0, 1.0, -1.0)
    return float(np.mean(pred == y))


def svm_task(full, full_labels, summary, summary_labels, lam: float = 0.01, epochs: int = 10_000,
             full_accuracy: Optional[float] = None) -> float:
    """Accuracy on the full data of the summary-trained SVM over that of the full-trained SVM."""
    y_full, classes = _signed(full_labels)
    sl = np.asarray(summary_labels)
    if np.unique(sl).shape[0] != 2:
        raise ValueError("summary must contain both classes")
    if not set(np.unique(sl)) <= set(classes.tolist()):
        raise ValueError("summary labels differ from the full data labels")
    y_sum = np.where(sl == classes[1], 1.0, -1.0)
    if full_accuracy is None:
        full_accuracy = svm_accuracy(train_svm(full, y_full, lam, epochs), full, y_full)
    acc = svm_accuracy(train_svm(summary, y_sum, lam, epochs), full, y_full)
    return acc / full_accuracy


# ---------------------------------------------------------------------------
# Bayesian logistic regression
# ---------------------------------------------------------------------------


def laplace_posterior(X, y, scale: float = 1.0, iters: int = 50, tol: float = 1e-10):
    """Laplace approximation of the logistic-regression posterior under a N(0, I) prior.

    ``y`` in {0, 1}; the log-likelihood is multiplied by ``scale``. The MAP is
    found by Newton's method; returns ``(mean, covariance)``.
    """
    X = as_points(X)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    theta = np.zeros(d)
    for _ in range(iters):
        s = expit(X @ theta)
        grad = theta - scale * X.T @ (y - s)
        H = np.eye(d) + scale * (X.T * (s * (1 - s))) @ X
        step = np.linalg.solve(H, grad)
        theta = theta - step
        if np.linalg.norm(step) <= tol:
            break
    s = expit(X @ theta)
    H = np.eye(d) + scale * (X.T * (s * (1 - s))) @ X
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("posterior Hessian is not positive definite") from None
    Linv = np.linalg.inv(L)
    return theta, Linv.T @ Linv


def log_posterior(theta, X, y, scale=1.0) -> float:
    z = X @ theta
    return float(-0.5 * theta @ theta + scale * np.sum(y * log_expit(z) + (1 - y) * log_expit(-z)))


def gaussian_kl(mu0, cov0, mu1, cov1) -> float:
    """KL(N(mu0, cov0) || N(mu1, cov1))."""
    mu0, mu1 = np.asarray(mu0, float), np.asarray(mu1, float)
    cov0, cov1 = np.atleast_2d(cov0), np.atleast_2d(cov1)
    d = mu0.shape[0]
    L1 = np.linalg.cholesky(cov1)
    L0 = np.linalg.cholesky(cov0)
    A = np.linalg.solve(L1, L0)
    diff = np.linalg.solve(L1, mu1 - mu0)
    logdet = 2 * (np.log(np.diag(L1)).sum() - np.log(np.diag(L0)).sum())
    return float(0.5 * (np.sum(A**2) + diff @ diff - d + logdet))


def logreg_posterior_task(full, full_labels, summary, summary_labels, full_posterior=None,
                          soft_labels: bool = False) -> float:
    """KL from the summary's Laplace posterior to the full-data one.

    The summary's log-likelihood is scaled by ``|full| / |summary|``.
    Labels are mapped to {0, 1} with the larger label as 1. With
    ``soft_labels`` the summary labels are already probabilities of that
    label; the Bernoulli log-likelihood is linear in them.
    """
    X, S = as_points(full), as_points(summary)
    fl = np.asarray(full_labels)
    classes = np.unique(fl)
    if classes.shape[0] != 2:
        raise ValueError("full labels must be binary")
    y_full = (fl == classes[1]).astype(float)
    if soft_labels:
        y_sum = np.asarray(summary_labels, dtype=float)
        if np.any((y_sum < 0) | (y_sum > 1)):
            raise ValueError("soft labels must lie in [0, 1]")
    else:
        y_sum = (np.asarray(summary_labels) == classes[1]).astype(float)
    if y_sum.shape != (S.shape[0],):
        raise ValueError("one label per summary point is required")
    if full_posterior is None:
        full_posterior = laplace_posterior(X, y_full)
    post = laplace_posterior(S, y_sum, scale=X.shape[0] / S.shape[0])
    return gaussian_kl(post[0], post[1], full_posterior[0], full_posterior[1])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class TaskReport:
    """Metric values of one task, keyed by (method, size); one value per seed."""

    task: str
    rows: list = field(default_factory=list)  # (method, size, seed, metric)

    def add(self, method: str, size: int, seed: int, metric: float):
        self.rows.append((method, int(size), int(seed), float(metric)))

    def values(self, method: str, size: int) -> np.ndarray:
        return np.array([r[3] for r in self.rows if r[0] == method and r[1] == size])

    def summary(self) -> list:
        cells = sorted({(r[0], r[1]) for r in self.rows})
        out = []
        for method, size in cells:
            v = self.values(method, size)
            out.append({
                "task": self.task, "method": method, "size": size, "repeats": int(v.size),
                "mean": float(v.mean()), "std": float(v.std(ddof=1)) if v.size >= 2 else None,
            })
        return out

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r[0], r[1], r[2]))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["task", "method", "size", "seed", "metric"])
            for method, size, seed, metric in self.sorted_rows():
                w.writerow([self.task, method, size, seed, repr(metric)])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)

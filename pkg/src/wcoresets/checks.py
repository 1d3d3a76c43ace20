"""Fast invariant suite behind ``wcoresets check``.

Every check is a zero-argument callable returning ``True`` on success; an
exception counts as a failure. The whole standard suite runs in a few seconds.
"""

from __future__ import annotations

import itertools
from typing import Callable, List, Optional, TextIO, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from .baselines import herding_indices
from .exact_ot import exact_wp
from .io import read_coreset_csv
from .measures import EmpiricalSampler, make_rng
from .metrics import KernelSpec
from .semidiscrete import assign, cost_matrix, dual_gradient_v, dual_objective
from .sinkhorn import sinkhorn_divergence, sinkhorn_plan
from .solvers import SolverConfig, build_coreset, w1_step
from .tasks import gaussian_kl

Check = Tuple[str, Callable[[], bool]]


def _brute_force_wp(a, b, p):
    C = cost_matrix(a, b, p)
    n = a.shape[0]
    best = min(C[np.arange(n), list(perm)].mean() for perm in itertools.permutations(range(n)))
    return best ** (1.0 / p)


def _exact_vs_permutations():
    rng = make_rng(0, "check", "exact")
    for _ in range(20):
        n = int(rng.integers(1, 6))
        a, b = rng.random((n, 2)), rng.random((n, 2))
        for p in (1, 2):
            if abs(exact_wp(a, b, p)[0] - _brute_force_wp(a, b, p)) > 1e-9:
                return False
    return True


def _w1_below_w2():
    rng = make_rng(0, "check", "order")
    for _ in range(20):
        a, b = rng.standard_normal((int(rng.integers(2, 8)), 2)), rng.standard_normal((int(rng.integers(2, 8)), 2))
        if exact_wp(a, b, 1)[0] > exact_wp(a, b, 2)[0] + 1e-9:
            return False
    return True


def _sinkhorn_upper_bound():
    rng = make_rng(0, "check", "sinkhorn")
    for _ in range(10):
        a, b = rng.standard_normal((6, 2)), rng.standard_normal((5, 2))
        if sinkhorn_plan(a, b, 2, eta=0.1, warn=False).cost < exact_wp(a, b, 2)[1].cost - 1e-9:
            return False
    return True


def _sd_self_zero():
    a = make_rng(0, "check", "sd").standard_normal((8, 2))
    return abs(sinkhorn_divergence(a, a, 2, eta=0.5, warn=False)[0]) <= 1e-8


def _dual_gradient_fd():
    rng = make_rng(0, "check", "dual-grad")
    y, x = rng.standard_normal((50, 2)), rng.standard_normal((4, 2))
    v = 0.1 * rng.standard_normal(4)
    g = dual_gradient_v(y, x, v)
    h = 1e-7
    fd = np.array([(dual_objective(y, x, v + h * e) - dual_objective(y, x, v - h * e)) / (2 * h)
                   for e in np.eye(4)])
    return np.linalg.norm(g - fd) <= 1e-6 * max(np.linalg.norm(g), 1e-12)


def _sd_gradient_fd():
    rng = make_rng(0, "check", "sd-grad")
    y, x = rng.standard_normal((20, 2)), rng.standard_normal((3, 2))
    _, g = sinkhorn_divergence(y, x, 2, eta=0.5, iters=2000, tol=1e-13, warn=False)
    h = 1e-5
    fd = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        fd[idx] = (sinkhorn_divergence(y, xp, 2, eta=0.5, iters=2000, tol=1e-13, warn=False)[0]
                   - sinkhorn_divergence(y, xm, 2, eta=0.5, iters=2000, tol=1e-13, warn=False)[0]) / (2 * h)
    return np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


def _tie_lowest_index():
    return int(assign(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0], [-1.0, 0.0]])).indices[0]) == 0


def _w1_step_direction():
    new = w1_step(np.array([[0.0, 0.0]]), None, np.array([[1.0, 0.0]]), gamma=0.5, k=1)
    return np.allclose(new, [[0.5, 0.0]], atol=1e-12)


def _herding_deterministic():
    pool = make_rng(0, "check", "herding").standard_normal((40, 2))
    a = herding_indices(pool, 10, KernelSpec())
    return np.array_equal(a, herding_indices(pool, 10, KernelSpec())) and np.unique(a).shape[0] == 10


def _gaussian_kl_identity():
    mu = np.array([1.0, -2.0, 0.5])
    return abs(gaussian_kl(np.zeros(3), np.eye(3), mu, np.eye(3)) - mu @ mu / 2) <= 1e-12


def _exact_recovery():
    data = make_rng(0, "check", "recovery").random((8, 2))
    res = build_coreset(EmpiricalSampler(data, 1), SolverConfig(n=8, p=2, seed=1))
    scale = np.sqrt(((data - data.mean(0)) ** 2).sum(1).mean())
    return exact_wp(data, res.points, 2)[0] <= 1e-3 * scale


def standard_checks() -> List[Check]:
    return [
        ("exact-wp-vs-permutations", _exact_vs_permutations),
        ("w1-le-w2", _w1_below_w2),
        ("sinkhorn-cost-ge-exact", _sinkhorn_upper_bound),
        ("sd-self-zero", _sd_self_zero),
        ("dual-gradient-fd", _dual_gradient_fd),
        ("sd-gradient-fd", _sd_gradient_fd),
        ("cell-ties-lowest-index", _tie_lowest_index),
        ("w1-step-direction", _w1_step_direction),
        ("herding-deterministic", _herding_deterministic),
        ("gaussian-kl-identity", _gaussian_kl_identity),
        ("exact-recovery", _exact_recovery),
    ]


def coreset_checks(path, dim: Optional[int] = None) -> List[Check]:
    """Checks on a coreset file: it parses, is finite, has distinct rows and the expected width."""
    loaded = {}

    def parse():
        loaded["S"] = read_coreset_csv(path)
        return loaded["S"].shape[0] >= 1

    def finite():
        return "S" in loaded and bool(np.all(np.isfinite(loaded["S"])))

    def distinct():
        S = loaded.get("S")
        return S is not None and (S.shape[0] < 2 or pdist(S).min() > 0)

    checks = [("coreset-parse", parse), ("coreset-finite", finite), ("coreset-distinct", distinct)]
    if dim is not None:
        checks.append(("coreset-dimension", lambda: "S" in loaded and loaded["S"].shape[1] == dim))
    return checks


def run_checks(checks: List[Check], out: TextIO) -> int:
    """Run ``checks``, print ``CHECK <name> PASS|FAIL`` lines and return the failure count."""
    failed = 0
    for name, fn in checks:
        try:
            ok = bool(fn())
        except Exception as exc:  # a crashing check is a failing check
            ok = False
            print(f"# {name}: {type(exc).__name__}: {exc}", file=out)
        failed += not ok
        print(f"CHECK {name} {'PASS' if ok else 'FAIL'}", file=out)
    return failed

"""Shared independent oracles.

These use only numpy/scipy primitives (permutation enumeration, a generic LP
solver, central differences) and none of the package's solvers.
"""

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog


def pairwise_cost(a, b, p):
    d = np.sqrt(((np.asarray(a)[:, None, :] - np.asarray(b)[None, :, :]) ** 2).sum(-1))
    return d**p


def brute_force_wp(a, b, p):
    """W_p between equal-size uniform sets: best of all n! matchings."""
    C = pairwise_cost(a, b, p)
    n = C.shape[0]
    best = min(C[np.arange(n), list(perm)].mean() for perm in itertools.permutations(range(n)))
    return best ** (1.0 / p)


def lp_wp(a, b, p, wa=None, wb=None):
    """W_p^p from the transport linear program, solved by scipy's HiGHS."""
    C = pairwise_cost(a, b, p)
    m, n = C.shape
    wa = np.full(m, 1.0 / m) if wa is None else np.asarray(wa, float)
    wb = np.full(n, 1.0 / n) if wb is None else np.asarray(wb, float)
    rows = np.kron(np.eye(m), np.ones(n))
    cols = np.kron(np.ones(m), np.eye(n))
    res = linprog(C.ravel(), A_eq=np.vstack([rows, cols]), b_eq=np.concatenate([wa, wb]),
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def central_difference(f, x, h):
    """Gradient of scalar ``f`` at array ``x`` by central differences."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting ---------------------------------------------------------------

CRITERIA = {}


@pytest.fixture
def criterion():
    """``criterion(number, passed, detail)`` records one acceptance verdict and prints it."""

    def record(number, passed, detail):
        line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
        CRITERIA[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])

"""Exact discrete optimal transport by the transportation simplex method."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .measures import as_points, weights_of
from .semidiscrete import cost_matrix

#: largest combined support accepted by :func:`exact_wp`
MAX_SUPPORT = 512


@dataclass
class TransportPlan:
    coupling: np.ndarray
    cost: float


def _northwest_corner(a, b):
    m, n = a.shape[0], b.shape[0]
    flow = np.zeros((m, n))
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        q = min(ra[i], rb[j])
        flow[i, j] = q
        basis.append((i, j))
        ra[i] -= q
        rb[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return flow, basis


def _tree(basis, m, n):
    """BFS over the basis spanning tree from row node 0.

    Nodes ``0..m-1`` are rows and ``m..m+n-1`` columns. Returns parent and
    depth arrays plus, for each node, the basis cell joining it to its parent.
    """
    adj = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    parent = np.full(m + n, -1)
    depth = np.full(m + n, -1)
    depth[0] = 0
    order = [0]
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if depth[w] < 0:
                depth[w] = depth[u] + 1
                parent[w] = u
                order.append(w)
                queue.append(w)
    return parent, depth, order


def _cell(u, w, m):
    return (u, w - m) if u < m else (w, u - m)


def transport_simplex(a, b, C, tol=1e-12, max_pivots=1_000_000):
    """Minimize ``<P, C>`` over couplings of ``a`` and ``b``.

    Starts from the northwest-corner basis and pivots with Bland's rule: the
    entering cell is the first (row-major) cell with negative reduced cost,
    the leaving cell the first among the tied minimum-flow cells of the
    cycle. Returns the optimal coupling.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    C = np.asarray(C, float)
    m, n = C.shape
    flow, basis = _northwest_corner(a, b)
    thresh = tol * max(1.0, float(np.abs(C).max()))

    for _ in range(max_pivots):
        parent, depth, order = _tree(basis, m, n)
        # potentials u_i + v_j = C_ij on basic cells
        pot = np.zeros(m + n)
        for node in order[1:]:
            i, j = _cell(node, parent[node], m)
            pot[node] = C[i, j] - pot[parent[node]]
        reduced = C - pot[:m, None] - pot[None, m:]
        neg = reduced.ravel() < -thresh
        if not neg.any():
            return flow
        e = int(np.argmax(neg))
        ei, ej = divmod(e, n)

        # tree path between row ei and column ej via their common ancestor
        u, w = ei, m + ej
        left, right = [], []
        while depth[u] > depth[w]:
            left.append(_cell(u, parent[u], m))
            u = parent[u]
        while depth[w] > depth[u]:
            right.append(_cell(w, parent[w], m))
            w = parent[w]
        while u != w:
            left.append(_cell(u, parent[u], m))
            right.append(_cell(w, parent[w], m))
            u, w = parent[u], parent[w]
        path = left + right[::-1]  # from row ei to column ej
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min((c for c in minus if flow[c] <= theta), key=lambda c: c[0] * n + c[1])
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[ei, ej] += theta
        flow[leaving] = 0.0
        basis.remove(leaving)
        basis.append((ei, ej))
    raise RuntimeError("transportation simplex exceeded the pivot budget")


def exact_wp(a, b, p: int = 2, a_weights=None, b_weights=None):
    """Exact W_p between two finite weighted point sets.

    Returns ``(W_p, TransportPlan)`` where ``plan.cost`` is ``W_p^p``.
    """
    xa, xb = as_points(a), as_points(b)
    if xa.shape[1] != xb.shape[1]:
        raise ValueError("dimension mismatch")
    if xa.shape[0] + xb.shape[0] > MAX_SUPPORT:
        raise ValueError(f"combined support {xa.shape[0] + xb.shape[0]} exceeds {MAX_SUPPORT}")
    wa = weights_of(a) if a_weights is None else np.asarray(a_weights, float)
    wb = weights_of(b) if b_weights is None else np.asarray(b_weights, float)
    if np.any(wa < 0) or np.any(wb < 0) or abs(wa.sum() - wb.sum()) > 1e-9 or wa.sum() <= 0:
        raise ValueError("weights must be nonnegative with equal positive totals")
    wb = wb * (wa.sum() / wb.sum())
    C = cost_matrix(xa, xb, p)
    P = transport_simplex(wa, wb, C)
    cost = float(np.sum(P * C))
    return max(cost, 0.0) ** (1.0 / p), TransportPlan(P, cost)

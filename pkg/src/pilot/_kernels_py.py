"""Pure-Python twin of the compiled graph kernels.

Same contract as ``pilot._kernels``: CSR adjacency (indptr/indices int64
arrays), float64 results. Used when the extension is unavailable or when
PILOT_PURE_PYTHON is set.
"""

from __future__ import annotations

from collections import deque

import numpy as np

BACKEND = "python"


def closeness(n: int, indptr, indices) -> np.ndarray:
    """Closeness over BFS distances from each node along the given adjacency.

    Wasserman-Faust component scaling: (k/total) * (k/(n-1)) where k nodes are
    reachable from v at total summed distance. Pass the reversed adjacency to
    score incoming distances.
    """
    out = np.zeros(n, dtype=np.float64)
    if n <= 1:
        return out
    dist = [-1] * n
    for v in range(n):
        for i in range(n):
            dist[i] = -1
        dist[v] = 0
        queue = deque([v])
        total = 0
        count = 0
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = du
                    total += du
                    count += 1
                    queue.append(w)
        if total > 0:
            out[v] = (count / total) * (count / (n - 1))
    return out


def betweenness(n: int, indptr, indices, normalized: bool = True) -> np.ndarray:
    """Brandes betweenness on an unweighted directed graph, endpoints excluded."""
    bc = np.zeros(n, dtype=np.float64)
    sigma = [0.0] * n
    dist = [-1] * n
    delta = [0.0] * n
    preds: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        for i in range(n):
            sigma[i] = 0.0
            dist[i] = -1
            delta[i] = 0.0
            preds[i].clear()
        sigma[s] = 1.0
        dist[s] = 0
        order: list[int] = []
        queue = deque([s])
        while queue:
            u = queue.popleft()
            order.append(u)
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = du
                    queue.append(w)
                if dist[w] == du:
                    sigma[w] += sigma[u]
                    preds[w].append(u)
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for u in preds[w]:
                delta[u] += sigma[u] * coeff
            if w != s:
                bc[w] += delta[w]
    if normalized and n > 2:
        bc /= (n - 1) * (n - 2)
    return bc


def pagerank(n: int, indptr, indices, alpha: float, tol: float, max_iter: int) -> np.ndarray:
    """Damped power iteration; dangling mass redistributed uniformly.

    Stops when the L1 change drops below n*tol.
    """
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    outdeg = np.asarray(indptr[1:]) - np.asarray(indptr[:-1])
    x = np.full(n, 1.0 / n, dtype=np.float64)
    base = (1.0 - alpha) / n
    for _ in range(max_iter):
        new = np.full(n, base, dtype=np.float64)
        dangling = 0.0
        for u in range(n):
            if outdeg[u] == 0:
                dangling += x[u]
                continue
            share = alpha * x[u] / outdeg[u]
            for j in range(indptr[u], indptr[u + 1]):
                new[indices[j]] += share
        new += alpha * dangling / n
        err = float(np.abs(new - x).sum())
        x = new
        if err < n * tol:
            break
    return x


def distance_stats(n: int, indptr, indices, members) -> tuple[int, float]:
    """(diameter, average shortest path length) over a node subset.

    BFS from each member, counting only member-to-member distances; the
    adjacency is expected to be symmetric and the subset connected. Average
    is over ordered pairs; (0, 0.0) for subsets smaller than two.
    """
    m = len(members)
    if m < 2:
        return 0, 0.0
    member_set = set(int(v) for v in members)
    diameter = 0
    total = 0
    dist = [-1] * n
    for s in members:
        s = int(s)
        for i in range(n):
            dist[i] = -1
        dist[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = du
                    queue.append(w)
        for v in member_set:
            d = dist[v]
            if d > 0:
                total += d
                if d > diameter:
                    diameter = d
    return diameter, total / (m * (m - 1))

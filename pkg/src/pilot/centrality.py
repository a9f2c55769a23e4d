"""Per-function centrality scores and whole-graph structural features.

Heavy kernels (closeness, betweenness, pagerank, distance stats) run in the
compiled ``pilot._kernels`` extension when it is importable, and otherwise in
the pure-Python twin ``pilot._kernels_py``. Set PILOT_PURE_PYTHON=1 to force
the fallback.
"""

from __future__ import annotations

import enum
import math
import os
import random
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .callgraph import CallGraph, CallGraphView

if os.environ.get("PILOT_PURE_PYTHON"):
    from . import _kernels_py as _kernels
else:
    try:
        from . import _kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as _kernels


def kernel_backend() -> str:
    """Name of the kernel backend in use: "cython" or "python"."""
    return _kernels.BACKEND


class Strategy(str, enum.Enum):
    CLOSE = "CLOSE"
    BET = "BET"
    DEG = "DEG"
    PAGE = "PAGE"
    RANDOM = "RANDOM"


@dataclass(frozen=True)
class CentralityConfig:
    """Tunables left open by the scoring definitions.

    closeness_direction "in" scores a function by how near its callers sit
    (distances measured along reversed edges); "out" uses callee distances.
    top_count switches top-concentration from the top 10% of nodes to a
    fixed count of nodes.
    """

    closeness_direction: str = "in"
    pagerank_damping: float = 0.85
    pagerank_tol: float = 1e-12
    pagerank_max_iter: int = 200
    top_count: int | None = None

    def __post_init__(self):
        if self.closeness_direction not in ("in", "out"):
            raise ValueError(f"closeness_direction must be 'in' or 'out', got {self.closeness_direction!r}")


DEFAULT_CONFIG = CentralityConfig()


@dataclass(frozen=True)
class CentralityVector:
    strategy: Strategy
    scores: dict[str, float]
    rng_seed: int | None = None


@dataclass(frozen=True)
class StructuralFeatures:
    node_count: int
    edge_count: int
    density: float
    diameter: int
    avg_shortest_path: float
    largest_scc_size: int
    largest_scc_ratio: float
    pagerank_gini: float
    pagerank_skew: float
    pagerank_top10_concentration: float
    closeness_centrality_skew: float
    avg_clustering: float

    def as_dict(self) -> dict[str, float]:
        return {
            "node_count": float(self.node_count),
            "edge_count": float(self.edge_count),
            "density": self.density,
            "diameter": float(self.diameter),
            "avg_shortest_path": self.avg_shortest_path,
            "largest_scc_size": float(self.largest_scc_size),
            "largest_scc_ratio": self.largest_scc_ratio,
            "pagerank_gini": self.pagerank_gini,
            "pagerank_skew": self.pagerank_skew,
            "pagerank_top10_concentration": self.pagerank_top10_concentration,
            "closeness_centrality_skew": self.closeness_centrality_skew,
            "avg_clustering": self.avg_clustering,
        }


Graph = CallGraph | CallGraphView


def _build_csr(names: list[str], edges, reverse: bool = False):
    """CSR adjacency over the given node order; rows hold sorted columns."""
    index = {name: i for i, name in enumerate(names)}
    n = len(names)
    pairs = []
    for caller, callee in edges:
        a, b = index[caller], index[callee]
        pairs.append((b, a) if reverse else (a, b))
    pairs.sort()
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(len(pairs), dtype=np.int64)
    for k, (a, b) in enumerate(pairs):
        indptr[a + 1] += 1
        indices[k] = b
    np.cumsum(indptr, out=indptr)
    return indptr, indices


def _build_undirected_csr(names: list[str], edges):
    index = {name: i for i, name in enumerate(names)}
    n = len(names)
    pair_set = set()
    for caller, callee in edges:
        a, b = index[caller], index[callee]
        if a == b:
            continue
        pair_set.add((a, b))
        pair_set.add((b, a))
    pairs = sorted(pair_set)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(len(pairs), dtype=np.int64)
    for k, (a, b) in enumerate(pairs):
        indptr[a + 1] += 1
        indices[k] = b
    np.cumsum(indptr, out=indptr)
    return indptr, indices


def centrality_scores(
    g: Graph,
    strategy: Strategy,
    rng_seed: int | None = None,
    config: CentralityConfig = DEFAULT_CONFIG,
) -> CentralityVector:
    """Score every function under one selection strategy.

    rng_seed is required for RANDOM and rejected otherwise; equal seeds give
    equal rankings.
    """
    names = sorted(g.nodes)
    n = len(names)
    if n == 0:
        raise ValueError("cannot score an empty graph")
    if strategy is Strategy.RANDOM:
        if rng_seed is None:
            raise ValueError("RANDOM strategy requires rng_seed")
    elif rng_seed is not None:
        raise ValueError("rng_seed only applies to the RANDOM strategy")

    if strategy is Strategy.RANDOM:
        shuffled = list(names)
        random.Random(rng_seed).shuffle(shuffled)
        scores = {name: (n - idx) / n for idx, name in enumerate(shuffled)}
        return CentralityVector(strategy, {name: scores[name] for name in names}, rng_seed)

    if strategy is Strategy.DEG:
        deg = {name: 0 for name in names}
        for caller, callee in g.edges:
            deg[caller] += 1
            deg[callee] += 1
        denom = n - 1 if n > 1 else 1
        return CentralityVector(strategy, {name: deg[name] / denom for name in names})

    if strategy is Strategy.CLOSE:
        indptr, indices = _build_csr(names, g.edges, reverse=config.closeness_direction == "in")
        values = _kernels.closeness(n, indptr, indices)
    elif strategy is Strategy.BET:
        indptr, indices = _build_csr(names, g.edges)
        values = _kernels.betweenness(n, indptr, indices, True)
    elif strategy is Strategy.PAGE:
        indptr, indices = _build_csr(names, g.edges)
        values = _kernels.pagerank(
            n, indptr, indices, config.pagerank_damping, config.pagerank_tol, config.pagerank_max_iter
        )
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return CentralityVector(strategy, {name: float(values[i]) for i, name in enumerate(names)})


def _gini(x: np.ndarray) -> float:
    # Sorted-rank form of mean absolute difference / (2 mean), computed on
    # deviations from the minimum so constant vectors come out exactly 0.
    n = x.size
    total = float(x.sum())
    d = x - x[0]
    coeff = 2.0 * np.arange(1, n + 1, dtype=np.float64) - n - 1.0
    return max(float(np.dot(coeff, d)), 0.0) / (n * total)


def _skewness(values: np.ndarray) -> float:
    if values.size < 3:
        warnings.warn("skewness undefined for fewer than 3 values; reporting 0.0")
        return 0.0
    if float(np.ptp(values)) == 0.0:
        warnings.warn("skewness undefined for a constant sample; reporting 0.0")
        return 0.0
    return float(scipy.stats.skew(values, bias=False))


def distribution_stats(
    values,
    top_fraction: float = 0.10,
    top_count: int | None = None,
) -> dict[str, float]:
    """Gini, adjusted Fisher-Pearson skewness, and top-share of a score list.

    The top share covers the ceil(top_fraction * n) largest values, or exactly
    top_count values when given.
    """
    x = np.asarray(sorted(values), dtype=np.float64)
    if x.size == 0:
        raise ValueError("distribution_stats requires at least one value")
    if x[0] < 0:
        raise ValueError("distribution_stats requires nonnegative values")
    total = float(x.sum())
    if total == 0.0:
        raise ValueError("gini is undefined for an all-zero list")
    if top_count is None:
        m = math.ceil(top_fraction * x.size)
    else:
        m = min(top_count, x.size)
    return {
        "gini": _gini(x),
        "skew": _skewness(x),
        "top10_concentration": float(x[x.size - m :].sum()) / total,
    }


def _scc_sizes(n: int, succ: list[list[int]]) -> list[int]:
    """Strongly-connected component sizes, Tarjan with an explicit stack."""
    index_of = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    sizes: list[int] = []
    counter = 0
    for root in range(n):
        if index_of[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index_of[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            descended = False
            out = succ[v]
            for k in range(pi, len(out)):
                w = out[k]
                if index_of[w] == -1:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    descended = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index_of[w])
            if descended:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index_of[v]:
                size = 0
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    size += 1
                    if w == v:
                        break
                sizes.append(size)
    return sizes


def _largest_wcc(n: int, undirected: list[list[int]]) -> list[int]:
    seen = [False] * n
    best: list[int] = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        component = [start]
        frontier = [start]
        while frontier:
            v = frontier.pop()
            for w in undirected[v]:
                if not seen[w]:
                    seen[w] = True
                    component.append(w)
                    frontier.append(w)
        if len(component) > len(best):
            best = component
    return best


def _avg_clustering(neighbors: list[set[int]]) -> float:
    n = len(neighbors)
    if n == 0:
        return 0.0
    total = 0.0
    for v in range(n):
        nbrs = sorted(neighbors[v])
        k = len(nbrs)
        if k < 2:
            continue
        links = 0
        for i in range(k):
            for j in range(i + 1, k):
                if nbrs[j] in neighbors[nbrs[i]]:
                    links += 1
        total += 2.0 * links / (k * (k - 1))
    return total / n


def structural_features(g: Graph, config: CentralityConfig = DEFAULT_CONFIG) -> StructuralFeatures:
    """Whole-graph features consumed by the strategy rule engine."""
    names = sorted(g.nodes)
    n = len(names)
    if n == 0:
        raise ValueError("cannot compute features of an empty graph")
    index = {name: i for i, name in enumerate(names)}
    edge_count = len(g.edges)
    density = edge_count / (n * (n - 1)) if n > 1 else 0.0

    succ: list[list[int]] = [[] for _ in range(n)]
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for caller, callee in g.edges:
        a, b = index[caller], index[callee]
        succ[a].append(b)
        if a != b:
            neighbors[a].add(b)
            neighbors[b].add(a)
    for out in succ:
        out.sort()

    undirected = [sorted(nbrs) for nbrs in neighbors]
    members = _largest_wcc(n, undirected)
    u_indptr, u_indices = _build_undirected_csr(names, g.edges)
    diameter, avg_sp = _kernels.distance_stats(
        n, u_indptr, u_indices, np.asarray(sorted(members), dtype=np.int64)
    )

    scc_sizes = _scc_sizes(n, succ)
    largest_scc = max(scc_sizes)

    page = centrality_scores(g, Strategy.PAGE, config=config)
    page_stats = distribution_stats(list(page.scores.values()), top_count=config.top_count)
    close = centrality_scores(g, Strategy.CLOSE, config=config)
    close_values = np.asarray(sorted(close.scores.values()), dtype=np.float64)

    return StructuralFeatures(
        node_count=n,
        edge_count=edge_count,
        density=density,
        diameter=int(diameter),
        avg_shortest_path=float(avg_sp),
        largest_scc_size=largest_scc,
        largest_scc_ratio=largest_scc / n,
        pagerank_gini=page_stats["gini"],
        pagerank_skew=page_stats["skew"],
        pagerank_top10_concentration=page_stats["top10_concentration"],
        closeness_centrality_skew=_skewness(close_values),
        avg_clustering=_avg_clustering(neighbors),
    )

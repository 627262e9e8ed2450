"""Undirected graphs, shortest-path distances, subdivision and local geometry.

Graphs are stored in compressed sparse row form: ``indptr``/``indices`` with
neighbour lists sorted ascending, so "smallest vertex identifier first" is the
natural iteration order everywhere downstream.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "DistanceField",
    "GeometryClass",
    "DisconnectedGraphError",
    "build_graph",
    "shortest_path_distances",
    "subdivide",
    "fill_distance",
    "geometry_classify",
    "read_edge_list",
    "write_edge_list",
]


class DisconnectedGraphError(ValueError):
    """Raised when an operation needs vertices that cannot reach each other."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph in CSR form.

    ``costs`` is ``None`` for unit-cost graphs, otherwise a positive weight per
    CSR entry (symmetric). ``labels`` keeps the original vertex names when the
    graph was built from non-dense identifiers.
    """

    indptr: np.ndarray
    indices: np.ndarray
    costs: np.ndarray | None = None
    labels: tuple | None = None

    @property
    def vertex_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def is_unit(self) -> bool:
        return self.costs is None

    def neighbours(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def neighbour_costs(self, v: int) -> np.ndarray:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        if self.costs is None:
            return np.ones(hi - lo)
        return self.costs[lo:hi]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(y) for y in self.neighbours(v)) for v in range(self.vertex_count))

    def edge_cost(self, u: int, v: int) -> float:
        nbrs = self.neighbours(u)
        pos = int(np.searchsorted(nbrs, v))
        if pos >= len(nbrs) or nbrs[pos] != v:
            raise KeyError(f"no edge {{{u}, {v}}}")
        if self.costs is None:
            return 1.0
        return float(self.costs[self.indptr[u] + pos])

    def edges(self) -> list[tuple[int, int]]:
        """Edges ``(u, v)`` with ``u < v`` in lexicographic order."""
        out = []
        for u in range(self.vertex_count):
            for v in self.neighbours(u):
                if u < v:
                    out.append((u, int(v)))
        return out

    def index_of(self, label) -> int:
        """Dense vertex id for an original label (identity when unlabelled)."""
        if self.labels is None:
            return int(label)
        return self.labels.index(label)

    def label_of(self, v: int):
        return v if self.labels is None else self.labels[v]


def build_graph(
    vertex_count: int,
    edges: Iterable[Sequence[int]],
    costs: Sequence[float] | None = None,
    labels: Sequence | None = None,
) -> Graph:
    """Build a :class:`Graph` from an edge list.

    Raises ``ValueError`` on out-of-range endpoints, self-loops, duplicate
    edges or non-positive costs.
    """
    if vertex_count < 0:
        raise ValueError("vertex_count must be non-negative")
    edges = [tuple(int(x) for x in e) for e in edges]
    if costs is not None:
        costs = [float(c) for c in costs]
        if len(costs) != len(edges):
            raise ValueError("cost list length does not match edge list")
        for c in costs:
            if not c > 0 or not math.isfinite(c):
                raise ValueError(f"edge costs must be positive and finite, got {c}")
    if labels is not None and len(labels) != vertex_count:
        raise ValueError("labels must have one entry per vertex")

    seen: set[tuple[int, int]] = set()
    adj: list[list[tuple[int, float]]] = [[] for _ in range(vertex_count)]
    for i, e in enumerate(edges):
        if len(e) != 2:
            raise ValueError(f"edge {e} must have two endpoints")
        u, v = e
        if not (0 <= u < vertex_count and 0 <= v < vertex_count):
            raise ValueError(f"edge {e} has an endpoint out of range [0, {vertex_count})")
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise ValueError(f"duplicate edge {key}")
        seen.add(key)
        c = 1.0 if costs is None else costs[i]
        adj[u].append((v, c))
        adj[v].append((u, c))

    indptr = np.zeros(vertex_count + 1, dtype=np.int64)
    for v in range(vertex_count):
        adj[v].sort()
        indptr[v + 1] = indptr[v] + len(adj[v])
    indices = np.fromiter((y for row in adj for y, _ in row), dtype=np.int64, count=int(indptr[-1]))
    cost_arr = None
    if costs is not None:
        cost_arr = _frozen(np.fromiter((c for row in adj for _, c in row), dtype=float, count=int(indptr[-1])))
    return Graph(
        _frozen(indptr),
        _frozen(indices),
        cost_arr,
        tuple(labels) if labels is not None else None,
    )


def _from_csr(indptr: np.ndarray, indices: np.ndarray) -> Graph:
    return Graph(_frozen(np.asarray(indptr, dtype=np.int64)), _frozen(np.asarray(indices, dtype=np.int64)))


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Shortest-path cost-to-go towards ``goal``; ``inf`` marks unreachable."""

    goal: int
    dist: np.ndarray
    reachable: np.ndarray

    @property
    def all_reachable(self) -> bool:
        return bool(self.reachable.all())

    def require_reachable(self, vertices: Iterable[int] | None = None) -> None:
        if vertices is None:
            ok = self.all_reachable
        else:
            ok = all(self.reachable[v] for v in vertices)
        if not ok:
            raise DisconnectedGraphError(f"some vertices cannot reach goal {self.goal}")

    def hops(self, v: int) -> int:
        """Integer distance at ``v`` (unit-cost graphs only)."""
        if not self.reachable[v]:
            raise DisconnectedGraphError(f"vertex {v} cannot reach goal {self.goal}")
        return int(self.dist[v])


def _bfs(graph: Graph, sources: Iterable[int]) -> np.ndarray:
    dist = np.full(graph.vertex_count, -1, dtype=np.int64)
    queue = deque()
    for s in sources:
        if dist[s] < 0:
            dist[s] = 0
            queue.append(s)
    indptr, indices = graph.indptr, graph.indices
    while queue:
        x = queue.popleft()
        dx = dist[x] + 1
        for y in indices[indptr[x] : indptr[x + 1]]:
            if dist[y] < 0:
                dist[y] = dx
                queue.append(y)
    return dist


def shortest_path_distances(graph: Graph, goal: int) -> DistanceField:
    """Exact distances to ``goal``: BFS on unit graphs, Dijkstra otherwise."""
    n = graph.vertex_count
    if not 0 <= goal < n:
        raise ValueError(f"goal {goal} out of range [0, {n})")
    if graph.is_unit:
        hops = _bfs(graph, [goal])
        reachable = hops >= 0
        dist = np.where(reachable, hops, np.inf).astype(float)
    else:
        dist = np.full(n, np.inf)
        dist[goal] = 0.0
        heap = [(0.0, goal)]
        while heap:
            d, x = heapq.heappop(heap)
            if d > dist[x]:
                continue
            lo, hi = graph.indptr[x], graph.indptr[x + 1]
            for y, c in zip(graph.indices[lo:hi], graph.costs[lo:hi]):
                nd = d + c
                if nd < dist[y]:
                    dist[y] = nd
                    heapq.heappush(heap, (nd, int(y)))
        reachable = np.isfinite(dist)
    return DistanceField(goal, _frozen(dist), _frozen(reachable))


def subdivide(graph: Graph, k: int) -> tuple[Graph, np.ndarray]:
    """Replace every edge by a path of ``k`` unit edges.

    Original vertices keep their identifiers; the inserted vertices of edge
    ``(u, v)`` (``u < v``, lexicographic edge order) are appended in order from
    ``u`` towards ``v``. Returns the new graph and the original-vertex map.
    """
    if k < 1:
        raise ValueError("subdivision factor k must be >= 1")
    if not graph.is_unit:
        raise ValueError("subdivide requires a unit-cost graph")
    n = graph.vertex_count
    new_edges: list[tuple[int, int]] = []
    nxt = n
    for u, v in graph.edges():
        chain = [u] + list(range(nxt, nxt + k - 1)) + [v]
        nxt += k - 1
        new_edges.extend(zip(chain[:-1], chain[1:]))
    return build_graph(nxt, new_edges), np.arange(n, dtype=np.int64)


def fill_distance(graph: Graph, targets: Iterable[int], labelled: Iterable[int]) -> float:
    """Largest hop distance from a target vertex to its nearest labelled vertex.

    Returns ``math.inf`` when some target cannot reach the labelled set.
    """
    labelled = list(labelled)
    if not labelled:
        raise ValueError("labelled set must be non-empty")
    hops = _bfs(graph, labelled)
    worst = 0
    for x in targets:
        if hops[x] < 0:
            return math.inf
        worst = max(worst, int(hops[x]))
    return worst


@dataclass(frozen=True)
class GeometryClass:
    """Partition of ``N(x)`` by ``d_g(y) - d_g(x)`` in ``{+1, 0, -1}``."""

    n_plus: int
    n_zero: int
    n_minus: int

    @property
    def degree(self) -> int:
        return self.n_plus + self.n_zero + self.n_minus

    @property
    def amle_compatible(self) -> bool:
        return self.n_plus >= 1

    @property
    def harmonic_compatible(self) -> bool:
        return self.n_plus == self.n_minus

    @property
    def extendable(self) -> bool:
        return self.n_plus >= 1

    @property
    def label(self) -> str:
        """One of ``both``, ``amle_only``, ``neither`` (harmonic-only is impossible)."""
        if self.amle_compatible:
            return "both" if self.harmonic_compatible else "amle_only"
        return "harmonic_only" if self.harmonic_compatible else "neither"


def geometry_classify(graph: Graph, dist: DistanceField, x: int) -> GeometryClass:
    if not graph.is_unit:
        raise ValueError("geometry classification is defined on unit-cost graphs only")
    if x == dist.goal:
        raise ValueError("the goal vertex has no geometry class")
    dx = dist.hops(x)
    counts = {1: 0, 0: 0, -1: 0}
    for y in graph.neighbours(x):
        diff = dist.hops(int(y)) - dx
        if diff not in counts:
            raise AssertionError(f"edge ({x}, {y}) violates the unit triangle inequality")
        counts[diff] += 1
    return GeometryClass(counts[1], counts[0], counts[-1])


def read_edge_list(path: str | Path) -> Graph:
    """Read ``n m`` followed by ``m`` lines ``u v [cost]``."""
    rows = [ln.split() for ln in Path(path).read_text().splitlines()]
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty edge-list file")
    n, m = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != m:
        raise ValueError(f"{path}: header declares {m} edges, found {len(body)}")
    edges = [(int(r[0]), int(r[1])) for r in body]
    with_cost = [len(r) >= 3 for r in body]
    if any(with_cost) and not all(with_cost):
        raise ValueError(f"{path}: either every edge carries a cost or none does")
    costs = [float(r[2]) for r in body] if body and all(with_cost) else None
    return build_graph(n, edges, costs)


def write_edge_list(graph: Graph, path: str | Path) -> None:
    lines = [f"{graph.vertex_count} {graph.edge_count}"]
    for u, v in graph.edges():
        if graph.is_unit:
            lines.append(f"{u} {v}")
        else:
            lines.append(f"{u} {v} {graph.edge_cost(u, v)!r}")
    Path(path).write_text("\n".join(lines) + "\n")

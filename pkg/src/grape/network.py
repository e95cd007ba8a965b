"""Communication topologies between agents and basic graph metrics."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class CommGraph:
    """Directed adjacency over agents ``0..n_agents-1``; ``out[i]`` are the agents i sends to.

    Generated graphs are symmetric. Self-loops are not allowed.
    """

    n_agents: int
    out: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.out) != self.n_agents:
            raise ValueError("adjacency length must equal n_agents")
        clean = []
        for i, nbrs in enumerate(self.out):
            s = sorted(set(int(k) for k in nbrs))
            if i in s:
                raise ValueError(f"self-loop at agent {i}")
            if s and not (0 <= s[0] and s[-1] < self.n_agents):
                raise ValueError(f"agent {i} has out-of-range neighbour")
            clean.append(tuple(s))
        object.__setattr__(self, "out", tuple(clean))

    @classmethod
    def from_edges(cls, n_agents: int, edges: Iterable[tuple[int, int]],
                   directed: bool = False) -> "CommGraph":
        out: list[set] = [set() for _ in range(n_agents)]
        for i, j in edges:
            if not (0 <= i < n_agents and 0 <= j < n_agents):
                raise ValueError(f"edge ({i}, {j}) out of range")
            out[i].add(j)
            if not directed:
                out[j].add(i)
        return cls(n_agents, tuple(tuple(s) for s in out))

    @cached_property
    def symmetric(self) -> bool:
        arcs = {(i, j) for i, nb in enumerate(self.out) for j in nb}
        return all((j, i) in arcs for i, j in arcs)

    @cached_property
    def is_complete(self) -> bool:
        return all(len(nb) == self.n_agents - 1 for nb in self.out)

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges ``i < j`` for symmetric graphs, else all directed arcs."""
        if self.symmetric:
            return [(i, j) for i in range(self.n_agents) for j in self.out[i] if i < j]
        return [(i, j) for i in range(self.n_agents) for j in self.out[i]]

    @cached_property
    def arcs(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.fromiter((i for i, nb in enumerate(self.out) for _ in nb), dtype=np.int64)
        dst = np.fromiter((j for nb in self.out for j in nb), dtype=np.int64)
        return src, dst


def neighbors(graph: CommGraph, agent: int) -> set[int]:
    return set(graph.out[agent])


def fully_connected(n_agents: int) -> CommGraph:
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    return CommGraph(n_agents, tuple(tuple(k for k in range(n_agents) if k != i)
                                     for i in range(n_agents)))


def mst_graph(positions: Sequence[tuple[float, float]]) -> CommGraph:
    """Euclidean minimum spanning tree, bidirectional.

    Kruskal over all pairs sorted by ``(distance, i, j)`` so equal-length edges are
    taken in index order.
    """
    n = len(positions)
    if n < 1:
        raise ValueError("need at least one position")
    pts = np.asarray(positions, dtype=float).reshape(n, 2)
    if not np.all(np.isfinite(pts)):
        raise ValueError("positions must be finite")
    iu, ju = np.triu_indices(n, k=1)
    w = np.array([math.hypot(*(pts[i] - pts[j])) for i, j in zip(iu, ju)])
    order = np.lexsort((ju, iu, w))
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for e in order:
        a, b = find(int(iu[e])), find(int(ju[e]))
        if a != b:
            parent[a] = b
            edges.append((int(iu[e]), int(ju[e])))
            if len(edges) == n - 1:
                break
    return CommGraph.from_edges(n, edges)


def range_graph(positions: Sequence[tuple[float, float]], radius: float) -> CommGraph:
    """Edge between every pair within ``radius`` metres. May be disconnected."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    pts = np.asarray(positions, dtype=float).reshape(len(positions), 2)
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    adj = d <= radius
    np.fill_diagonal(adj, False)
    return CommGraph(len(pts), tuple(tuple(np.nonzero(row)[0].tolist()) for row in adj))


def _bfs(graph: CommGraph, source: int) -> list[int]:
    dist = [-1] * graph.n_agents
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        for v in graph.out[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def is_connected(graph: CommGraph) -> bool:
    """Strong connectivity (plain connectivity for symmetric graphs)."""
    if graph.n_agents <= 1 or graph.is_complete:
        return True
    if min(_bfs(graph, 0)) < 0:
        return False
    if graph.symmetric:
        return True
    rev = CommGraph.from_edges(graph.n_agents, [(j, i) for i, j in graph.edges()], directed=True)
    return min(_bfs(rev, 0)) >= 0


def diameter(graph: CommGraph) -> int:
    """Longest shortest-path hop count; 0 for a single agent."""
    if graph.n_agents > 1 and graph.is_complete:
        return 1
    best = 0
    for s in range(graph.n_agents):
        dist = _bfs(graph, s)
        if min(dist) < 0:
            raise ValueError("diameter is undefined for a disconnected graph")
        best = max(best, max(dist))
    return best


def write_edge_list(graph: CommGraph, path) -> None:
    lines = [f"# nodes {graph.n_agents}"]
    if not graph.symmetric:
        lines.append("# directed")
    lines += [f"{i} {j}" for i, j in graph.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> CommGraph:
    n = None
    directed = False
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["nodes"] and len(parts) == 2 and parts[1].isdigit():
                n = int(parts[1])
            elif parts == ["directed"]:
                directed = True
            continue
        parts = line.split()
        if len(parts) != 2 or not all(p.lstrip("-").isdigit() for p in parts):
            raise ValueError(f"{path}:{lineno}: expected 'i j', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return CommGraph.from_edges(n, edges, directed=directed)

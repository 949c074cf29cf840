"""Finite metric trees with unit-length oriented edges.

Vertices are 1-based at the public surface (constructors, presets, reports)
and 0-based inside arrays. Every edge is parameterized on [0, 1] running
from its tail ``e(0)`` to its head ``e(1)``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised for edge lists that do not describe a tree."""


@dataclass(frozen=True)
class MetricTree:
    n: int
    edges: tuple[tuple[int, int], ...]  # 0-based (tail, head)
    name: str = "tree"

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_label(self, j: int) -> str:
        u, v = self.edges[j]
        return f"{u + 1}-{v + 1}"

    def neighbors(self) -> list[list[int]]:
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nb[u].append(v)
            nb[v].append(u)
        return nb

    def incident_edges(self) -> list[list[int]]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for j, (u, v) in enumerate(self.edges):
            inc[u].append(j)
            inc[v].append(j)
        return inc

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def reversed_edges(self, which: Iterable[int]) -> "MetricTree":
        flip = set(which)
        edges = tuple((v, u) if j in flip else (u, v) for j, (u, v) in enumerate(self.edges))
        return MetricTree(self.n, edges, self.name)

    def edge_index(self, u: int, v: int) -> int:
        """Index of the edge joining 1-based vertices ``u`` and ``v``."""
        key = {u - 1, v - 1}
        for j, e in enumerate(self.edges):
            if set(e) == key:
                return j
        raise GraphError(f"no edge between vertices {u} and {v}")


@dataclass(frozen=True)
class NoiseConfig:
    """Split of the edge set into noisy edges Y and noise-free edges Z."""

    m: int
    noise_free: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        bad = [j for j in self.noise_free if not 0 <= j < self.m]
        if bad:
            raise GraphError(f"noise-free edge ids out of range: {sorted(j + 1 for j in bad)}")

    @classmethod
    def from_noise_free(cls, tree: MetricTree, edges: Iterable[int]) -> "NoiseConfig":
        return cls(tree.m, frozenset(edges))

    @classmethod
    def all_noisy(cls, tree: MetricTree) -> "NoiseConfig":
        return cls(tree.m, frozenset())

    @classmethod
    def no_noise(cls, tree: MetricTree) -> "NoiseConfig":
        return cls(tree.m, frozenset(range(tree.m)))

    @property
    def noisy(self) -> frozenset[int]:
        return frozenset(range(self.m)) - self.noise_free

    @property
    def mask(self) -> np.ndarray:
        """The diagonal of Q: 1.0 on noisy edges, 0.0 on noise-free ones."""
        q = np.ones(self.m)
        q[list(self.noise_free)] = 0.0
        return q

    def label(self) -> str:
        return " ".join(str(j + 1) for j in sorted(self.noisy)) or "none"


@dataclass(frozen=True)
class GraphMatrices:
    adjacency: np.ndarray
    incidence: np.ndarray
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    degree: np.ndarray
    normalized_adjacency: tuple[tuple[Fraction, ...], ...]

    @property
    def signed_incidence(self) -> np.ndarray:
        return self.phi_plus - self.phi_minus

    def normalized_adjacency_float(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.normalized_adjacency])


def build_tree(n: int, edge_list: Sequence[tuple[int, int]], name: str = "tree") -> MetricTree:
    """Validate a 1-based oriented edge list and return the tree."""
    if n < 2:
        raise GraphError("a tree needs at least two vertices")
    if not edge_list:
        raise GraphError("edge list is empty")
    edges = []
    seen = set()
    for u, v in edge_list:
        if not (1 <= u <= n and 1 <= v <= n):
            raise GraphError(f"edge ({u},{v}) references a vertex outside 1..{n}")
        if u == v:
            raise GraphError(f"self-loop at vertex {u}")
        key = frozenset((u, v))
        if key in seen:
            raise GraphError(f"duplicate edge ({u},{v})")
        seen.add(key)
        edges.append((u - 1, v - 1))

    # union-find detects cycles before the count check so the message is specific
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            raise GraphError(f"edge ({u + 1},{v + 1}) closes a cycle")
        parent[ru] = rv
    if len(edges) != n - 1:
        raise GraphError(f"graph is disconnected: n={n} but m={len(edges)}")
    return MetricTree(n, tuple(edges), name)


def derive_matrices(tree: MetricTree) -> GraphMatrices:
    n, m = tree.n, tree.m
    A = np.zeros((n, n), dtype=np.int64)
    M = np.zeros((n, m), dtype=np.int64)
    Pp = np.zeros((n, m), dtype=np.int64)
    Pm = np.zeros((n, m), dtype=np.int64)
    for j, (u, v) in enumerate(tree.edges):
        A[u, v] = A[v, u] = 1
        M[u, j] = M[v, j] = 1
        Pp[u, j] = 1
        Pm[v, j] = 1
    deg = A.sum(axis=1)
    At = tuple(tuple(Fraction(int(A[i, k]), int(deg[i])) for k in range(n)) for i in range(n))
    return GraphMatrices(A, M, Pp, Pm, np.diag(deg), At)


def bipartition(tree: MetricTree) -> tuple[frozenset[int], frozenset[int]]:
    """BFS two-colouring from vertex 1; returns 1-based classes (class of vertex 1 first)."""
    color = [-1] * tree.n
    color[0] = 0
    nb = tree.neighbors()
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w in nb[u]:
            if color[w] < 0:
                color[w] = 1 - color[u]
                queue.append(w)
    a = frozenset(i + 1 for i in range(tree.n) if color[i] == 0)
    b = frozenset(i + 1 for i in range(tree.n) if color[i] == 1)
    return a, b


def _tree_matching(tree: MetricTree) -> int:
    # Greedy leaf matching: process vertices in reverse BFS order and match a
    # vertex to its parent whenever both are still free. Optimal on trees.
    nb = tree.neighbors()
    order, parent = [0], [-1] * tree.n
    seen = [False] * tree.n
    seen[0] = True
    for u in order:
        for w in nb[u]:
            if not seen[w]:
                seen[w] = True
                parent[w] = u
                order.append(w)
    matched = [False] * tree.n
    size = 0
    for u in reversed(order):
        p = parent[u]
        if p >= 0 and not matched[u] and not matched[p]:
            matched[u] = matched[p] = True
            size += 1
    return size


def hopcroft_karp(left: Sequence[int], adj: dict[int, list[int]]) -> int:
    """Maximum matching size of a bipartite graph given left vertices and adjacency."""
    INF = float("inf")
    match_l: dict[int, int | None] = {u: None for u in left}
    match_r: dict[int, int | None] = {}
    for u in left:
        for w in adj.get(u, []):
            match_r[w] = None
    dist: dict[int | None, float] = {}

    def bfs() -> bool:
        queue = deque()
        for u in left:
            if match_l[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = INF
        dist[None] = INF
        while queue:
            u = queue.popleft()
            if dist[u] < dist[None]:
                for w in adj.get(u, []):
                    nxt = match_r[w]
                    if dist.get(nxt, INF) == INF:
                        dist[nxt] = dist[u] + 1
                        if nxt is not None:
                            queue.append(nxt)
        return dist[None] != INF

    def dfs(u: int) -> bool:
        for w in adj.get(u, []):
            nxt = match_r[w]
            if nxt is None:
                if dist[None] == dist[u] + 1:
                    match_l[u], match_r[w] = w, u
                    return True
            elif dist.get(nxt, INF) == dist[u] + 1 and dfs(nxt):
                match_l[u], match_r[w] = w, u
                return True
        dist[u] = INF
        return False

    size = 0
    while bfs():
        for u in left:
            if match_l[u] is None and dfs(u):
                size += 1
    return size


def matching_number(tree: MetricTree, method: str = "tree") -> tuple[int, int]:
    """Return ``(nu, alpha)``: matching number and independence number ``n - nu``."""
    if method == "tree":
        nu = _tree_matching(tree)
    elif method == "hopcroft-karp":
        a, _ = bipartition(tree)
        left = sorted(v - 1 for v in a)
        nb = tree.neighbors()
        nu = hopcroft_karp(left, {u: nb[u] for u in left})
    else:
        raise ValueError(f"unknown matching method {method!r}")
    return nu, tree.n - nu


def brute_force_matching(tree: MetricTree) -> int:
    """Exhaustive maximum matching; only for small test trees."""
    for size in range(tree.m, 0, -1):
        for subset in combinations(tree.edges, size):
            ends = [x for e in subset for x in e]
            if len(set(ends)) == len(ends):
                return size
    return 0


# ---------------------------------------------------------------- presets

def chain(m: int) -> MetricTree:
    return build_tree(m + 1, [(i, i + 1) for i in range(1, m + 1)], name=f"chain:{m}")


def star(m: int) -> MetricTree:
    """Star with centre vertex 1 and leaves 2..m+1."""
    return build_tree(m + 1, [(1, i) for i in range(2, m + 2)], name=f"star:{m}")


def example_36() -> MetricTree:
    return build_tree(6, [(1, 2), (1, 3), (1, 4), (1, 5), (5, 6)], name="example-3.6")


def t_prime() -> MetricTree:
    return build_tree(
        8, [(1, 2), (1, 3), (1, 4), (1, 5), (5, 6), (6, 7), (6, 8)], name="t-prime"
    )


def preset(spec: str) -> MetricTree:
    spec = spec.strip()
    if spec == "example-3.6":
        return example_36()
    if spec == "t-prime":
        return t_prime()
    kind, _, size = spec.partition(":")
    if kind in ("chain", "star") and size.isdigit() and int(size) >= 1:
        return chain(int(size)) if kind == "chain" else star(int(size))
    raise GraphError(f"unknown graph preset {spec!r}")


def parse_edge_list(text: str, name: str = "tree") -> MetricTree:
    """Parse the ``n m`` header followed by one ``tail head`` pair per line."""
    rows = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise GraphError("edge-list file is empty")
    try:
        n, m = (int(x) for x in rows[0])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError as exc:
        raise GraphError(f"malformed edge list: {exc}") from None
    if len(edges) != m:
        raise GraphError(f"header announces {m} edges but {len(edges)} were listed")
    return build_tree(n, edges, name=name)


def load_graph(spec: str, base: Path | None = None) -> MetricTree:
    try:
        return preset(spec)
    except GraphError:
        pass
    path = Path(spec)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.exists():
        raise GraphError(f"{spec!r} is neither a preset nor an edge-list file")
    return parse_edge_list(path.read_text(encoding="utf-8"), name=path.stem)


def random_tree(n: int, rng: np.random.Generator) -> MetricTree:
    """Uniform random labelled tree via a Pruefer sequence, random orientations."""
    if n == 2:
        pairs = [(0, 1)]
    else:
        seq = rng.integers(0, n, size=n - 2)
        degree = np.ones(n, dtype=int)
        for x in seq:
            degree[x] += 1
        pairs = []
        for x in seq:
            leaf = int(np.flatnonzero(degree == 1)[0])
            pairs.append((leaf, int(x)))
            degree[leaf] -= 1
            degree[x] -= 1
        u, v = np.flatnonzero(degree == 1)
        pairs.append((int(u), int(v)))
    edges = [(a + 1, b + 1) if rng.random() < 0.5 else (b + 1, a + 1) for a, b in pairs]
    return build_tree(n, edges, name=f"random:{n}")

"""Null decomposition of trees and the exact strong Feller / irreducibility test.

All kernel and rank computations are exact (``fractions.Fraction`` / Python
integers); floating point enters only through :func:`check_assumption`, which
looks at the nonzero part of the normalized-adjacency spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import rational
from .graph import MetricTree, NoiseConfig, derive_matrices, matching_number


class ConsistencyError(RuntimeError):
    """Two routes that must agree did not. Always a bug, never bad input."""


@dataclass(frozen=True)
class KernelBasis:
    vectors: tuple[tuple[Fraction, ...], ...]  # each of length n, RREF order
    n: int

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def as_array(self) -> np.ndarray:
        """Kernel basis as an ``n x d`` float matrix (columns are basis vectors)."""
        if not self.vectors:
            return np.zeros((self.n, 0))
        return np.array([[float(x) for x in v] for v in self.vectors]).T

    def integer_vectors(self) -> list[list[int]]:
        return [rational.integer_scaled(v) for v in self.vectors]


@dataclass(frozen=True)
class NullDecomposition:
    supp: frozenset[int]  # 0-based vertices
    core: frozenset[int]
    s_trees: tuple[frozenset[int], ...]
    n_trees: tuple[frozenset[int], ...]
    conn_edges: frozenset[int]
    s_atoms: tuple[tuple[frozenset[int], ...], ...]  # per S-tree
    bond_edges: tuple[frozenset[int], ...]  # per S-tree

    @property
    def n_tree_vertices(self) -> frozenset[int]:
        return frozenset().union(*self.n_trees) if self.n_trees else frozenset()


@dataclass(frozen=True)
class AssumptionStatus:
    status: str  # "verified" | "indeterminate" | "violated"
    eigenvalue: float | None = None


@dataclass(frozen=True)
class FellerVerdict:
    is_strong_feller: bool
    is_irreducible: bool
    witness: tuple[Fraction, ...] | None
    assumption_status: str
    reason: str = ""


def kernel_basis(A: np.ndarray | Sequence[Sequence[int]]) -> KernelBasis:
    A = np.asarray(A)
    n = A.shape[0]
    vecs = rational.nullspace(A.tolist(), ncols=n)
    return KernelBasis(tuple(tuple(v) for v in vecs), n)


@lru_cache(maxsize=4096)
def tree_kernel(tree: MetricTree) -> KernelBasis:
    return kernel_basis(derive_matrices(tree).adjacency)


def _components(vertices: Iterable[int], edges: Iterable[tuple[int, int]]) -> list[frozenset[int]]:
    vs = set(vertices)
    adj: dict[int, list[int]] = {v: [] for v in vs}
    for u, v in edges:
        if u in vs and v in vs:
            adj[u].append(v)
            adj[v].append(u)
    comps, seen = [], set()
    for s in sorted(vs):
        if s in seen:
            continue
        stack, comp = [s], set()
        seen.add(s)
        while stack:
            u = stack.pop()
            comp.add(u)
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        comps.append(frozenset(comp))
    return comps


def decompose(tree: MetricTree) -> NullDecomposition:
    kb = tree_kernel(tree)
    nb = tree.neighbors()
    supp = frozenset(i for i in range(tree.n) if any(v[i] != 0 for v in kb.vectors))
    core = frozenset(w for s in supp for w in nb[s])
    if supp & core:
        raise ConsistencyError("Supp and Core intersect")
    s_vertices = supp | core
    s_trees = tuple(_components(s_vertices, tree.edges))
    n_trees = tuple(_components(set(range(tree.n)) - s_vertices, tree.edges))

    def inside(comp: frozenset[int]) -> set[int]:
        return {j for j, (u, v) in enumerate(tree.edges) if u in comp and v in comp}

    covered = set()
    for comp in s_trees + n_trees:
        covered |= inside(comp)
    conn = frozenset(set(range(tree.m)) - covered)

    atoms, bonds = [], []
    for S in s_trees:
        bond = {j for j in inside(S) if set(tree.edges[j]) <= core}
        kept = [tree.edges[j] for j in inside(S) - bond]
        atoms.append(tuple(_components(S, kept)))
        bonds.append(frozenset(bond))
    return NullDecomposition(supp, core, s_trees, n_trees, conn, tuple(atoms), tuple(bonds))


def noise_free_bound(tree: MetricTree) -> tuple[int, int]:
    """Sharp bound on |Z| from Supp/Core, cross-checked against ``min(2 nu - 1, m - 1)``.

    Returns ``(bound, matching_bound)``; they are equal or ConsistencyError is raised.
    """
    dec = decompose(tree)
    bound = min(tree.m - len(dec.supp) + len(dec.core), tree.m - 1)
    nu, _ = matching_number(tree)
    matching_bound = min(2 * nu - 1, tree.m - 1)
    if bound != matching_bound:
        raise ConsistencyError(
            f"{tree.name}: Supp/Core bound {bound} != matching bound {matching_bound}"
        )
    return bound, matching_bound


def _vertex_clusters(values: np.ndarray, tol: float) -> list[list[int]]:
    order = np.argsort(values)
    clusters: list[list[int]] = []
    for i in order:
        if clusters and abs(values[i] - values[clusters[-1][-1]]) <= tol:
            clusters[-1].append(int(i))
        else:
            clusters.append([int(i)])
    return clusters


@lru_cache(maxsize=4096)
def check_assumption(tree: MetricTree, tol: float = 1e-9) -> AssumptionStatus:
    """Zero entries of eigenvectors for simple nonzero eigenvalues in (-1, 1) must be non-adjacent."""
    from .spectral import adjacency_spectrum

    spec = adjacency_spectrum(tree)
    nb = tree.neighbors()
    indeterminate = None
    for idx in _vertex_clusters(spec.eigenvalues, 1e-8):
        lam = float(np.mean(spec.eigenvalues[idx]))
        if abs(lam) <= tol or abs(lam - 1) <= tol or abs(lam + 1) <= tol:
            continue
        if len(idx) > 1:
            indeterminate = indeterminate if indeterminate is not None else lam
            continue
        u = spec.vectors[:, idx[0]]
        zeros = set(np.flatnonzero(np.abs(u) < tol * np.max(np.abs(u))))
        if any(w in zeros for z in zeros for w in nb[z]):
            return AssumptionStatus("violated", lam)
    if indeterminate is not None:
        return AssumptionStatus("indeterminate", indeterminate)
    return AssumptionStatus("verified")


def _noisy_vertices(tree: MetricTree, config: NoiseConfig) -> list[int]:
    return sorted({x for j in config.noisy for x in tree.edges[j]})


def decide_strong_feller(tree: MetricTree, config: NoiseConfig) -> FellerVerdict:
    """Exact verdict: strong Feller iff no nonzero kernel vector vanishes on V(Y).

    With Y empty every eigenfunction is annihilated by Q; the witness is then
    the vertex-value vector of the constant mode when the kernel is trivial.
    """
    kb = tree_kernel(tree)
    status = check_assumption(tree).status
    d = kb.dimension
    if not config.noisy:
        witness = kb.vectors[0] if d else tuple(Fraction(1) for _ in range(tree.n))
        return FellerVerdict(False, False, witness, status, "no noisy edges")
    if d == 0:
        return FellerVerdict(True, True, None, status, "adjacency kernel is trivial")
    rows = _noisy_vertices(tree, config)
    G = [[kb.vectors[k][i] for k in range(d)] for i in rows]  # |V(Y)| x d
    coeffs = rational.nullspace(G, ncols=d)
    if not coeffs:
        return FellerVerdict(True, True, None, status, "kernel has full rank on V(Y)")
    c = coeffs[0]
    witness = tuple(sum((c[k] * kb.vectors[k][i] for k in range(d)), Fraction(0)) for i in range(tree.n))
    return FellerVerdict(False, False, witness, status, "kernel vector vanishes on V(Y)")


@dataclass
class SharpnessCertificate:
    bound: int
    max_noise_free: int
    admissible_maximal: list[frozenset[int]] = field(default_factory=list)
    subsets_checked: int = 0


def certify_sharpness(tree: MetricTree, max_edges: int = 20) -> SharpnessCertificate:
    """Largest |Z| with a positive verdict, by enumerating all 2^m edge subsets."""
    if tree.m > max_edges:
        raise ValueError(f"exhaustive certification limited to m <= {max_edges}")
    kb = tree_kernel(tree)
    d = kb.dimension
    G = kb.integer_vectors()
    cache: dict[frozenset[int], bool] = {}

    def positive(noisy: Sequence[int]) -> bool:
        if not noisy:
            return False
        if d == 0:
            return True
        rows = frozenset(x for j in noisy for x in tree.edges[j])
        hit = cache.get(rows)
        if hit is None:
            hit = rational.rank([[G[k][i] for k in range(d)] for i in sorted(rows)]) == d
            cache[rows] = hit
        return hit

    best, maximal, checked = -1, [], 0
    all_edges = range(tree.m)
    for size in range(tree.m + 1):
        for Z in combinations(all_edges, size):
            checked += 1
            noisy = [j for j in all_edges if j not in Z]
            if positive(noisy):
                if size > best:
                    best, maximal = size, []
                if size == best:
                    maximal.append(frozenset(Z))
    bound, _ = noise_free_bound(tree)
    cert = SharpnessCertificate(bound, best, maximal, checked)
    if best != bound:
        raise ConsistencyError(f"{tree.name}: enumeration gives {best}, formula gives {bound}")
    return cert

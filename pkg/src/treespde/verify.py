"""Invariant and oracle checks shared by the ``verify`` subcommand and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import rational
from .engine import DriftPreset, linear_exact_law, mode_covariance, run_trajectories
from .graph import (
    MetricTree, NoiseConfig, bipartition, brute_force_matching, build_tree, derive_matrices,
    matching_number, preset, random_tree,
)
from .nulldec import (
    ConsistencyError, certify_sharpness, decide_strong_feller, decompose, kernel_basis,
    noise_free_bound, tree_kernel,
)
from .spectral import (
    adjacency_spectrum, build_basis, eigenrelation_residual, inner_product, vertex_residuals,
)

PRESETS = ("chain:4", "star:4", "t-prime", "example-3.6")


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'}  {self.name}" + (f"  [{self.detail}]" if self.detail else "")


def random_trees(count: int, seed: int, n_max: int = 14, n_min: int = 2) -> list[MetricTree]:
    rng = np.random.default_rng(seed)
    return [random_tree(int(rng.integers(n_min, n_max + 1)), rng) for _ in range(count)]


def induced_subtree(tree: MetricTree, vertices) -> tuple[MetricTree, list[int]]:
    """Subtree on a connected vertex set, relabelled 1..k; also returns the old 0-based ids."""
    old = sorted(vertices)
    new = {v: i + 1 for i, v in enumerate(old)}
    edges = [(new[u], new[v]) for u, v in tree.edges if u in new and v in new]
    if len(old) == 1:
        raise ValueError("single-vertex subtree has no edges")
    return build_tree(len(old), edges, name=f"{tree.name}[sub]"), old


def _independent(tree: MetricTree, support) -> bool:
    s = set(support)
    return not any(u in s and v in s for u, v in tree.edges)


# ---------------------------------------------------------------- graph properties

def check_incidence_identity(tree: MetricTree) -> bool:
    g = derive_matrices(tree)
    return bool(np.array_equal(g.incidence @ g.incidence.T, g.degree + g.adjacency))


def check_full_column_rank(tree: MetricTree) -> bool:
    g = derive_matrices(tree)
    return rational.rank(g.incidence.tolist()) == tree.m and rational.rank(g.signed_incidence.tolist()) == tree.m


def check_alpha_nu(tree: MetricTree, exhaustive_up_to: int = 10) -> bool:
    nu, alpha = matching_number(tree)
    nu_hk, _ = matching_number(tree, method="hopcroft-karp")
    ok = alpha + nu == tree.n and nu == nu_hk
    if tree.n <= exhaustive_up_to:
        ok = ok and nu == brute_force_matching(tree)
    return ok


def check_bipartition(tree: MetricTree) -> bool:
    a, _ = bipartition(tree)
    return all(((u + 1) in a) != ((v + 1) in a) for u, v in tree.edges)


# ---------------------------------------------------------------- kernel properties

def check_independent_support(tree: MetricTree, rng: np.random.Generator) -> bool:
    """Each kernel vector, and a random integer combination of them, has independent support."""
    kb = tree_kernel(tree)
    for v in kb.vectors:
        if not _independent(tree, [i for i, x in enumerate(v) if x != 0]):
            return False
    if kb.dimension:
        coef = [Fraction(int(c)) for c in rng.integers(-5, 6, size=kb.dimension)]
        comb = [sum((c * v[i] for c, v in zip(coef, kb.vectors)), Fraction(0)) for i in range(tree.n)]
        if not _independent(tree, [i for i, x in enumerate(comb) if x != 0]):
            return False
    return True


def check_kernel_exact(tree: MetricTree) -> bool:
    A = derive_matrices(tree).adjacency.tolist()
    kb = tree_kernel(tree)
    zero = all(sum(Fraction(a) * x for a, x in zip(row, v)) == 0 for v in kb.vectors for row in A)
    return zero and rational.rank([list(v) for v in kb.vectors]) == kb.dimension if kb.dimension else zero


def check_atom_rank(tree: MetricTree) -> bool:
    """On every S-atom: rank(M(S)^T G) = d and d = |Supp(S)| - |Core(S)|."""
    dec = decompose(tree)
    for atoms in dec.s_atoms:
        for atom in atoms:
            if len(atom) < 2:
                return False
            sub, _ = induced_subtree(tree, atom)
            g = derive_matrices(sub)
            kb = kernel_basis(g.adjacency)
            d = kb.dimension
            sd = decompose(sub)
            if d != len(sd.supp) - len(sd.core):
                return False
            G = [[kb.vectors[k][i] for k in range(d)] for i in range(sub.n)]
            MtG = [[sum(Fraction(int(g.incidence[i, j])) * G[i][k] for i in range(sub.n)) for k in range(d)]
                   for j in range(sub.m)]
            if rational.rank(MtG) != d:
                return False
            if any(u in sd.core and v in sd.core for u, v in sub.edges):
                return False
    return True


def check_weak_partition(tree: MetricTree) -> bool:
    dec = decompose(tree)
    parts = [dec.supp, dec.core, dec.n_tree_vertices]
    disjoint = all(not (a & b) for a, b in combinations(parts, 2))
    covers = frozenset().union(*parts) == frozenset(range(tree.n))
    nu, alpha = matching_number(tree)
    nf = len(dec.n_tree_vertices)
    identities = 2 * len(dec.core) == 2 * nu - nf and 2 * len(dec.supp) == 2 * alpha - nf
    return disjoint and covers and identities


def _random_config(tree: MetricTree, rng: np.random.Generator) -> NoiseConfig:
    Z = [j for j in range(tree.m) if rng.random() < rng.random()]
    return NoiseConfig.from_noise_free(tree, Z)


def _signature(tree: MetricTree, configs: list[NoiseConfig]):
    dec = decompose(tree)
    return (
        noise_free_bound(tree), dec.supp, dec.core, frozenset(dec.s_trees), frozenset(dec.n_trees),
        dec.conn_edges, [decide_strong_feller(tree, c).is_strong_feller for c in configs],
    )


def check_orientation_independence(tree: MetricTree, rng: np.random.Generator) -> bool:
    configs = [_random_config(tree, rng) for _ in range(4)]
    flipped = tree.reversed_edges([j for j in range(tree.m) if rng.random() < 0.5])
    return _signature(tree, configs) == _signature(flipped, configs)


def check_monotonicity(tree: MetricTree, rng: np.random.Generator) -> bool:
    """Positive verdict for Z stays positive after dropping any one edge from Z."""
    for _ in range(4):
        cfg = _random_config(tree, rng)
        if not decide_strong_feller(tree, cfg).is_strong_feller:
            continue
        for j in cfg.noise_free:
            smaller = NoiseConfig(tree.m, cfg.noise_free - {j})
            if not decide_strong_feller(tree, smaller).is_strong_feller:
                return False
    return True


def check_witness(tree: MetricTree, rng: np.random.Generator) -> bool:
    cfg = _random_config(tree, rng)
    v = decide_strong_feller(tree, cfg)
    if v.is_strong_feller != v.is_irreducible:
        return False
    if v.witness is None:
        return v.is_strong_feller
    touched = {x for j in cfg.noisy for x in tree.edges[j]}
    return any(x != 0 for x in v.witness) and all(v.witness[i] == 0 for i in touched)


PROPERTIES = {
    "independent kernel support": check_independent_support,
    "S-atom incidence rank": lambda t, r: check_atom_rank(t),
    "weak partition": lambda t, r: check_weak_partition(t),
    "MM^T = D + A": lambda t, r: check_incidence_identity(t),
    "alpha + nu = n": lambda t, r: check_alpha_nu(t),
    "orientation independence": check_orientation_independence,
    "monotonicity under shrinking Z": check_monotonicity,
}


def property_suite(count: int = 1000, seed: int = 2024) -> list[Check]:
    trees = random_trees(count, seed)
    out = []
    for name, fn in PROPERTIES.items():
        rng = np.random.default_rng(seed + 1)
        bad = [t for t in trees if not fn(t, rng)]
        out.append(Check(f"{name} on {count} random trees", not bad,
                         f"first failure: {bad[0].edges}" if bad else ""))
    return out


# ---------------------------------------------------------------- spectral and engine checks

def basis_residuals(tree: MetricTree, N: int = 64) -> dict[str, float]:
    basis = build_basis(tree, N)
    cont = kirch = eig = norm = 0.0
    for md in basis.modes:
        c, k = vertex_residuals(tree, md)
        cont, kirch = max(cont, c), max(kirch, k)
        eig = max(eig, eigenrelation_residual(md, tree.m))
        norm = max(norm, abs(inner_product(md, md) - 1.0))
    gram = float(np.max(np.abs(basis.gram() - np.eye(basis.N))))
    return {"continuity": cont, "kirchhoff": kirch, "eigenrelation": eig, "normalization": norm, "gram": gram}


def run_suite(quick: bool = True) -> list[Check]:
    checks: list[Check] = []
    expected = {"chain:4": 3, "star:4": 1, "t-prime": 3, "example-3.6": 3}
    for name in PRESETS:
        tree = preset(name)
        try:
            bound, mb = noise_free_bound(tree)
            cert = certify_sharpness(tree)
            checks.append(Check(f"{name}: bound and sharpness", bound == mb == expected[name] == cert.max_noise_free,
                                f"bound={bound} matching={mb} enumerated={cert.max_noise_free}"))
        except ConsistencyError as exc:
            checks.append(Check(f"{name}: bound and sharpness", False, str(exc)))
        spec = adjacency_spectrum(tree)
        checks.append(Check(f"{name}: adjacency residual", spec.residual() <= 1e-9, f"{spec.residual():.2e}"))
        r = basis_residuals(tree)
        ok = r["continuity"] <= 1e-9 and r["kirchhoff"] <= 1e-8 and r["normalization"] <= 1e-9 and r["gram"] <= 1e-8
        checks.append(Check(f"{name}: eigenmode residuals", ok, ", ".join(f"{k}={v:.1e}" for k, v in r.items())))
    # noise covariance structure
    tp = preset("t-prime")
    basis = build_basis(tp, 32)
    C_full = mode_covariance(basis, NoiseConfig.all_noisy(tp)).C
    checks.append(Check("C = I when every edge is noisy", float(np.max(np.abs(C_full - np.eye(32)))) <= 1e-9))
    red = NoiseConfig.from_noise_free(tp, [5, 6])
    C = mode_covariance(basis, red).C
    blocked = max(float(np.max(np.abs(C @ v))) for _, v in basis.family_directions(6))
    checks.append(Check("t-prime Z={e67,e68}: kernel direction has zero covariance", blocked <= 1e-12, f"{blocked:.1e}"))
    # linear law, small Monte Carlo
    ch = preset("chain:4")
    b = build_basis(ch, 8)
    cfg = NoiseConfig.all_noisy(ch)
    M = 4000 if quick else 20000
    batch = run_trajectories(b, cfg, DriftPreset("zero"), np.zeros(8), 2.0**-5, 0.5, M, seed=11)
    mean, cov = linear_exact_law(b, cfg, np.zeros(8), 0.5)
    var_emp = batch.terminal.var(axis=0, ddof=1)
    z = np.abs(var_emp - np.diag(cov)) / (np.diag(cov) * math.sqrt(2.0 / (M - 1)))
    checks.append(Check("linear law: per-mode variance within 4 SE", bool(np.all(z < 4.0)), f"max z={z.max():.2f}"))
    # property suite at reduced size
    checks.extend(property_suite(count=100 if quick else 1000))
    return checks

from fractions import Fraction

import numpy as np
import pytest

from treespde import graph
from treespde.graph import NoiseConfig
from treespde.nulldec import (
    certify_sharpness, check_assumption, decide_strong_feller, decompose, kernel_basis,
    noise_free_bound, tree_kernel,
)
from treespde.rational import nullspace, rank, rref


def _rref(vectors):
    return rref([[Fraction(x) for x in v] for v in vectors])[0]


def test_rational_helpers():
    assert rank([[1, 2], [2, 4]]) == 1
    assert rank([[0, 1, 0], [1, 0, 0], [0, 0, 0]]) == 2
    assert rank([[Fraction(1, 2), 1], [1, 2]]) == 1
    ns = nullspace([[1, 1, 0]], ncols=3)
    assert ns == [[1, -1, 0], [0, 0, 1]]


def test_example_kernel_matches_listed_vectors():
    kb = tree_kernel(graph.preset("example-3.6"))
    assert kb.dimension == 2
    assert _rref(kb.vectors) == _rref([[0, 1, -1, 0, 0, 0], [0, 1, 0, -1, 0, 0]])


def test_t_prime_kernel():
    kb = tree_kernel(graph.t_prime())
    listed = [
        [0, 1, 0, 0, -1, 0, 0, 1],
        [0, 0, 1, 0, -1, 0, 0, 1],
        [0, 0, 0, 1, -1, 0, 0, 1],
        [0, 0, 0, 0, 0, 0, 1, -1],
    ]
    assert kb.dimension == 4
    assert _rref(kb.vectors) == _rref(listed)
    assert list(kb.vectors[3]) == [0, 0, 0, 0, 0, 0, 1, -1]


def test_path_with_even_vertex_count_is_nonsingular():
    assert kernel_basis(graph.derive_matrices(graph.chain(3)).adjacency).dimension == 0


def test_decompose_example():
    t = graph.preset("example-3.6")
    d = decompose(t)
    assert d.supp == {1, 2, 3} and d.core == {0}
    assert d.s_trees == (frozenset({0, 1, 2, 3}),)
    assert d.n_trees == (frozenset({4, 5}),)
    assert d.conn_edges == {3}  # e_15
    assert d.s_atoms == ((frozenset({0, 1, 2, 3}),),)
    assert d.bond_edges == (frozenset(),)


def test_decompose_t_prime_and_star():
    d = decompose(graph.t_prime())
    assert {v + 1 for v in d.supp} == {2, 3, 4, 5, 7, 8}
    assert {v + 1 for v in d.core} == {1, 6}
    assert len(d.s_atoms) == 1 and len(d.s_atoms[0]) == 1
    s = decompose(graph.star(5))
    assert s.supp == set(range(1, 6)) and s.core == {0}


def test_bond_edges_split_atoms():
    # two stars joined at their centres: the centre-centre edge is a bond edge
    t = graph.build_tree(6, [(1, 2), (1, 3), (1, 4), (4, 5), (4, 6)])
    d = decompose(t)
    assert d.core == {0, 3}
    assert d.bond_edges == (frozenset({2}),)
    assert len(d.s_atoms[0]) == 2


@pytest.mark.parametrize("spec, bound", [("chain:4", 3), ("star:4", 1), ("t-prime", 3), ("example-3.6", 3)])
def test_bounds(spec, bound):
    assert noise_free_bound(graph.preset(spec)) == (bound, bound)


@pytest.mark.parametrize("spec", ["chain:4", "chain:7", "star:4", "t-prime"])
def test_assumption_verified(spec):
    assert check_assumption(graph.preset(spec)).status == "verified"


def test_t_prime_verdicts():
    t = graph.t_prime()
    red = decide_strong_feller(t, NoiseConfig.from_noise_free(t, [5, 6]))
    assert not red.is_strong_feller and not red.is_irreducible
    assert list(red.witness) == [0, 0, 0, 0, 0, 0, 1, -1]
    for Z in ([0, 5], [0, 3, 5], []):
        v = decide_strong_feller(t, NoiseConfig.from_noise_free(t, Z))
        assert v.is_strong_feller and v.is_irreducible and v.witness is None


def test_no_noise_is_negative_even_for_nonsingular_trees():
    t = graph.chain(3)
    v = decide_strong_feller(t, NoiseConfig.no_noise(t))
    assert not v.is_strong_feller
    assert all(x == 1 for x in v.witness)


def test_witness_vanishes_on_noisy_vertices():
    t = graph.star(4)
    cfg = NoiseConfig.from_noise_free(t, [0, 2, 3])
    v = decide_strong_feller(t, cfg)
    assert not v.is_strong_feller
    assert v.witness[0] == 0 and v.witness[2] == 0
    assert any(x != 0 for x in v.witness)


def test_sharpness_t_prime_admissible_sets():
    cert = certify_sharpness(graph.t_prime())
    assert cert.max_noise_free == 3
    assert cert.subsets_checked == 2**7
    # never more than one of e12, e13, e14 in a maximal admissible set
    for Z in cert.admissible_maximal:
        assert len(Z & {0, 1, 2}) <= 1


def test_sharpness_chain_every_triple():
    cert = certify_sharpness(graph.chain(4))
    assert cert.max_noise_free == 3
    assert len(cert.admissible_maximal) == 4


def test_sharpness_size_limit():
    with pytest.raises(ValueError):
        certify_sharpness(graph.chain(21))

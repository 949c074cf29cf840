import numpy as np
import pytest

from treespde import graph
from treespde.graph import GraphError, NoiseConfig, build_tree, derive_matrices, matching_number
from treespde.rational import rank


@pytest.fixture
def ex36():
    return graph.preset("example-3.6")


def test_example_tree_matrices(ex36):
    g = derive_matrices(ex36)
    A = np.zeros((6, 6), dtype=int)
    for u, v in [(1, 2), (1, 3), (1, 4), (1, 5), (5, 6)]:
        A[u - 1, v - 1] = A[v - 1, u - 1] = 1
    M = np.array([
        [1, 1, 1, 1, 0],
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 0, 1, 0, 0],
        [0, 0, 0, 1, 1],
        [0, 0, 0, 0, 1],
    ])
    assert np.array_equal(g.adjacency, A)
    assert np.array_equal(g.incidence, M)
    assert np.array_equal(g.incidence @ g.incidence.T, g.degree + g.adjacency)
    assert np.array_equal(g.signed_incidence, g.phi_plus - g.phi_minus)
    assert rank(g.incidence.tolist()) == 5 and rank(g.signed_incidence.tolist()) == 5


def test_single_edge():
    t = build_tree(2, [(1, 2)])
    g = derive_matrices(t)
    assert np.array_equal(g.adjacency, [[0, 1], [1, 0]])
    assert np.allclose(g.normalized_adjacency_float(), g.adjacency)


def test_star_normalized_adjacency_exact():
    g = derive_matrices(graph.star(4))
    from fractions import Fraction

    assert g.normalized_adjacency[0][1] == Fraction(1, 4)
    assert g.normalized_adjacency[1][0] == Fraction(1)
    assert np.allclose(np.sort(np.linalg.eigvals(g.normalized_adjacency_float()).real), [-1, 0, 0, 0, 1])


@pytest.mark.parametrize(
    "n, edges, msg",
    [
        (4, [(1, 2), (2, 3), (3, 1)], "cycle"),
        (3, [(1, 1), (2, 3)], "self-loop"),
        (3, [(1, 2), (2, 1)], "duplicate"),
        (4, [(1, 2), (3, 4)], "connected|cycle|edges"),
        (3, [(1, 5), (2, 3)], "range|vert"),
        (3, [], None),
    ],
)
def test_build_tree_rejects(n, edges, msg):
    with pytest.raises(GraphError, match=msg):
        build_tree(n, edges)


@pytest.mark.parametrize("spec, nu", [("chain:4", 2), ("star:4", 1), ("t-prime", 2), ("example-3.6", 2)])
def test_matching_numbers(spec, nu):
    t = graph.preset(spec)
    assert matching_number(t) == (nu, t.n - nu)
    assert matching_number(t, method="hopcroft-karp")[0] == nu
    assert graph.brute_force_matching(t) == nu


def test_bipartition_examples(ex36):
    assert graph.bipartition(graph.chain(2)) == (frozenset({1, 3}), frozenset({2}))
    assert graph.bipartition(graph.star(4)) == (frozenset({1}), frozenset({2, 3, 4, 5}))
    assert graph.bipartition(ex36) == (frozenset({1, 6}), frozenset({2, 3, 4, 5}))


def test_noise_config():
    t = graph.preset("chain:4")
    cfg = NoiseConfig.from_noise_free(t, [1, 2, 3])
    assert cfg.noisy == {0}
    assert cfg.mask.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert cfg.label() == "1"
    assert NoiseConfig.no_noise(t).label() == "none"
    with pytest.raises(GraphError):
        NoiseConfig.from_noise_free(t, [4])


def test_edge_list_round_trip(tmp_path):
    p = tmp_path / "tp.txt"
    p.write_text("8 7\n1 2\n1 3\n1 4\n1 5\n5 6\n6 7\n6 8\n")
    t = graph.load_graph(str(p))
    assert t.edges == graph.t_prime().edges
    with pytest.raises(GraphError, match="announces"):
        graph.parse_edge_list("3 3\n1 2\n2 3\n")


def test_edge_index_and_reversal():
    t = graph.t_prime()
    assert t.edge_index(7, 6) == 5
    r = t.reversed_edges([0])
    assert r.edges[0] == (1, 0) and r.edges[1:] == t.edges[1:]


def test_random_tree_is_valid():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = graph.random_tree(int(rng.integers(2, 15)), rng)
        assert t.m == t.n - 1

import math

import numpy as np
import pytest
from scipy import integrate

from treespde import graph
from treespde.spectral import (
    adjacency_spectrum, build_basis, eigenrelation_residual, families, family_frequencies,
    inner_product, jacobi_eigh, sigma1_modes, sigma2_mode, sigma2_modes, vertex_residuals, vertex_values,
)

PRESETS = ["chain:4", "star:4", "t-prime", "example-3.6"]


def test_jacobi_matches_numpy():
    rng = np.random.default_rng(3)
    for n in (1, 2, 5, 12):
        X = rng.standard_normal((n, n))
        S = X + X.T
        w, V = jacobi_eigh(S)
        assert np.allclose(w, np.linalg.eigvalsh(S), atol=1e-12)
        assert np.allclose(V.T @ V, np.eye(n), atol=1e-12)
        assert np.allclose(S @ V, V * w, atol=1e-11)


@pytest.mark.parametrize(
    "spec, expected",
    [
        ("chain:4", [math.cos(k * math.pi / 4) for k in range(5)]),
        ("star:4", [-1, 1, 0, 0, 0]),
        ("t-prime", [0, 0, 0, 0, 1, -1, math.sqrt(102) / 12, -math.sqrt(102) / 12]),
    ],
)
def test_adjacency_spectra(spec, expected):
    sp = adjacency_spectrum(graph.preset(spec))
    assert np.allclose(sp.eigenvalues, np.sort(expected), atol=1e-9, rtol=0)
    assert sp.residual() <= 1e-9
    assert np.all(np.abs(sp.eigenvalues) <= 1 + 1e-12)


def test_family_order_t_prime():
    fams = families(graph.t_prime())
    assert [round(f.mu, 12) for f in fams[:2]] == [round(math.sqrt(102) / 12, 12), round(-math.sqrt(102) / 12, 12)]
    assert fams[5].vertex_values.tolist() == [0, 0, 0, 0, 0, 0, 1, -1]


def test_sigma1_modes():
    t = graph.chain(2)
    modes = sigma1_modes(t, 4)
    assert np.allclose(modes[0].a, 1 / math.sqrt(2)) and modes[0].omega == 0.0
    odd = modes[1]
    assert np.allclose(np.abs(odd.a), 1.0) and odd.a[0] == -odd.a[1]
    assert max(vertex_residuals(t, odd)) <= 1e-9
    assert np.allclose(modes[2].a, modes[2].a[0])
    for md in sigma1_modes(graph.t_prime(), 6):
        assert max(vertex_residuals(graph.t_prime(), md)) <= 1e-9
        assert abs(inner_product(md, md) - 1) <= 1e-12
        assert np.all(np.abs(md.a) > 0)  # never identically zero on an edge


def test_star_zero_family_modes():
    t = graph.star(4)
    modes = [md for md in sigma2_modes(t, 2.0) if abs(md.omega - math.pi / 2) < 1e-12]
    assert len(modes) == 3
    md = modes[0]  # kernel vector v2 - v5: lives on e1 and e4 only
    assert np.allclose(md.a, 0)
    assert md.b[1] == 0 and md.b[2] == 0 and md.b[0] == -md.b[3] != 0


def test_chain_lowest_sigma2_frequency():
    b = build_basis(graph.chain(4), 8)
    assert abs(b.mu1 - (math.pi / 4) ** 2) <= 1e-9
    assert b.modes[1].family == "sigma2" and abs(b.modes[1].generator - math.sqrt(2) / 2) < 1e-12


def test_vanishing_edge():
    t = graph.t_prime()
    fam = families(t)[5]
    md = sigma2_mode(t, fam, fam.theta, 1)
    assert np.all(md.a[:5] == 0) and np.all(md.b[:5] == 0)


def test_frequency_branches():
    w = family_frequencies(math.pi / 2, 4 * math.pi)
    assert np.allclose(w, [0.5 * math.pi, 1.5 * math.pi, 2.5 * math.pi, 3.5 * math.pi])


@pytest.mark.parametrize("spec", PRESETS)
def test_basis_invariants(spec):
    t = graph.preset(spec)
    b = build_basis(t, 64)
    assert b.N == 64
    assert np.all(np.diff(b.eigenvalues) >= -1e-12)
    assert np.allclose(b.modes[0].a, 1 / math.sqrt(t.m)) and b.eigenvalues[0] == 0.0
    assert np.max(np.abs(b.gram() - np.eye(64))) <= 1e-8
    At = adjacency_spectrum(t).normalized_adjacency
    for md in b.modes:
        cont, kir = vertex_residuals(t, md)
        assert cont <= 1e-9 and kir <= 1e-8
        assert eigenrelation_residual(md, t.m) <= 1e-9
        assert abs(inner_product(md, md) - 1) <= 1e-9
    for md in b.raw_modes:
        if md.family == "sigma2":
            U = vertex_values(t, md)
            assert np.max(np.abs(At @ U - math.cos(md.omega) * U)) <= 1e-8


def test_single_edge_basis_is_neumann_cosines():
    b = build_basis(graph.chain(1), 6)
    assert all(md.family == "sigma1" for md in b.modes)
    assert np.allclose(b.eigenvalues, (np.arange(6) * math.pi) ** 2)
    assert np.allclose(np.abs(b.A[1:, 0]), math.sqrt(2))


def test_star_eigenvalue_sequence():
    b = build_basis(graph.star(4), 8)
    expect = np.array([0, 0.25, 0.25, 0.25, 1, 2.25, 2.25, 2.25]) * math.pi**2
    assert np.allclose(b.eigenvalues, expect)
    assert np.max(np.abs(b.gram() - np.eye(8))) <= 1e-8


def test_basis_of_one_mode():
    b = build_basis(graph.t_prime(), 1)
    assert b.N == 1 and b.modes[0].omega == 0.0


def test_inner_products_against_quadrature():
    t = graph.t_prime()
    b = build_basis(t, 12)
    for i, j in [(0, 1), (1, 2), (2, 5), (3, 3), (6, 11)]:
        f, g = b.raw_modes[i], b.raw_modes[j]
        q = sum(integrate.quad(lambda x: f.evaluate(e, x) * g.evaluate(e, x), 0, 1, epsabs=1e-13)[0]
                for e in range(t.m))
        assert abs(q - inner_product(f, g)) <= 1e-10
        if abs(f.omega - g.omega) > 1e-6:
            assert abs(inner_product(f, g)) <= 1e-8


def test_eigenvalue_counting_grows():
    t = graph.t_prime()
    b = build_basis(t, 64)
    counts = [int(np.sum(b.eigenvalues <= L)) for L in (10, 100, 400, 1000)]
    assert counts == sorted(counts)
    # Weyl-type count: about m sqrt(L) / pi eigenvalues below L
    L = 1000
    assert abs(counts[-1] - t.m * math.sqrt(L) / math.pi) <= t.m + 2


def test_family_directions_only_complete_eigenspaces():
    b = build_basis(graph.star(4), 3)  # cuts the triple eigenvalue (pi/2)^2
    assert b.complete_up_to == 1
    assert b.family_directions(1) == []
    b4 = build_basis(graph.star(4), 4)
    (rung, v), = b4.family_directions(1)
    assert rung == 1 and abs(np.linalg.norm(v) - 1) < 1e-12

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _netgen
from netsing.errors import DegenerateKernel, DisconnectedGraph, SingularInternalBlock
from netsing.graph_core import (Definiteness, NodePartition, SignedGraph, assemble_laplacian,
                                classify_definiteness, corank, definiteness_of,
                                effective_resistance, kron_reduce, pseudoinverse,
                                restricted_eigvals, shift_basis, singular_gain, unit_pair)

# positive part of the bundled five-node example (0-based)
FIG1_POS = [(0, 1), (0, 3), (1, 2), (1, 4), (2, 4)]


def fig1_plus():
    return _netgen.unit_graph(5, FIG1_POS)


def fig1_L(k):
    L = assemble_laplacian(fig1_plus())
    e = unit_pair(5, 1, 3)
    return L - k * np.outer(e, e)


def test_single_edge_and_triangle():
    L = assemble_laplacian(SignedGraph(2, ((0, 1, 1.0),)))
    assert np.array_equal(L, [[1, -1], [-1, 1]])
    T = assemble_laplacian(_netgen.unit_graph(3, [(0, 1), (1, 2), (0, 2)]))
    assert np.array_equal(np.diag(T), [2, 2, 2])
    assert np.all(T[~np.eye(3, dtype=bool)] == -1)


def test_fig1_laplacian_pattern():
    k = 0.37
    L = fig1_L(k)
    want = np.array([[2, -1, 0, -1, 0],
                     [-1, 3 - k, -1, k, -1],
                     [0, -1, 2, 0, -1],
                     [-1, k, 0, 1 - k, 0],
                     [0, -1, -1, 0, 2]])
    np.testing.assert_allclose(L, want, atol=1e-15)


def test_graph_validation():
    with pytest.raises(ValueError, match="self-loop"):
        SignedGraph(3, ((1, 1, 1.0),))
    with pytest.raises(ValueError):
        SignedGraph(3, ())
    g = SignedGraph(4, ((0, 1, 1.0), (2, 3, -1.0)))
    assert g.n_components() == 2 and not g.is_connected()
    D = g.incidence()
    np.testing.assert_array_equal(D @ np.diag(g.weights) @ D.T, assemble_laplacian(g))


def test_pseudoinverse_examples():
    np.testing.assert_allclose(pseudoinverse(np.array([[1.0, -1], [-1, 1]])),
                               [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)
    assert np.all(pseudoinverse(np.zeros((3, 3))) == 0)
    v = pseudoinverse(assemble_laplacian(fig1_plus())) @ unit_pair(5, 1, 3)
    assert v[1] - v[3] == pytest.approx(2.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_pseudoinverse_penrose_identities(n, seed):
    L = _netgen.random_signed_laplacian(np.random.default_rng(seed), n)
    P = pseudoinverse(L)
    scale = np.linalg.norm(L)
    assert np.linalg.norm(L @ P @ L - L) <= 1e-9 * scale
    assert np.linalg.norm(P @ L @ P - P) <= 1e-9 * max(1, np.linalg.norm(P))
    assert np.allclose(L @ P, (L @ P).T, atol=1e-9)
    assert np.allclose(P @ L, (P @ L).T, atol=1e-9)
    assert np.allclose(P @ np.ones(n), 0, atol=1e-9 * max(1, np.linalg.norm(P)))


def test_corank_examples():
    assert corank(assemble_laplacian(fig1_plus())) == 1
    assert corank(fig1_L(0.5)) == 2
    assert corank(fig1_L(0.3)) == 1
    g = SignedGraph(4, ((0, 1, 1.0), (2, 3, 1.0)))
    assert corank(assemble_laplacian(g)) == 2


def test_kron_path_and_passthrough():
    L = assemble_laplacian(_netgen.unit_graph(3, [(0, 1), (1, 2)]))
    red = kron_reduce(L, NodePartition.from_boundary(3, [0, 2]))
    np.testing.assert_allclose(red, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    np.testing.assert_array_equal(kron_reduce(L, NodePartition.from_boundary(3, [0, 1, 2])), L)


def test_kron_fig1_singular_keeps_corank():
    red = kron_reduce(fig1_L(0.5), NodePartition.from_boundary(5, [0, 1, 2]))
    assert red.shape == (3, 3)
    assert corank(red) == 2
    np.testing.assert_allclose(red.sum(axis=1), 0, atol=1e-12)


def test_kron_matches_naive_schur():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n = int(rng.integers(3, 10))
        L = _netgen.random_signed_laplacian(rng, n)
        b = sorted(rng.choice(n, int(rng.integers(1, n)), replace=False).tolist())
        c = [i for i in range(n) if i not in b]
        if np.linalg.svd(L[np.ix_(c, c)], compute_uv=False)[-1] < 1e-6:
            continue
        naive = L[np.ix_(b, b)] - L[np.ix_(b, c)] @ np.linalg.inv(L[np.ix_(c, c)]) @ L[np.ix_(c, b)]
        red = kron_reduce(L, NodePartition.from_boundary(n, b))
        np.testing.assert_allclose(red, naive, atol=1e-9 * max(1, np.abs(naive).max()))
        np.testing.assert_allclose(red.sum(axis=1), 0, atol=1e-9 * max(1, np.abs(red).max()))


def test_kron_singular_block():
    # node 3 hangs on a zero-conductance pair: L_CC = 0
    L = assemble_laplacian(SignedGraph(3, ((0, 1, 1.0), (1, 2, 1.0), (1, 2, -1.0))))
    with pytest.raises(SingularInternalBlock):
        kron_reduce(L, NodePartition.from_boundary(3, [0, 1]))


def test_effective_resistance():
    assert effective_resistance(assemble_laplacian(SignedGraph(2, ((0, 1, 1.0),))), 0, 1) == \
        pytest.approx(1.0)
    assert effective_resistance(assemble_laplacian(fig1_plus()), 1, 3) == pytest.approx(2.0)
    tri = assemble_laplacian(_netgen.unit_graph(3, [(0, 1), (1, 2), (0, 2)]))
    assert effective_resistance(tri, 0, 2) == pytest.approx(2 / 3)
    with pytest.raises(DegenerateKernel):
        effective_resistance(fig1_L(0.5), 0, 1)


def test_effective_resistance_series_and_cycle():
    rng = np.random.default_rng(4)
    R = rng.uniform(0.5, 2.0, 6)
    path = SignedGraph(7, tuple((i, i + 1, 1 / R[i]) for i in range(6)))
    assert effective_resistance(assemble_laplacian(path), 0, 6) == pytest.approx(R.sum())
    ring = SignedGraph(6, tuple((i, (i + 1) % 6, 1 / R[i]) for i in range(6)))
    a, b = R[:3].sum(), R[3:].sum()
    assert effective_resistance(assemble_laplacian(ring), 0, 3) == pytest.approx(a * b / (a + b))


def test_singular_gain_certificate():
    cert = singular_gain(fig1_plus(), 1, 3)
    assert cert.critical_gain == pytest.approx(0.5, abs=1e-12)
    assert cert.effective_resistance == pytest.approx(2.0, abs=1e-12)
    v = cert.kernel_vector
    ref = np.array([-2, 3, 3, -7, 3]) / 5
    ref = ref / np.linalg.norm(ref)
    np.testing.assert_allclose(np.abs(v @ ref), 1, atol=1e-12)
    assert abs(v.sum()) < 1e-12 and np.linalg.norm(v) == pytest.approx(1)
    assert v[np.flatnonzero(np.abs(v) > 1e-12)[0]] > 0
    assert np.linalg.norm(fig1_L(cert.critical_gain) @ v) <= 1e-9


def test_singular_gain_two_nodes_and_disconnected():
    cert = singular_gain(SignedGraph(2, ((0, 1, 1.0),)), 0, 1)
    assert cert.critical_gain == pytest.approx(1.0)
    np.testing.assert_allclose(cert.kernel_vector, np.array([1, -1]) / np.sqrt(2))
    with pytest.raises(DisconnectedGraph):
        singular_gain(SignedGraph(4, ((0, 1, 1.0), (2, 3, 1.0))), 0, 2)


@pytest.mark.parametrize("k,want", [(0.3, Definiteness.PositiveSemidefCorank1),
                                    (0.5, Definiteness.SingularCorank2),
                                    (0.7, Definiteness.IndefiniteCorank1)])
def test_classify_definiteness_fig1(k, want):
    assert classify_definiteness(fig1_plus(), 1, 3, k) == want
    assert definiteness_of(fig1_L(k)) == want


def test_transition_at_critical_gain_by_sweep():
    rng = np.random.default_rng(8)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        pairs = _netgen.random_tree_plus(rng, n)
        g = _netgen.unit_graph(n, pairs)
        i, j = _netgen.random_pair(rng, n)
        k_star = 1 / effective_resistance(assemble_laplacian(g), i, j)
        e = unit_pair(n, i, j)
        for k in np.linspace(0.2, 1.8, 17) * k_star:
            lam = np.linalg.eigvalsh(assemble_laplacian(g) - k * np.outer(e, e))
            got = classify_definiteness(g, i, j, k)
            if abs(k - k_star) < 1e-9:
                assert got == Definiteness.SingularCorank2
            elif k < k_star:
                assert got == Definiteness.PositiveSemidefCorank1 and lam[0] > -1e-9
            else:
                assert got == Definiteness.IndefiniteCorank1 and np.sum(lam < -1e-9) == 1


def test_shift_basis_and_restricted_spectrum():
    Q = shift_basis(5)
    np.testing.assert_allclose(Q.T @ Q, np.eye(4), atol=1e-14)
    np.testing.assert_allclose(Q.T @ np.ones(5), 0, atol=1e-14)
    mu = restricted_eigvals(fig1_L(0.3))
    full = np.linalg.eigvalsh(fig1_L(0.3))
    np.testing.assert_allclose(mu, full[1:], atol=1e-12)

import numpy as np
import pytest
from conftest import path_graph, random_graph
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_umap import KnnGraph, ParameterError
from spectral_umap.knn_graph import laplacian_from_graph
from spectral_umap.spectral import (
    edge_affinities,
    exact_bottom_eigenvectors,
    gauss_seidel_sweep,
    smoothed_test_vectors,
    spectral_affinity,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec3 = st.lists(finite, min_size=3, max_size=3)


def test_path_bottom_eigenvector():
    L = laplacian_from_graph(path_graph(3))
    emb = exact_bottom_eigenvectors(L, 1)
    # dense oracle: eigenvalues of the path-3 Laplacian are 0, 1, 3
    lam, vecs = np.linalg.eigh(L.toarray())
    np.testing.assert_allclose(lam, [0, 1, 3], atol=1e-12)
    assert emb.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    u = emb.vectors[:, 0] * np.sign(emb.vectors[0, 0])
    np.testing.assert_allclose(u, np.array([1, 0, -1]) / np.sqrt(2), atol=1e-12)
    assert emb.kind == "exact"


def test_two_components_exclude_both_null_vectors():
    g = KnnGraph(4, [0, 2], [1, 3], [1.0, 1.0])
    L = laplacian_from_graph(g)
    emb = exact_bottom_eigenvectors(L, 1)
    # spectrum {0, 0, 2, 2}: both zeros (one per component) are dropped
    assert emb.eigenvalues[0] == pytest.approx(2.0, abs=1e-12)
    u = emb.vectors[:, 0]
    np.testing.assert_allclose(L @ u, 2.0 * u, atol=1e-12)
    assert u[0] + u[1] == pytest.approx(0.0, abs=1e-12)
    assert u[2] + u[3] == pytest.approx(0.0, abs=1e-12)


def test_K_too_large():
    L = laplacian_from_graph(path_graph(3))
    with pytest.raises(ParameterError):
        exact_bottom_eigenvectors(L, 3)
    with pytest.raises(ParameterError):
        exact_bottom_eigenvectors(L, 0)


def test_exact_residuals_and_order(rng):
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(15, 60)), p=0.2, connected=True)
        L = laplacian_from_graph(g)
        emb = exact_bottom_eigenvectors(L, 5)
        for lam, u in zip(emb.eigenvalues, emb.vectors.T):
            assert np.linalg.norm(L @ u - lam * u) <= 1e-6 * np.linalg.norm(u)
        assert np.all(np.diff(emb.eigenvalues) >= 0)
        np.testing.assert_allclose(emb.vectors.T @ emb.vectors, np.eye(5), atol=1e-10)
        np.testing.assert_allclose(emb.vectors.sum(axis=0), 0.0, atol=1e-10)


def test_one_sweep_on_path_by_hand():
    L = laplacian_from_graph(path_graph(3))
    x0 = np.array([1.0, 0.0, -1.0])
    assert x0 @ (L @ x0) == pytest.approx(2.0)
    x = gauss_seidel_sweep(L, x0.copy())
    # x0 <- x1 = 0; x1 <- (x0 + x2) / 2 = -0.5; x2 <- x1 = -0.5
    np.testing.assert_allclose(x, [0.0, -0.5, -0.5])
    x -= x.mean()
    np.testing.assert_allclose(x, [1 / 3, -1 / 6, -1 / 6])
    assert x @ (L @ x) == pytest.approx(0.25)
    assert x @ (L @ x) < 2.0


def test_energy_monotone_per_sweep(rng):
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(5, 80)), p=0.15)
        L = laplacian_from_graph(g)
        emb, energies = smoothed_test_vectors(L, 6, 8, seed=3, return_energies=True)
        assert np.all(np.diff(energies, axis=1) <= 0)
        # reported energies describe the returned vectors
        final = np.einsum("ik,ik->k", emb.vectors, L @ emb.vectors)
        np.testing.assert_allclose(energies[:, -1], final, rtol=1e-10, atol=1e-14)


def test_smoothed_deterministic_and_centred(rng):
    g = random_graph(rng, 50, p=0.1)
    L = laplacian_from_graph(g)
    a = smoothed_test_vectors(L, 10, 10, seed=9)
    b = smoothed_test_vectors(L, 10, 10, seed=9)
    assert a.vectors.tobytes() == b.vectors.tobytes()
    assert a.kind == "smoothed" and a.vectors.shape == (50, 10)
    np.testing.assert_allclose(a.vectors.mean(axis=0), 0.0, atol=1e-14)
    c = smoothed_test_vectors(L, 10, 10, seed=10)
    assert not np.array_equal(a.vectors, c.vectors)


def test_isolated_vertex_untouched_by_sweep():
    # vertex 3 has no edges
    g = KnnGraph(4, [0, 1], [1, 2], [1.0, 1.0])
    L = laplacian_from_graph(g)
    x = np.array([0.3, -0.2, 0.5, 0.9])
    gauss_seidel_sweep(L, x)
    assert x[3] == 0.9


def test_smoothed_rejects_bad_counts():
    L = laplacian_from_graph(path_graph(3))
    with pytest.raises(ParameterError):
        smoothed_test_vectors(L, 0, 1)
    with pytest.raises(ParameterError):
        smoothed_test_vectors(L, 1, 0)


@pytest.mark.parametrize(
    "xu,xv,expected",
    [((1, 0), (0, 1), 0.0), ((1, 2), (2, 4), 1.0), ((1, 0), (1, 1), 0.5)],
)
def test_affinity_examples(xu, xv, expected):
    assert spectral_affinity(xu, xv) == pytest.approx(expected, abs=1e-15)


def test_affinity_zero_vector_convention():
    assert spectral_affinity([0.0, 0.0], [1.0, 1.0]) == 0.0
    assert spectral_affinity([1e-13, 0.0], [1.0, 0.0]) == 0.0


@settings(max_examples=300, deadline=None)
@given(vec3, vec3)
def test_affinity_bounds_and_symmetry(xu, xv):
    s = spectral_affinity(xu, xv)
    assert 0.0 <= s <= 1.0
    assert s == spectral_affinity(xv, xu)


@settings(max_examples=300, deadline=None)
@given(vec3, vec3, st.floats(0.01, 100), st.floats(-100, -0.01))
def test_affinity_scale_invariant(xu, xv, alpha, beta):
    xu, xv = np.array(xu), np.array(xv)
    if xu @ xu < 1e-6 or xv @ xv < 1e-6:
        return
    assert spectral_affinity(alpha * xu, beta * xv) == pytest.approx(
        spectral_affinity(xu, xv), abs=1e-12
    )


def test_vectorised_matches_scalar(rng):
    X = rng.normal(size=(30, 4))
    X[5] = 0.0
    src = rng.integers(0, 30, 100)
    dst = rng.integers(0, 30, 100)
    fast = edge_affinities(X, src, dst)
    slow = [spectral_affinity(X[u], X[v]) for u, v in zip(src, dst)]
    np.testing.assert_allclose(fast, slow, atol=1e-15)

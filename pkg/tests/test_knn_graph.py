from collections import deque

import numpy as np
import pytest
from conftest import dense_laplacian, path_graph, random_graph

from spectral_umap import DenseDataset, KnnGraph, ParameterError, generate_synthetic
from spectral_umap.knn_graph import (
    build_knn_graph,
    laplacian_from_graph,
    nearest_neighbors,
    symmetrize,
    write_edge_list,
)


def naive_neighbors(X, k):
    """Double loop over all pairs, sorted by (distance, index)."""
    out = []
    for i in range(len(X)):
        cand = sorted(
            (float(np.sqrt(((X[i] - X[j]) ** 2).sum())), j) for j in range(len(X)) if j != i
        )
        out.append([j for _, j in cand[:k]])
    return np.array(out)


def bfs_components(n, src, dst):
    adj = [[] for _ in range(n)]
    for u, v in zip(src, dst):
        adj[u].append(v)
        adj[v].append(u)
    label = [-1] * n
    comps = []
    for s in range(n):
        if label[s] >= 0:
            continue
        label[s] = len(comps)
        members, queue = [s], deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if label[v] < 0:
                    label[v] = label[s]
                    members.append(v)
                    queue.append(v)
        comps.append(sorted(members))
    return comps


def test_collinear_nearest_pairs():
    d = DenseDataset(np.array([[0.0], [1.0], [3.0]]))
    g = build_knn_graph(d, k=1)
    assert g.directed
    assert set(zip(g.src.tolist(), g.dst.tolist())) == {(0, 1), (1, 0), (2, 1)}


def test_duplicate_points_weight_one():
    d = DenseDataset(np.array([[2.0, 2.0], [2.0, 2.0]]))
    g = build_knn_graph(d, k=1)
    np.testing.assert_array_equal(g.weights, [1.0, 1.0])


def test_identical_dataset_valid_graph():
    d = DenseDataset(np.ones((6, 3)))
    g = build_knn_graph(d, k=3)
    np.testing.assert_array_equal(g.weights, 1.0)
    # ties resolve toward lower indices
    assert g.dst.reshape(6, 3)[5].tolist() == [0, 1, 2]
    assert g.dst.reshape(6, 3)[0].tolist() == [1, 2, 3]


def test_k_out_of_range():
    d = DenseDataset(np.zeros((3, 1)))
    with pytest.raises(ParameterError):
        build_knn_graph(d, k=3)
    with pytest.raises(ParameterError):
        build_knn_graph(d, k=0)


def test_gaussian_weights_global_bandwidth():
    X = np.array([[0.0], [1.0], [3.0], [7.0]])
    g = build_knn_graph(DenseDataset(X), k=1)
    kth = np.array([1.0, 1.0, 2.0, 4.0])
    sigma = kth.mean()
    d = np.abs(X[g.src, 0] - X[g.dst, 0])
    np.testing.assert_allclose(g.weights, np.exp(-(d**2) / sigma**2), rtol=1e-14)


def test_two_blobs_two_components():
    data = generate_synthetic("blobs", 100, 0.1, 1)
    g = symmetrize(build_knn_graph(data, k=10))
    comps = bfs_components(100, g.src, g.dst)
    assert len(comps) == 2
    for members in comps:
        assert len(set(data.labels[members])) == 1


@pytest.mark.parametrize("metric", ["euclidean", "cosine"])
def test_matches_naive_search(rng, metric):
    X = rng.normal(size=(80, 4))
    idx, _ = nearest_neighbors(X, 6, metric, method="brute")
    if metric == "euclidean":
        np.testing.assert_array_equal(idx, naive_neighbors(X, 6))
    else:
        Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
        np.testing.assert_array_equal(idx, naive_neighbors(Xn, 6))


@pytest.mark.parametrize("n", [50, 500, 2000])
def test_brute_and_kdtree_agree(rng, n):
    # integer lattice with duplicates forces many exact ties
    X = np.vstack([rng.integers(0, 12, size=(n // 2, 2)), rng.normal(size=(n - n // 2, 2))])
    a_idx, a_d = nearest_neighbors(X, 10, method="brute")
    b_idx, b_d = nearest_neighbors(X, 10, method="kdtree")
    np.testing.assert_array_equal(a_idx, b_idx)
    np.testing.assert_array_equal(a_d, b_d)


def test_permutation_invariance(rng):
    X = rng.normal(size=(60, 3))
    perm = rng.permutation(60)
    g = symmetrize(build_knn_graph(DenseDataset(X), 5))
    gp = symmetrize(build_knn_graph(DenseDataset(X[perm]), 5))
    # vertex p in the permuted graph is original vertex perm[p]
    relabelled = {
        (min(perm[u], perm[v]), max(perm[u], perm[v])): w
        for u, v, w in zip(gp.src, gp.dst, gp.weights)
    }
    original = {(u, v): w for u, v, w in zip(g.src, g.dst, g.weights)}
    assert relabelled.keys() == original.keys()
    for key, w in original.items():
        assert relabelled[key] == pytest.approx(w, rel=1e-12)


def test_symmetrize_max_rule():
    g = KnnGraph(2, [0, 1], [1, 0], [0.5, 0.7], directed=True)
    s = symmetrize(g)
    assert (s.src.tolist(), s.dst.tolist(), s.weights.tolist()) == ([0], [1], [0.7])


def test_symmetrize_union_rule():
    s = symmetrize(KnnGraph(3, [0], [1], [0.5], directed=True))
    assert (s.src.tolist(), s.dst.tolist(), s.weights.tolist()) == ([0], [1], [0.5])


def test_symmetrize_empty():
    s = symmetrize(KnnGraph.empty(4))
    assert s.n_edges == 0 and s.n_vertices == 4


def test_symmetrize_sorted_and_oriented(rng):
    X = rng.normal(size=(40, 2))
    s = symmetrize(build_knn_graph(DenseDataset(X), 4))
    assert np.all(s.src < s.dst)
    keys = s.src * 40 + s.dst
    assert np.all(np.diff(keys) > 0)


def test_laplacian_path():
    L = laplacian_from_graph(path_graph(3)).toarray()
    np.testing.assert_array_equal(L, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])


def test_laplacian_single_edge():
    L = laplacian_from_graph(KnnGraph(2, [0], [1], [2.0])).toarray()
    np.testing.assert_array_equal(L, [[2, -2], [-2, 2]])


def test_laplacian_matches_entrywise_construction(rng):
    for _ in range(20):
        g = random_graph(rng, int(rng.integers(2, 30)))
        L = laplacian_from_graph(g)
        np.testing.assert_allclose(L.toarray(), dense_laplacian(g), atol=1e-14)
        np.testing.assert_allclose(np.asarray(L.sum(axis=1)).ravel(), 0.0, atol=1e-12)


def test_zero_eigenvalue_count_equals_components(rng):
    for _ in range(15):
        n = int(rng.integers(5, 100))
        g = random_graph(rng, n, p=float(rng.uniform(0.01, 0.08)))
        lam = np.linalg.eigvalsh(laplacian_from_graph(g).toarray())
        n_zero = int(np.sum(np.abs(lam) < 1e-9))
        assert n_zero == len(bfs_components(n, g.src, g.dst))


def test_invalid_graphs_rejected():
    with pytest.raises(ParameterError):
        KnnGraph(2, [0], [0], [1.0])
    with pytest.raises(ParameterError):
        KnnGraph(2, [0], [1], [0.0])
    with pytest.raises(ParameterError):
        KnnGraph(2, [0], [5], [1.0])


def test_edge_list_dump(tmp_path):
    g = KnnGraph(3, [1, 0], [2, 1], [0.123456789012, 2.0])
    # an unsorted undirected list is accepted; the dump goes through symmetrize
    g = symmetrize(KnnGraph(3, g.src, g.dst, g.weights, directed=True))
    write_edge_list(g, tmp_path / "e.txt")
    assert (tmp_path / "e.txt").read_text() == "0 1 2\n1 2 0.123456789\n"

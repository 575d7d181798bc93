"""Weighted k-nearest-neighbour graphs and their Laplacians.

Neighbour lists are exact. Distance ties are broken toward the lower vertex
index, and both search routes (blocked brute force and KD-tree) refine their
candidates with the same direct distance evaluation, so they return
identical neighbour sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ._errors import ParameterError
from .dataset import DenseDataset

METRICS = ("euclidean", "cosine")
_WEIGHT_FLOOR = 1e-290
_BLOCK_BYTES = 64 * 2**20


@dataclass(frozen=True)
class KnnGraph:
    """Edge-list graph on ``n_vertices`` vertices.

    ``directed`` graphs hold the raw ``u -> v`` neighbour relations emitted by
    :func:`build_knn_graph`; undirected graphs store each edge once with
    ``u < v``, sorted lexicographically.
    """

    n_vertices: int
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray
    k: int = 0
    directed: bool = False

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64).ravel()
        dst = np.asarray(self.dst, dtype=np.int64).ravel()
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if not (src.shape == dst.shape == w.shape):
            raise ParameterError("src, dst and weights must have equal length")
        if src.size:
            if src.min() < 0 or max(src.max(), dst.max()) >= self.n_vertices:
                raise ParameterError("vertex id out of range")
            if np.any(src == dst):
                raise ParameterError("self-loops are not allowed")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ParameterError("edge weights must be positive and finite")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weights", w)

    @property
    def n_edges(self) -> int:
        return self.src.shape[0]

    @classmethod
    def empty(cls, n_vertices):
        z = np.zeros(0, dtype=np.int64)
        return cls(n_vertices, z, z, np.zeros(0))

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric sparse adjacency matrix."""
        if self.directed:
            # duplicate directions collapse by max, matching symmetrize()
            return symmetrize(self).adjacency()
        n = self.n_vertices
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        vals = np.concatenate([self.weights, self.weights])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _prepare(X, metric):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        scale = np.where(norms > 0, norms, 1.0)
        X = X / scale[:, None]
    return X


def _exact_distances(X, i, cand, metric):
    if metric == "euclidean":
        diff = X[cand] - X[i]
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return np.maximum(1.0 - X[cand] @ X[i], 0.0)


def _select(X, i, cand, k, metric):
    cand = cand[cand != i]
    d = _exact_distances(X, i, cand, metric)
    order = np.lexsort((cand, d))[:k]
    return cand[order], d[order]


def _brute_neighbors(X, k, metric):
    n = X.shape[0]
    indices = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k))
    sq = np.einsum("ij,ij->i", X, X)
    block = max(1, min(n, _BLOCK_BYTES // (8 * n)))
    for start in range(0, n, block):
        stop = min(n, start + block)
        G = X[start:stop] @ X.T
        if metric == "euclidean":
            D = sq[start:stop, None] + sq[None, :] - 2.0 * G
            tol = 1e-9 * (sq[start:stop, None] + sq.max()) + 1e-300
        else:
            D = 1.0 - G
            tol = np.full((stop - start, 1), 1e-9)
        rows = np.arange(stop - start)
        D[rows, rows + start] = np.inf
        kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
        mask = D <= kth + tol
        for r in rows:
            i = start + r
            indices[i], dists[i] = _select(X, i, np.flatnonzero(mask[r]), k, metric)
    return indices, dists


def _kdtree_neighbors(X, k):
    n = X.shape[0]
    tree = cKDTree(X)
    d_q, _ = tree.query(X, k=k + 1)
    radius = d_q[:, k] * (1.0 + 1e-9) + 1e-12
    balls = tree.query_ball_point(X, radius)
    indices = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k))
    for i in range(n):
        cand = np.asarray(balls[i], dtype=np.int64)
        indices[i], dists[i] = _select(X, i, cand, k, "euclidean")
    return indices, dists


def nearest_neighbors(X, k, metric="euclidean", method="auto"):
    """Exact ``k`` nearest neighbours of every row, excluding the row itself.

    Returns ``(indices, distances)``, each ``N x k``, ordered by ascending
    distance and then ascending index.

    ``method`` is ``"brute"``, ``"kdtree"`` (Euclidean only) or ``"auto"``,
    which picks the KD-tree for low-dimensional Euclidean data.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if metric not in METRICS:
        raise ParameterError(f"unknown metric {metric!r}; choose from {METRICS}")
    if not 1 <= k < n:
        raise ParameterError(f"k must satisfy 1 <= k < N={n}, got {k}")
    if method == "auto":
        method = "kdtree" if metric == "euclidean" and X.shape[1] <= 12 else "brute"
    if method == "kdtree":
        if metric != "euclidean":
            raise ParameterError("the KD-tree route supports the euclidean metric only")
        return _kdtree_neighbors(np.ascontiguousarray(X), k)
    if method != "brute":
        raise ParameterError(f"unknown neighbour search method {method!r}")
    return _brute_neighbors(_prepare(X, metric), k, metric)


def build_knn_graph(
    data: DenseDataset, k: int = 10, metric: str = "euclidean", method: str = "auto"
) -> KnnGraph:
    """Directed k-NN graph with Gaussian edge weights.

    Each vertex points to its ``k`` nearest neighbours. The weight of
    ``u -> v`` is ``exp(-dist(u, v)**2 / s**2)`` where the bandwidth ``s`` is
    the mean distance to the k-th neighbour over all vertices (floored at
    1e-12).
    """
    indices, dists = nearest_neighbors(data.values, k, metric, method)
    sigma = max(float(dists[:, -1].mean()), 1e-12)
    weights = np.maximum(np.exp(-((dists / sigma) ** 2)), _WEIGHT_FLOOR)
    n = data.n_samples
    src = np.repeat(np.arange(n), k)
    return KnnGraph(n, src, indices.ravel(), weights.ravel(), k=k, directed=True)


def symmetrize(graph: KnnGraph) -> KnnGraph:
    """Undirected union of ``graph``; a pair seen in both directions keeps the
    larger weight."""
    n = graph.n_vertices
    if graph.n_edges == 0:
        return KnnGraph(n, graph.src, graph.dst, graph.weights, k=graph.k)
    lo = np.minimum(graph.src, graph.dst)
    hi = np.maximum(graph.src, graph.dst)
    keys = lo * n + hi
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    w = np.maximum.reduceat(graph.weights[order], starts)
    u = keys[starts] // n
    v = keys[starts] % n
    return KnnGraph(n, u, v, w, k=graph.k)


def laplacian_from_graph(graph: KnnGraph) -> sp.csr_matrix:
    """Combinatorial Laplacian ``D - W`` as a sparse CSR matrix.

    Off-diagonal entries are ``-w(p, q)``; the diagonal holds each vertex's
    weighted degree.
    """
    if graph.directed:
        graph = symmetrize(graph)
    W = graph.adjacency()
    degree = np.asarray(W.sum(axis=1)).ravel()
    L = sp.diags(degree, format="csr") - W
    L.sort_indices()
    return L.tocsr()


def n_components(graph: KnnGraph) -> int:
    return connected_components(graph.adjacency(), directed=False)[0]


def write_edge_list(graph: KnnGraph, path) -> None:
    """Dump an undirected graph as ``u v w`` lines sorted by ``(u, v)``."""
    if graph.directed:
        graph = symmetrize(graph)
    with open(path, "w") as fh:
        for u, v, w in zip(graph.src, graph.dst, graph.weights):
            fh.write(f"{u} {v} {w:.9g}\n")

"""Spectral aggregation of samples into mean pseudo-samples.

One level scores every graph edge by the spectral affinity of its endpoints
and greedily merges aggregates along the strongest edges until the level's
target ratio is met. :func:`compress` rebuilds the graph on the
pseudo-samples and repeats until the overall requested ratio is reached.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp

from ._errors import ParameterError
from .dataset import DenseDataset
from .knn_graph import KnnGraph, build_knn_graph, laplacian_from_graph, symmetrize
from .spectral import SpectralEmbedding, edge_affinities, smoothed_test_vectors

log = logging.getLogger(__name__)

LEVEL_RATIO_CAP = 4.0
RATIO_TOLERANCE = 0.9


@dataclass(frozen=True)
class CoarseningMap:
    """Total, surjective assignment of fine indices to aggregate ids."""

    assignment: np.ndarray
    n_coarse: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64).ravel()
        if a.size and (a.min() < 0 or a.max() >= self.n_coarse):
            raise ParameterError("aggregate id out of range")
        if np.unique(a).size != self.n_coarse:
            raise ParameterError("every aggregate must have at least one member")
        object.__setattr__(self, "assignment", a)

    @property
    def n_fine(self) -> int:
        return self.assignment.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n), n)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.n_coarse)


@dataclass(frozen=True)
class CoarseDataset:
    """Pseudo-samples (in the original feature space) with member counts.

    ``data.labels`` carries the majority labels when the fine data had labels.
    """

    data: DenseDataset
    sizes: np.ndarray
    majority_labels: Optional[np.ndarray] = None

    @property
    def n_coarse(self) -> int:
        return self.data.n_samples


@dataclass(frozen=True)
class CompressParams:
    k: int = 10
    metric: str = "euclidean"
    K: int = 10
    sweeps: int = 10
    seed: int = 0
    ratio: float = 5.0
    max_levels: int = 10
    min_affinity: Optional[float] = None
    method: str = "auto"


@dataclass
class LevelInfo:
    n_fine: int
    n_coarse: int
    level_ratio: float


@numba.njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@numba.njit(cache=True)
def _greedy_merge(n, src, dst, order, cap, target_count):
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    count = n
    for e in order:
        if count <= target_count:
            break
        ru = _find(parent, src[e])
        rv = _find(parent, dst[e])
        if ru == rv:
            continue
        if size[ru] >= cap or size[rv] >= cap or size[ru] + size[rv] > 2 * cap:
            continue
        # smaller root id survives so relabelling stays deterministic
        if rv < ru:
            ru, rv = rv, ru
        parent[rv] = ru
        size[ru] += size[rv]
        count -= 1
    assignment = np.empty(n, dtype=np.int64)
    label_of_root = -np.ones(n, dtype=np.int64)
    next_id = 0
    for i in range(n):
        r = _find(parent, i)
        if label_of_root[r] < 0:
            label_of_root[r] = next_id
            next_id += 1
        assignment[i] = label_of_root[r]
    return assignment, next_id


def group_means(X, cmap: CoarseningMap):
    """Row means of ``X`` within each aggregate of ``cmap``."""
    X = np.asarray(X, dtype=np.float64)
    n = cmap.n_fine
    M = sp.csr_matrix(
        (np.ones(n), (cmap.assignment, np.arange(n))), shape=(cmap.n_coarse, n)
    )
    return np.asarray(M @ X) / cmap.sizes()[:, None]


def majority_labels(cmap: CoarseningMap, labels):
    """Most frequent label per aggregate; ties go to the smaller label."""
    labels = np.asarray(labels)
    classes, inverse = np.unique(labels, return_inverse=True)
    counts = sp.csr_matrix(
        (np.ones(cmap.n_fine), (cmap.assignment, inverse)),
        shape=(cmap.n_coarse, classes.size),
    ).toarray()
    return classes[np.argmax(counts, axis=1)]


def _coarse_dataset(values, cmap, fine_labels):
    means = group_means(values, cmap)
    maj = None if fine_labels is None else majority_labels(cmap, fine_labels)
    return CoarseDataset(DenseDataset(means, maj), cmap.sizes(), maj)


def coarsen_level(
    data: DenseDataset,
    graph: KnnGraph,
    spectral: SpectralEmbedding,
    target_ratio_level: float,
    min_affinity: Optional[float] = None,
):
    """Aggregate one level by descending-affinity edge merging.

    Edges are scanned once in order of decreasing affinity (ties by
    ``(u, v)``). Two aggregates merge when both hold fewer than
    ``ceil(target_ratio_level)`` members; the scan stops once at most
    ``N / target_ratio_level`` aggregates remain. Edges scoring below
    ``min_affinity`` are never merged along.

    Returns ``(CoarseningMap, CoarseDataset)``.
    """
    if not target_ratio_level > 1:
        raise ParameterError(f"target_ratio_level must exceed 1, got {target_ratio_level}")
    n = data.n_samples
    if graph.n_vertices != n or spectral.n != n:
        raise ParameterError("graph, spectral vectors and data disagree on N")
    if graph.directed:
        graph = symmetrize(graph)
    s = edge_affinities(spectral.vectors, graph.src, graph.dst)
    order = np.lexsort((graph.dst, graph.src, -s))
    if min_affinity is not None:
        order = order[s[order] >= min_affinity]
    cap = math.ceil(target_ratio_level)
    assignment, n_coarse = _greedy_merge(
        n, graph.src, graph.dst, order.astype(np.int64), cap, n / target_ratio_level
    )
    cmap = CoarseningMap(assignment, n_coarse)
    return cmap, _coarse_dataset(data.values, cmap, data.labels)


def compose_maps(outer: CoarseningMap, inner: CoarseningMap) -> CoarseningMap:
    """Map fine points through ``inner`` and then ``outer``."""
    if inner.n_coarse != outer.n_fine:
        raise ParameterError(
            f"inner map has {inner.n_coarse} aggregates but outer map expects {outer.n_fine}"
        )
    return CoarseningMap(outer.assignment[inner.assignment], outer.n_coarse)


def lift_embedding(cmap: CoarseningMap, coarse_embedding):
    """Give every fine point its aggregate's coordinates."""
    coarse_embedding = np.asarray(coarse_embedding)
    if coarse_embedding.shape[0] != cmap.n_coarse:
        raise ParameterError(
            f"embedding has {coarse_embedding.shape[0]} rows, map has {cmap.n_coarse} aggregates"
        )
    return coarse_embedding[cmap.assignment]


def compress(
    data: DenseDataset,
    params: Optional[CompressParams] = None,
    return_levels: bool = False,
    **overrides,
):
    """Coarsen ``data`` by roughly ``params.ratio``.

    Each level runs k-NN graph -> Laplacian -> smoothed test vectors ->
    :func:`coarsen_level` on the current pseudo-samples, with a level ratio
    of ``min(4, remaining ratio)``. Iteration stops when ``N / P`` reaches
    90% of the requested ratio, after ``max_levels`` levels, or when a level
    makes no progress.

    Returns ``(CoarseDataset, CoarseningMap)``, plus a list of per-level
    :class:`LevelInfo` records when ``return_levels`` is set.
    """
    params = replace(params or CompressParams(), **overrides)
    n = data.n_samples
    if params.ratio < 1:
        raise ParameterError(f"ratio must be >= 1, got {params.ratio}")
    if params.ratio > n:
        raise ParameterError(f"ratio {params.ratio} exceeds the sample count {n}")
    if params.max_levels < 1:
        raise ParameterError(f"max_levels must be >= 1, got {params.max_levels}")

    total = CoarseningMap.identity(n)
    current = data.values
    levels = []
    while len(levels) < params.max_levels:
        p = current.shape[0]
        achieved = n / p
        if achieved >= RATIO_TOLERANCE * params.ratio or p < 2:
            break
        level_ratio = min(LEVEL_RATIO_CAP, params.ratio / achieved)
        level_data = DenseDataset(current)
        graph = symmetrize(
            build_knn_graph(level_data, min(params.k, p - 1), params.metric, params.method)
        )
        vectors = smoothed_test_vectors(
            laplacian_from_graph(graph), params.K, params.sweeps, params.seed + len(levels)
        )
        cmap, _ = coarsen_level(
            level_data, graph, vectors, level_ratio, params.min_affinity
        )
        levels.append(LevelInfo(p, cmap.n_coarse, level_ratio))
        log.info("level %d: %d -> %d points", len(levels), p, cmap.n_coarse)
        if cmap.n_coarse == p:
            break
        total = compose_maps(cmap, total)
        current = group_means(data.values, total)

    coarse = _coarse_dataset(data.values, total, data.labels)
    if return_levels:
        return coarse, total, levels
    return coarse, total


def write_map_csv(cmap: CoarseningMap, path) -> None:
    with open(path, "w") as fh:
        for i, a in enumerate(cmap.assignment):
            fh.write(f"{i},{a}\n")


def read_map_csv(path) -> CoarseningMap:
    rows = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    order = np.argsort(rows[:, 0])
    if not np.array_equal(rows[order, 0], np.arange(rows.shape[0])):
        raise ParameterError(f"{path}: fine indices must cover 0..n-1 exactly once")
    assignment = rows[order, 1]
    return CoarseningMap(assignment, int(assignment.max()) + 1)


def write_sizes_csv(coarse: CoarseDataset, path) -> None:
    with open(path, "w") as fh:
        for j, size in enumerate(coarse.sizes):
            label = "" if coarse.majority_labels is None else str(coarse.majority_labels[j])
            fh.write(f"{j},{size},{label}\n")

"""Embedding fidelity, compression quality and stage timing."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.metrics import silhouette_score

from ._errors import ParameterError
from .coarsen import CoarseningMap
from .dataset import DenseDataset
from .knn_graph import nearest_neighbors

_BLOCK_ROWS = 512


def _values(x):
    return x.values if isinstance(x, DenseDataset) else np.asarray(x, dtype=np.float64)


def _rank_rows(X, rows, metric):
    """Ranks of every point in the neighbour order of each row in ``rows``;
    the row itself gets rank 0, ties resolve by index."""
    D = cdist(X[rows], X, metric=metric)
    D[np.arange(len(rows)), rows] = -1.0
    order = np.argsort(D, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(X.shape[0])[None, :], axis=1)
    return ranks


def trustworthiness(original, embedding, k: int = 15, metric: str = "euclidean") -> float:
    """Venna-Kaski trustworthiness of ``embedding`` at neighbourhood size ``k``.

    ``T(k) = 1 - 2 / (n k (2n - 3k - 1)) * sum_i sum_{j in U_i} (r(i, j) - k)``
    where ``U_i`` holds the embedding neighbours of ``i`` that are not among
    its ``k`` original-space neighbours and ``r`` is the original-space rank.
    """
    X = _values(original)
    Y = _values(embedding)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ParameterError("original and embedding differ in sample count")
    if not 1 <= k < n / 2:
        raise ParameterError(f"k must satisfy 1 <= k < n/2 = {n / 2}, got {k}")
    emb_nn, _ = nearest_neighbors(Y, k, method="brute")
    penalty = 0
    for start in range(0, n, _BLOCK_ROWS):
        rows = np.arange(start, min(n, start + _BLOCK_ROWS))
        ranks = _rank_rows(X, rows, metric)
        r = np.take_along_axis(ranks, emb_nn[rows], axis=1)
        penalty += int(np.maximum(r - k, 0).sum())
    return 1.0 - 2.0 * penalty / (n * k * (2.0 * n - 3.0 * k - 1.0))


def knn_preservation(original, embedding, k: int = 15) -> float:
    """Mean fraction of each point's ``k`` original neighbours that are also
    its ``k`` embedding neighbours."""
    X = _values(original)
    Y = _values(embedding)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ParameterError("original and embedding differ in sample count")
    if not 1 <= k < n:
        raise ParameterError(f"k must satisfy 1 <= k < n={n}, got {k}")
    nn_x, _ = nearest_neighbors(X, k, method="brute")
    nn_y, _ = nearest_neighbors(Y, k, method="brute")
    shared = (nn_x[:, :, None] == nn_y[:, None, :]).any(axis=2).sum(axis=1)
    return float(shared.mean() / k)


def aggregate_purity(cmap: CoarseningMap, labels) -> float:
    """Fraction of fine points carrying their aggregate's majority label."""
    labels = np.asarray(labels)
    if labels.shape[0] != cmap.n_fine:
        raise ParameterError("labels must have one entry per fine point")
    _, inverse = np.unique(labels, return_inverse=True)
    counts = np.zeros((cmap.n_coarse, inverse.max() + 1), dtype=np.int64)
    np.add.at(counts, (cmap.assignment, inverse), 1)
    return float(counts.max(axis=1).sum() / cmap.n_fine)


def label_silhouette(embedding, labels) -> float:
    return float(silhouette_score(_values(embedding), np.asarray(labels)))


def shuffled_label_silhouette(embedding, labels, seed: int = 0) -> float:
    """Silhouette of the same embedding under randomly permuted labels."""
    rng = np.random.default_rng(seed)
    return label_silhouette(embedding, rng.permutation(np.asarray(labels)))


def stage_timer(stage: str, thunk, timings: Optional[Dict[str, float]] = None) -> float:
    """Wall-clock seconds spent in ``thunk()``, also stored under ``stage``."""
    start = time.perf_counter()
    thunk()
    elapsed = time.perf_counter() - start
    if timings is not None:
        timings[stage] = timings.get(stage, 0.0) + elapsed
    return elapsed


class StageTimer:
    """Accumulates named stage durations; use :meth:`stage` as a context."""

    def __init__(self):
        self.durations: Dict[str, float] = {}

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.durations[name] = self.durations.get(name, 0.0) + (
                time.perf_counter() - start
            )

    @property
    def total(self):
        return sum(self.durations.values())


@dataclass
class EvalReport:
    trustworthiness: float
    knn_preservation: float
    achieved_ratio: float
    aggregate_purity: Optional[float] = None
    wall_clock_seconds: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("trustworthiness", "knn_preservation", "aggregate_purity"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name}={v} outside [0, 1]")
        if self.achieved_ratio < 1.0:
            raise ParameterError("achieved_ratio must be >= 1")

    def as_dict(self):
        return asdict(self)

    def to_kv(self) -> str:
        """Flat ``key=value`` lines in sorted key order."""
        lines = []
        for key, value in sorted(self.as_dict().items()):
            if isinstance(value, dict):
                for stage, seconds in sorted(value.items()):
                    lines.append(f"{key}.{stage}={seconds:.6f}")
            elif value is None:
                lines.append(f"{key}=")
            else:
                lines.append(f"{key}={value:.9g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

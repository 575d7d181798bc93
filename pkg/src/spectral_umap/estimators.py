"""scikit-learn compatible wrappers around the coarsening and UMAP routines."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted

from .coarsen import CoarseningMap, CompressParams, compress, group_means, lift_embedding
from .dataset import DenseDataset
from .metrics import StageTimer
from .umap_ import UmapParams, fit_ab, fuzzy_simplicial_set, initialize_embedding, optimize_embedding


def _dataset(X, y=None):
    X = check_array(X, dtype=np.float64, ensure_min_samples=2)
    labels = None if y is None else np.asarray(y)
    return DenseDataset(X, labels)


class SpectralCoarsener(TransformerMixin, BaseEstimator):
    """Reduce a sample matrix to spectrally coherent mean pseudo-samples.

    Parameters
    ----------
    ratio : float, default=5.0
        Requested compression ratio ``n_samples / n_pseudo_samples``.
    n_neighbors : int, default=10
        Neighbours per point in the coarsening graph.
    metric : {"euclidean", "cosine"}, default="euclidean"
    n_vectors : int, default=10
        Number of relaxed test vectors.
    sweeps : int, default=10
        Gauss-Seidel sweeps applied to each test vector.
    max_levels : int, default=10
    min_affinity : float or None, default=None
        Edges below this affinity are never merged along.
    random_state : int, default=0

    Attributes
    ----------
    assignment_ : ndarray of shape (n_samples,)
        Aggregate id of every fitted sample.
    cluster_centers_ : ndarray of shape (n_coarse, n_features)
        The pseudo-samples.
    sizes_ : ndarray of shape (n_coarse,)
    coarse_labels_ : ndarray or None
        Majority label per pseudo-sample when ``y`` was given to ``fit``.
    achieved_ratio_ : float
    """

    def __init__(
        self,
        ratio=5.0,
        n_neighbors=10,
        metric="euclidean",
        n_vectors=10,
        sweeps=10,
        max_levels=10,
        min_affinity=None,
        random_state=0,
    ):
        self.ratio = ratio
        self.n_neighbors = n_neighbors
        self.metric = metric
        self.n_vectors = n_vectors
        self.sweeps = sweeps
        self.max_levels = max_levels
        self.min_affinity = min_affinity
        self.random_state = random_state

    def _params(self):
        return CompressParams(
            k=self.n_neighbors,
            metric=self.metric,
            K=self.n_vectors,
            sweeps=self.sweeps,
            seed=self.random_state,
            ratio=self.ratio,
            max_levels=self.max_levels,
            min_affinity=self.min_affinity,
        )

    def fit(self, X, y=None):
        data = _dataset(X, y)
        coarse, cmap, levels = compress(data, self._params(), return_levels=True)
        self.map_ = cmap
        self.assignment_ = cmap.assignment
        self.cluster_centers_ = coarse.data.values
        self.sizes_ = coarse.sizes
        self.coarse_labels_ = coarse.majority_labels
        self.achieved_ratio_ = data.n_samples / coarse.n_coarse
        self.levels_ = levels
        self.n_features_in_ = data.n_features
        return self

    def transform(self, X):
        """Average the rows of ``X`` within the fitted aggregates.

        ``X`` must be row-aligned with the data passed to ``fit``; for that
        data this returns ``cluster_centers_``.
        """
        check_is_fitted(self, "map_")
        X = check_array(X, dtype=np.float64)
        if X.shape[0] != self.map_.n_fine:
            raise ValueError(
                f"X has {X.shape[0]} rows; the fitted partition covers {self.map_.n_fine}"
            )
        return group_means(X, self.map_)

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).cluster_centers_

    def lift(self, coarse_embedding):
        """Broadcast per-aggregate rows back to every fitted sample."""
        check_is_fitted(self, "map_")
        return lift_embedding(self.map_, coarse_embedding)


class UMAP(BaseEstimator):
    """Uniform manifold approximation and projection.

    Only ``fit`` / ``fit_transform`` are offered; out-of-sample transforms
    are not supported.
    """

    def __init__(
        self,
        n_neighbors=15,
        n_components=2,
        min_dist=0.1,
        spread=1.0,
        n_epochs=None,
        learning_rate=1.0,
        negative_sample_rate=5,
        init="spectral",
        metric="euclidean",
        random_state=0,
        n_jobs=1,
    ):
        self.n_neighbors = n_neighbors
        self.n_components = n_components
        self.min_dist = min_dist
        self.spread = spread
        self.n_epochs = n_epochs
        self.learning_rate = learning_rate
        self.negative_sample_rate = negative_sample_rate
        self.init = init
        self.metric = metric
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _params(self):
        return UmapParams(
            n_neighbors=self.n_neighbors,
            n_components=self.n_components,
            min_dist=self.min_dist,
            spread=self.spread,
            n_epochs=self.n_epochs,
            learning_rate=self.learning_rate,
            negative_sample_rate=self.negative_sample_rate,
            seed=self.random_state,
            init=self.init,
            metric=self.metric,
            n_threads=self.n_jobs,
        ).validate()

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        params = self._params()
        if params.n_neighbors >= X.shape[0]:
            raise ValueError(f"n_neighbors={params.n_neighbors} must be < n_samples={X.shape[0]}")
        self.graph_ = fuzzy_simplicial_set(X, params.n_neighbors, params.metric)
        self.a_, self.b_ = fit_ab(params.min_dist, params.spread)
        params = replace(params, a=self.a_, b=self.b_)
        init = initialize_embedding(self.graph_, params.n_components, params.init, params.seed)
        self.embedding_ = optimize_embedding(init, self.graph_, params)
        self.n_features_in_ = X.shape[1]
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X, y).embedding_


class CoarseUMAP(BaseEstimator):
    """Coarsen with :class:`SpectralCoarsener`, embed the pseudo-samples with
    :class:`UMAP`, then lift the layout back to every input sample.

    Attributes
    ----------
    coarsener_ : SpectralCoarsener
    umap_ : UMAP
    coarse_embedding_ : ndarray of shape (n_coarse, n_components)
    embedding_ : ndarray of shape (n_samples, n_components)
    timings_ : dict
        Wall-clock seconds for the ``compress`` and ``embed`` stages.
    """

    def __init__(self, coarsener=None, umap=None):
        self.coarsener = coarsener
        self.umap = umap

    def fit(self, X, y=None):
        coarsener = clone(self.coarsener) if self.coarsener is not None else SpectralCoarsener()
        reducer = clone(self.umap) if self.umap is not None else UMAP()
        timer = StageTimer()
        with timer.stage("compress"):
            coarsener.fit(X, y)
        with timer.stage("embed"):
            coarse_embedding = reducer.fit_transform(coarsener.cluster_centers_)
        self.coarsener_ = coarsener
        self.umap_ = reducer
        self.coarse_embedding_ = coarse_embedding
        self.embedding_ = coarsener.lift(coarse_embedding)
        self.timings_ = dict(timer.durations)
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X, y).embedding_

    @property
    def map_(self) -> CoarseningMap:
        check_is_fitted(self, "coarsener_")
        return self.coarsener_.map_

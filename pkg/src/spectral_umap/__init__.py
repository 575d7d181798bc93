"""UMAP accelerated by spectrum-preserving data coarsening."""

from ._errors import EmptyInputError, ParameterError, ParseError
from .coarsen import (
    CoarseDataset,
    CoarseningMap,
    CompressParams,
    coarsen_level,
    compose_maps,
    compress,
    lift_embedding,
)
from .dataset import DenseDataset, generate_synthetic, load_csv, save_csv
from .estimators import UMAP, CoarseUMAP, SpectralCoarsener
from .knn_graph import KnnGraph, build_knn_graph, laplacian_from_graph, symmetrize
from .metrics import EvalReport, aggregate_purity, knn_preservation, trustworthiness
from .spectral import (
    SpectralEmbedding,
    exact_bottom_eigenvectors,
    smoothed_test_vectors,
    spectral_affinity,
)
from .umap_ import UmapParams, fit_ab, fuzzy_simplicial_set, umap_embed

__version__ = "0.1.0"

__all__ = [
    "CoarseDataset",
    "CoarseUMAP",
    "CoarseningMap",
    "CompressParams",
    "DenseDataset",
    "EmptyInputError",
    "EvalReport",
    "KnnGraph",
    "ParameterError",
    "ParseError",
    "SpectralCoarsener",
    "SpectralEmbedding",
    "UMAP",
    "UmapParams",
    "aggregate_purity",
    "build_knn_graph",
    "coarsen_level",
    "compose_maps",
    "compress",
    "exact_bottom_eigenvectors",
    "fit_ab",
    "fuzzy_simplicial_set",
    "generate_synthetic",
    "knn_preservation",
    "laplacian_from_graph",
    "lift_embedding",
    "load_csv",
    "save_csv",
    "smoothed_test_vectors",
    "spectral_affinity",
    "symmetrize",
    "trustworthiness",
    "umap_embed",
]

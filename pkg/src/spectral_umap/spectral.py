"""Per-point spectral feature vectors and the affinity between them.

Two routes produce an ``N x K`` matrix whose rows are the points' spectral
coordinates: an exact eigensolve of the graph Laplacian (small graphs, used
as an oracle) and Gauss-Seidel relaxation of random vectors on ``L x = 0``,
which costs ``O(sweeps * K * |E|)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from ._errors import ParameterError

_TINY_NORM2 = 1e-24
_DENSE_LIMIT = 3000


@dataclass(frozen=True)
class SpectralEmbedding:
    """Row ``u`` of ``vectors`` is the feature vector of point ``u``.

    ``kind`` is ``"exact"`` (Laplacian eigenvectors, ascending eigenvalue,
    constant directions removed) or ``"smoothed"`` (relaxed test vectors with
    zero column means).
    """

    vectors: np.ndarray
    kind: str
    eigenvalues: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def K(self) -> int:
        return self.vectors.shape[1]


def _count_components(L):
    A = sp.csr_matrix(L, copy=True)
    A.setdiag(0)
    A.eliminate_zeros()
    return connected_components(A, directed=False)[0]


def exact_bottom_eigenvectors(L, K: int) -> SpectralEmbedding:
    """Bottom ``K`` nontrivial eigenvectors of a graph Laplacian.

    One null direction per connected component is discarded. Graphs up to a
    few thousand vertices use a dense symmetric eigensolver; larger ones fall
    back to shift-invert Lanczos.
    """
    L = sp.csr_matrix(L)
    n = L.shape[0]
    c = _count_components(L)
    if K < 1 or K + c > n:
        raise ParameterError(
            f"K={K} with {c} connected component(s) needs K + c <= n={n}"
        )
    if n <= _DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(L.toarray(), subset_by_index=[0, K + c - 1])
    else:
        v0 = np.ones(n) / np.sqrt(n)
        vals, vecs = spla.eigsh(L.tocsc(), k=K + c, sigma=-1e-3, which="LM", v0=v0)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    return SpectralEmbedding(
        np.ascontiguousarray(vecs[:, c:]), "exact", eigenvalues=vals[c:]
    )


@numba.njit(cache=True)
def _gs_sweep(indptr, indices, data, x):
    n = x.shape[0]
    for i in range(n):
        diag = 0.0
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j == i:
                diag += data[p]
            else:
                acc -= data[p] * x[j]
        if diag > 0.0:
            x[i] = acc / diag


@numba.njit(cache=True)
def _energy(indptr, indices, data, x):
    total = 0.0
    for i in range(x.shape[0]):
        row = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            row += data[p] * x[indices[p]]
        total += x[i] * row
    return total


@numba.njit(cache=True)
def _relax(indptr, indices, data, X, sweeps, energies):
    n, K = X.shape
    x = np.empty(n)
    for k in range(K):
        for i in range(n):
            x[i] = X[i, k]
        energies[k, 0] = _energy(indptr, indices, data, x)
        for t in range(sweeps):
            _gs_sweep(indptr, indices, data, x)
            x -= x.mean()
            energies[k, t + 1] = _energy(indptr, indices, data, x)
        for i in range(n):
            X[i, k] = x[i]


def gauss_seidel_sweep(L, x):
    """One in-place forward Gauss-Seidel sweep on ``L x = 0``.

    Vertices are visited in ascending order; zero-degree vertices are left
    untouched.
    """
    L = sp.csr_matrix(L)
    _gs_sweep(L.indptr, L.indices, L.data.astype(np.float64), x)
    return x


def smoothed_test_vectors(
    L, K: int = 10, sweeps: int = 10, seed: int = 0, return_energies: bool = False
):
    """Relax ``K`` random vectors with ``sweeps`` Gauss-Seidel sweeps each.

    Vectors start i.i.d. uniform on ``(-1, 1)`` and are mean-centred after each
    sweep so they do not collapse onto the constant null vector.

    With ``return_energies`` the Dirichlet energies ``x^T L x`` (``K x
    (sweeps + 1)``, column 0 before any sweep) are returned as well.
    """
    if K < 1 or sweeps < 1:
        raise ParameterError(f"K and sweeps must be >= 1, got K={K}, sweeps={sweeps}")
    L = sp.csr_matrix(L)
    L.sort_indices()
    n = L.shape[0]
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, K))
    X -= X.mean(axis=0)
    energies = np.empty((K, sweeps + 1))
    _relax(
        L.indptr.astype(np.int64),
        L.indices.astype(np.int64),
        L.data.astype(np.float64),
        X,
        sweeps,
        energies,
    )
    emb = SpectralEmbedding(X, "smoothed")
    if return_energies:
        return emb, energies
    return emb


def spectral_affinity(Xu, Xv) -> float:
    """Squared cosine between two spectral feature vectors, in ``[0, 1]``.

    Either vector having squared norm below 1e-24 gives 0.
    """
    Xu = np.asarray(Xu, dtype=np.float64)
    Xv = np.asarray(Xv, dtype=np.float64)
    uu = float(Xu @ Xu)
    vv = float(Xv @ Xv)
    if uu < _TINY_NORM2 or vv < _TINY_NORM2:
        return 0.0
    uv = float(Xu @ Xv)
    return min(1.0, (uv * uv) / (uu * vv))


def edge_affinities(vectors, src, dst):
    """Vectorised :func:`spectral_affinity` over edge endpoints."""
    Xu = vectors[src]
    Xv = vectors[dst]
    uu = np.einsum("ij,ij->i", Xu, Xu)
    vv = np.einsum("ij,ij->i", Xv, Xv)
    uv = np.einsum("ij,ij->i", Xu, Xv)
    ok = (uu >= _TINY_NORM2) & (vv >= _TINY_NORM2)
    out = np.zeros(len(src))
    out[ok] = np.minimum(1.0, uv[ok] ** 2 / (uu[ok] * vv[ok]))
    return out

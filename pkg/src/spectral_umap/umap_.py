"""A self-contained UMAP: fuzzy simplicial set plus negative-sampling SGD.

Kernel forms and optimisation constants follow the reference UMAP
construction: per-point ``rho``/``sigma`` calibration against ``log2(k)``,
probabilistic t-conorm symmetrisation, the ``1 / (1 + a d^{2b})``
low-dimensional kernel, gradient clipping at 4 and ``eps = 1e-3`` in the
repulsive denominator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import curve_fit

from ._errors import ParameterError
from .dataset import DenseDataset
from .knn_graph import nearest_neighbors

SIGMA_LO = 1e-12
SIGMA_HI = 1e6
BISECTION_STEPS = 64
GRAD_CLIP = 4.0
REPULSION_EPS = 1e-3
INIT_SCALE = 10.0
_DENSE_INIT_LIMIT = 500


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 15
    n_components: int = 2
    min_dist: float = 0.1
    spread: float = 1.0
    n_epochs: Optional[int] = None
    learning_rate: float = 1.0
    negative_sample_rate: int = 5
    a: Optional[float] = None
    b: Optional[float] = None
    seed: int = 0
    init: str = "spectral"
    metric: str = "euclidean"
    n_threads: int = 1

    def validate(self):
        if self.n_neighbors < 2:
            raise ParameterError(f"n_neighbors must be >= 2, got {self.n_neighbors}")
        if self.n_components < 1:
            raise ParameterError(f"n_components must be >= 1, got {self.n_components}")
        if not 0 < self.min_dist < self.spread:
            raise ParameterError("need 0 < min_dist < spread")
        if self.n_epochs is not None and self.n_epochs < 1:
            raise ParameterError(f"n_epochs must be >= 1, got {self.n_epochs}")
        if self.negative_sample_rate < 0:
            raise ParameterError("negative_sample_rate must be >= 0")
        if self.init not in ("spectral", "random"):
            raise ParameterError(f"init must be 'spectral' or 'random', got {self.init!r}")
        if self.n_threads < 1:
            raise ParameterError("n_threads must be >= 1")
        for name in ("a", "b"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParameterError(f"{name} must be positive")
        return self

    def epochs_for(self, n):
        if self.n_epochs is not None:
            return self.n_epochs
        return 500 if n < 10_000 else 200


# ---------------------------------------------------------------------------
# graph construction phase


@numba.njit(cache=True)
def _calibrate(dists):
    k = dists.shape[0]
    rho = dists[0]
    target = math.log2(k)

    def excess(sigma):
        total = 0.0
        for i in range(k):
            gap = dists[i] - rho
            if gap > 0.0:
                total += math.exp(-gap / sigma)
            else:
                total += 1.0
        return total - target

    lo = SIGMA_LO
    hi = SIGMA_HI
    if excess(lo) >= 0.0:
        return rho, lo
    if excess(hi) <= 0.0:
        return rho, hi
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return rho, 0.5 * (lo + hi)


@numba.njit(cache=True)
def _calibrate_rows(dists):
    n = dists.shape[0]
    rhos = np.empty(n)
    sigmas = np.empty(n)
    for i in range(n):
        rhos[i], sigmas[i] = _calibrate(dists[i])
    return rhos, sigmas


def smooth_knn_calibration(dists):
    """Local connectivity ``rho`` and bandwidth ``sigma`` for one point.

    ``rho`` is the nearest-neighbour distance; ``sigma`` is found by
    bisection on ``[1e-12, 1e6]`` so that ``sum_i exp(-max(0, d_i - rho) /
    sigma) == log2(k)``. When no root exists the nearest bracket end is
    returned.
    """
    dists = np.asarray(dists, dtype=np.float64)
    if dists.ndim != 1 or dists.shape[0] < 2:
        raise ParameterError("need at least two neighbour distances")
    if np.any(np.diff(dists) < 0):
        raise ParameterError("neighbour distances must be sorted ascending")
    if dists[0] < 0:
        raise ParameterError("distances must be non-negative")
    rho, sigma = _calibrate(dists)
    return float(rho), float(sigma)


def membership_strengths(dists, rhos, sigmas):
    return np.exp(-np.maximum(dists - rhos[:, None], 0.0) / sigmas[:, None])


def fuzzy_union(directed: sp.spmatrix) -> sp.csr_matrix:
    """Probabilistic t-conorm ``A + A^T - A * A^T``."""
    A = sp.csr_matrix(directed)
    At = A.T.tocsr()
    U = (A + At - A.multiply(At)).tocsr()
    U.eliminate_zeros()
    U.sort_indices()
    return U


def fuzzy_simplicial_set(
    data: DenseDataset, n_neighbors: int = 15, metric: str = "euclidean", method: str = "auto"
) -> sp.csr_matrix:
    """Symmetric membership graph as an ``N x N`` CSR matrix."""
    X = data.values if isinstance(data, DenseDataset) else np.asarray(data, dtype=np.float64)
    n = X.shape[0]
    indices, dists = nearest_neighbors(X, n_neighbors, metric, method)
    rhos, sigmas = _calibrate_rows(dists)
    mu = membership_strengths(dists, rhos, sigmas)
    rows = np.repeat(np.arange(n), n_neighbors)
    directed = sp.csr_matrix((mu.ravel(), (rows, indices.ravel())), shape=(n, n))
    return fuzzy_union(directed)


# ---------------------------------------------------------------------------
# low-dimensional kernel


def _curve(x, a, b):
    return 1.0 / (1.0 + a * x ** (2 * b))


def fit_ab(min_dist: float = 0.1, spread: float = 1.0):
    """Least-squares ``(a, b)`` so ``1 / (1 + a x^{2b})`` tracks the offset
    exponential defined by ``min_dist`` and ``spread``."""
    if not 0 < min_dist < spread:
        raise ParameterError("need 0 < min_dist < spread")
    x = np.linspace(0.0, 3.0 * spread, 300)
    y = np.where(x <= min_dist, 1.0, np.exp(-(x - min_dist) / spread))
    (a, b), _ = curve_fit(_curve, x, y, p0=(1.0, 1.0))
    return float(a), float(b)


@numba.njit(cache=True)
def attractive_coefficient(d2, a, b):
    if d2 <= 0.0:
        return 0.0
    return -2.0 * a * b * d2 ** (b - 1.0) / (a * d2**b + 1.0)


@numba.njit(cache=True)
def repulsive_coefficient(d2, a, b, eps):
    if d2 <= 0.0:
        return 0.0
    return 2.0 * b / ((eps + d2) * (a * d2**b + 1.0))


def attractive_gradient(yi, yj, a, b):
    """Gradient of ``log psi(|yi - yj|)`` with respect to ``yi`` (unclipped)."""
    diff = np.asarray(yi, dtype=np.float64) - np.asarray(yj, dtype=np.float64)
    return attractive_coefficient(float(diff @ diff), a, b) * diff


def repulsive_gradient(yi, yk, a, b, eps=REPULSION_EPS):
    """Gradient of ``log(1 - psi(|yi - yk|))`` with respect to ``yi``, with
    ``eps`` regularising the denominator (unclipped)."""
    diff = np.asarray(yi, dtype=np.float64) - np.asarray(yk, dtype=np.float64)
    return repulsive_coefficient(float(diff @ diff), a, b, eps) * diff


# ---------------------------------------------------------------------------
# embedding optimisation phase


def _random_init(n, m, seed):
    return np.random.default_rng(seed).uniform(-INIT_SCALE, INIT_SCALE, size=(n, m))


def _spectral_coords(graph, m, seed):
    n = graph.shape[0]
    deg = np.asarray(graph.sum(axis=1)).ravel()
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    D = sp.diags(inv_sqrt)
    Nrm = (D @ graph @ D).tocsr()
    trivial = np.sqrt(deg)
    trivial /= np.linalg.norm(trivial)
    # eigenvalue 1 of the normalised adjacency moves to -1; the top m remaining
    # eigenvectors are the bottom nontrivial ones of the normalised Laplacian
    if n <= _DENSE_INIT_LIMIT:
        M = Nrm.toarray() - 2.0 * np.outer(trivial, trivial)
        _, vecs = scipy.linalg.eigh(M, subset_by_index=[n - m, n - 1])
        return vecs[:, ::-1]
    op = spla.LinearOperator(
        (n, n),
        matvec=lambda v: Nrm @ v - 2.0 * trivial * (trivial @ v),
        dtype=np.float64,
    )
    v0 = np.random.default_rng(seed).uniform(-1.0, 1.0, n)
    vals, vecs = spla.eigsh(op, k=m, which="LA", v0=v0, tol=1e-4, maxiter=5 * n)
    return vecs[:, np.argsort(vals)[::-1]]


def initialize_embedding(fuzzy, m: int = 2, init: str = "spectral", seed: int = 0):
    """Starting coordinates, ``N x m``.

    ``"random"`` draws uniform on ``[-10, 10]``. ``"spectral"`` uses the
    bottom nontrivial eigenvectors of the fuzzy graph's normalised Laplacian
    scaled to ``max |coord| == 10``, and falls back to random coordinates if
    the eigensolve fails or the graph is too small.
    """
    n = fuzzy.shape[0]
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if init == "random" or n <= m + 1:
        return _random_init(n, m, seed)
    if init != "spectral":
        raise ParameterError(f"unknown init {init!r}")
    try:
        coords = _spectral_coords(sp.csr_matrix(fuzzy, dtype=np.float64), m, seed)
    except (spla.ArpackError, spla.ArpackNoConvergence, np.linalg.LinAlgError, ValueError):
        return _random_init(n, m, seed)
    peak = np.abs(coords).max()
    if not np.isfinite(peak) or peak == 0:
        return _random_init(n, m, seed)
    return np.ascontiguousarray(coords * (INIT_SCALE / peak))


def epochs_per_sample(weights):
    """Sampling period in epochs, ``ceil(max_w / w)``, for each edge."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        return np.zeros(0, dtype=np.int64)
    ratio = weights.max() / weights
    return np.ceil(ratio * (1.0 - 1e-12)).astype(np.int64)


@numba.njit(cache=True)
def _mix(z):
    # splitmix64 finaliser
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _clip(v):
    if v > GRAD_CLIP:
        return GRAD_CLIP
    if v < -GRAD_CLIP:
        return -GRAD_CLIP
    return v


@numba.njit(cache=True)
def _process_edge(Y, e, i, j, epoch, n_edges, a, b, alpha, n_neg, seed):
    n, dim = Y.shape
    d2 = 0.0
    for c in range(dim):
        diff = Y[i, c] - Y[j, c]
        d2 += diff * diff
    coeff = attractive_coefficient(d2, a, b)
    for c in range(dim):
        g = _clip(coeff * (Y[i, c] - Y[j, c]))
        Y[i, c] += g * alpha
        Y[j, c] -= g * alpha
    state = _mix(np.uint64(seed) ^ _mix(np.uint64(epoch) * np.uint64(n_edges) + np.uint64(e)))
    for _ in range(n_neg):
        state = _mix(state)
        k = np.int64(state % np.uint64(n))
        if k == i:
            continue
        d2 = 0.0
        for c in range(dim):
            diff = Y[i, c] - Y[k, c]
            d2 += diff * diff
        coeff = repulsive_coefficient(d2, a, b, REPULSION_EPS)
        for c in range(dim):
            if coeff > 0.0:
                g = _clip(coeff * (Y[i, c] - Y[k, c]))
            else:
                g = GRAD_CLIP
            Y[i, c] += g * alpha


@numba.njit(cache=True)
def _sgd_serial(Y, heads, tails, period, n_epochs, a, b, lr, n_neg, seed):
    n_edges = heads.shape[0]
    for epoch in range(1, n_epochs + 1):
        alpha = lr * (1.0 - (epoch - 1) / n_epochs)
        for e in range(n_edges):
            if epoch % period[e] == 0:
                _process_edge(
                    Y, e, heads[e], tails[e], epoch, n_edges, a, b, alpha, n_neg, seed
                )


@numba.njit(cache=True, parallel=True)
def _sgd_parallel(Y, heads, tails, period, n_epochs, a, b, lr, n_neg, seed):
    n_edges = heads.shape[0]
    for epoch in range(1, n_epochs + 1):
        alpha = lr * (1.0 - (epoch - 1) / n_epochs)
        for e in numba.prange(n_edges):
            if epoch % period[e] == 0:
                _process_edge(
                    Y, e, heads[e], tails[e], epoch, n_edges, a, b, alpha, n_neg, seed
                )


def optimize_embedding(init, fuzzy, params: UmapParams):
    """Run edge-sampled SGD from ``init`` on a copy and return it.

    Edge ``(i, j, mu)`` is visited every ``ceil(max_mu / mu)`` epochs. Each
    visit pulls ``i`` and ``j`` together and pushes ``i`` away from
    ``negative_sample_rate`` uniformly drawn vertices. The step size decays
    linearly to zero. With ``n_threads == 1`` the result is a pure function
    of the inputs and ``params.seed``; more threads apply updates
    asynchronously without locking.
    """
    Y = np.array(init, dtype=np.float64, copy=True, order="C")
    graph = sp.coo_matrix(fuzzy)
    if graph.nnz == 0:
        return Y
    n_epochs = params.epochs_for(Y.shape[0])
    a, b = params.a, params.b
    if a is None or b is None:
        a, b = fit_ab(params.min_dist, params.spread)
    order = np.lexsort((graph.col, graph.row))
    heads = graph.row[order].astype(np.int64)
    tails = graph.col[order].astype(np.int64)
    period = epochs_per_sample(graph.data[order])
    keep = period <= n_epochs
    heads, tails, period = heads[keep], tails[keep], period[keep]
    args = (
        Y, heads, tails, period, n_epochs, float(a), float(b),
        float(params.learning_rate), int(params.negative_sample_rate),
        int(params.seed) & 0xFFFFFFFFFFFFFFFF,
    )
    if params.n_threads > 1:
        previous = numba.get_num_threads()
        numba.set_num_threads(min(params.n_threads, numba.config.NUMBA_NUM_THREADS))
        try:
            _sgd_parallel(*args)
        finally:
            numba.set_num_threads(previous)
    else:
        _sgd_serial(*args)
    return Y


def umap_embed(data: DenseDataset, params: Optional[UmapParams] = None, **overrides):
    """Fuzzy graph, kernel fit, initialisation and SGD in one call.

    Returns the ``N x n_components`` embedding.
    """
    params = replace(params or UmapParams(), **overrides).validate()
    n = data.n_samples
    if params.n_neighbors >= n:
        raise ParameterError(f"n_neighbors={params.n_neighbors} must be < N={n}")
    graph = fuzzy_simplicial_set(data, params.n_neighbors, params.metric)
    if params.a is None or params.b is None:
        a, b = fit_ab(params.min_dist, params.spread)
        params = replace(params, a=a, b=b)
    init = initialize_embedding(graph, params.n_components, params.init, params.seed)
    return optimize_embedding(init, graph, params)

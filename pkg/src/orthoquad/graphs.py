"""Weighted graphs: k-NN construction with Gaussian weights, Laplacians, conductance."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .exceptions import ConductanceUndefinedError, DuplicatePointsError
from .linalg import SparseSymOperator

__all__ = ["WeightedGraph", "knn_gaussian_graph", "laplacian", "conductance", "component_count"]


@dataclass
class WeightedGraph:
    """Symmetric nonnegative weight matrix with a zero diagonal."""

    weights: sp.csr_matrix
    degrees: np.ndarray = field(default=None)

    def __post_init__(self):
        w = sp.csr_matrix(self.weights)
        w.setdiag(0.0)
        w.eliminate_zeros()
        gap = abs(w - w.T)
        if gap.nnz and gap.max() > 1e-12 * max(1.0, w.max() if w.nnz else 0.0):
            raise ValueError("weight matrix must be symmetric")
        if w.nnz and w.data.min() < 0:
            raise ValueError("weights must be nonnegative")
        self.weights = w
        self.degrees = np.asarray(w.sum(axis=1)).ravel()

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def total_volume(self):
        return float(self.degrees.sum())


def knn_gaussian_graph(points, k):
    """k-nearest-neighbor graph with locally scaled Gaussian weights.

    Each directed weight is exp(-4 ||x_i - x_j||^2 / d_k(x_i)^2) with d_k the
    distance from x_i to its k-th nearest neighbor. Edges live on the union
    of the k-NN relations and the two directed weights of each pair are
    averaged, so the result is symmetric with a zero diagonal. Duplicate
    points (within 1e-12) make the local scale collapse and raise
    DuplicatePointsError.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array (one point per row)")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k >= n:
        raise ValueError(f"k must be smaller than the number of points ({n})")

    tree = cKDTree(points)
    dist, idx = tree.query(points, k=k + 1)
    # column 0 is the point itself; a vanishing k-th distance means duplicates
    dk = dist[:, k]
    if np.any(dist[:, 1] < 1e-12):
        raise DuplicatePointsError("duplicate points within 1e-12 detected")
    rows = np.repeat(np.arange(n), k)
    cols = idx[:, 1:].ravel()

    support = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
    support = support + support.T  # union of both k-NN relations
    support = sp.triu(support, k=1).tocoo()
    i, j = support.row, support.col
    d2 = np.sum((points[i] - points[j]) ** 2, axis=1)
    w_ij = np.exp(-4.0 * d2 / dk[i] ** 2)
    w_ji = np.exp(-4.0 * d2 / dk[j] ** 2)
    vals = 0.5 * (w_ij + w_ji)
    upper = sp.coo_matrix((vals, (i, j)), shape=(n, n))
    return WeightedGraph(weights=(upper + upper.T).tocsr())


def laplacian(graph):
    """Combinatorial Laplacian diag(degrees) - W as a symmetric operator."""
    lap = sp.diags(graph.degrees) - graph.weights
    return SparseSymOperator(lap.tocsr(), check=False)


def conductance(graph, subset):
    """cut(S) / min(vol(S), vol(S^c)).

    ``subset`` is an iterable of vertex indices; it must be nonempty and
    proper. A zero cut yields 0 even when the smaller volume vanishes.
    """
    subset = np.asarray(sorted(set(int(v) for v in subset)), dtype=int)
    n = graph.n
    if subset.size == 0 or subset.size >= n:
        raise ConductanceUndefinedError("subset must be nonempty and proper")
    mask = np.zeros(n, dtype=bool)
    mask[subset] = True
    comp = np.where(~mask)[0]
    cut = float(graph.weights[subset][:, comp].sum())
    vol_s = float(graph.degrees[subset].sum())
    vol_c = graph.total_volume - vol_s
    denom = min(vol_s, vol_c)
    if denom <= 0.0:
        return 0.0 if cut == 0.0 else float("inf")
    return cut / denom


def component_count(graph):
    """Number of connected components."""
    count, _ = connected_components(graph.weights, directed=False)
    return int(count)

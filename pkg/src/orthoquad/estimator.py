"""Scikit-learn style estimator wrapping the graph classification pipeline."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .graphs import knn_gaussian_graph
from .semisup import assemble_graph, classify
from .solver import SsmOptions

__all__ = ["SsmGraphClassifier"]


class SsmGraphClassifier(BaseEstimator, ClassifierMixin):
    """Transductive semi-supervised classifier on a k-NN graph.

    Follows the scikit-learn semi-supervised convention: ``fit(X, y)`` takes
    the full point set with ``y = -1`` marking unlabeled samples, builds the
    locally scaled Gaussian k-NN graph, reduces label recovery to a quadratic
    program over a Stiefel manifold, and solves it with the sequential
    subspace method (or a gradient baseline). Prediction is transductive:
    ``predict`` returns labels for the fitted points.

    Parameters
    ----------
    n_neighbors : int
        k for the nearest-neighbor graph.
    cardinality : array-like or None
        Prescribed class sizes; balanced by default.
    solver : str
        "ssm", "rgd", or "pg".
    tol_grad : float
        Gradient-norm stopping tolerance of the solver.
    max_outer : int
        Outer iteration cap.
    random_state : int
        Seed for the eigensolver start block.
    """

    def __init__(self, n_neighbors=10, cardinality=None, solver="ssm",
                 tol_grad=1e-8, max_outer=200, random_state=0):
        self.n_neighbors = n_neighbors
        self.cardinality = cardinality
        self.solver = solver
        self.tol_grad = tol_grad
        self.max_outer = max_outer
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional (one point per row)")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one entry per point")
        labeled_mask = y != -1
        if not labeled_mask.any():
            raise ValueError("at least one labeled point (y != -1) is required")
        self.classes_ = np.unique(y[labeled_mask])
        class_to_internal = {c: i + 1 for i, c in enumerate(self.classes_)}

        graph = knn_gaussian_graph(X, self.n_neighbors)
        labeled_idx = np.where(labeled_mask)[0]
        labeled_internal = np.array([class_to_internal[v] for v in y[labeled_idx]])
        cardinality = None if self.cardinality is None else np.asarray(self.cardinality, int)
        instance = assemble_graph(
            graph, labeled_idx, labeled_internal, len(self.classes_), cardinality
        )
        options = None
        if self.solver == "ssm":
            options = SsmOptions(tol_grad=self.tol_grad, max_outer=self.max_outer)
        result = classify(instance, options=options, solver=self.solver,
                          seed=self.random_state)

        self.graph_ = graph
        self.instance_ = instance
        self.result_ = result
        self.labels_ = self.classes_[result.labels - 1]
        self.embedding_ = result.x_u
        self.n_features_in_ = X.shape[1]
        self._fit_X = X
        return self

    def _check_fitted(self):
        if not hasattr(self, "labels_"):
            raise NotFittedError("this SsmGraphClassifier instance is not fitted yet")

    def predict(self, X=None):
        """Labels of the fitted points (the model is transductive)."""
        self._check_fitted()
        if X is not None:
            X = np.asarray(X, dtype=np.float64)
            if X.shape != self._fit_X.shape or not np.allclose(X, self._fit_X):
                raise ValueError(
                    "transductive model: predict expects the points passed to fit"
                )
        return self.labels_.copy()

    def score(self, X, y):
        """Accuracy over the labeled entries of y (y = -1 entries are skipped)."""
        self._check_fitted()
        y = np.asarray(y)
        pred = self.predict(X)
        mask = y != -1
        if not mask.any():
            raise ValueError("no labeled entries to score against")
        return float(np.mean(pred[mask] == y[mask]))

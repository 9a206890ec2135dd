"""Stiefel-manifold primitives: polar projection, tangent projection, retraction.

Points on St(n, r) are plain (n, r) ndarrays with orthonormal columns;
tangent vectors are (n, r) ndarrays V with X^T V skew-symmetric.
"""

import numpy as np
from scipy.linalg import expm

from .exceptions import RankDeficiencyError
from .linalg import thin_qr
from .validation import sym

__all__ = [
    "polar_project",
    "tangent_project",
    "retract",
    "random_point",
    "test_curve",
    "orthonormal_complement",
]


def polar_project(y, rank_tol=1e-12):
    """Nearest point of St(n, r) to a full-column-rank matrix.

    Computed as U V^T from the reduced SVD, which both maximizes <Q, Y>
    over the manifold and equals Y (Y^T Y)^{-1/2}; the SVD route stays
    stable for ill-conditioned Y. Raises RankDeficiencyError when the
    smallest singular value drops below ``rank_tol`` times the largest.
    """
    y = np.asarray(y, dtype=np.float64)
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficiencyError(
            f"input is numerically rank deficient (singular values {s.min():.3e} .. {s.max():.3e})"
        )
    return u @ vt


def tangent_project(x, u):
    """Orthogonal projection of U onto the tangent space at X: U - X sym(X^T U)."""
    return u - x @ sym(x.T @ u)


def retract(x, v, t=1.0):
    """Metric-projection retraction: the polar projection of X + t V.

    For tangent V the argument always has full rank (its singular values
    are at least 1), so the projection is well defined for any step size.
    """
    return polar_project(x + t * np.asarray(v, dtype=np.float64))


def random_point(n, r, seed=0):
    """Deterministic random Stiefel point: thin orthonormalization of a seeded Gaussian."""
    if n < r:
        raise ValueError(f"need n >= r, got n={n}, r={r}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, r))
    q = thin_qr(g)
    if q.shape[1] != r:
        # astronomically unlikely; widen with new draws
        q = thin_qr(np.column_stack([q, rng.standard_normal((n, r))]))[:, :r]
    return q


def orthonormal_complement(x):
    """An (n, n-r) orthonormal basis of the orthogonal complement of col(X)."""
    x = np.asarray(x, dtype=np.float64)
    n, r = x.shape
    q, _ = np.linalg.qr(x, mode="complete")
    comp = q[:, r:]
    # qr can flip orientation; re-orthogonalize against X for hygiene
    comp = comp - x @ (x.T @ comp)
    return thin_qr(comp)


def test_curve(x, x_perp, delta0, delta1, t):
    """Geodesic-style test curve rho(t) = [X, X_perp] expm(t * Omega) I_{n,r}.

    Omega stacks the skew block delta0 (r, r) and the coupling block
    delta1 ((n-r), r). rho(0) = X and rho'(0) = X delta0 + X_perp delta1.
    Intended as a verification helper for derivative checks at modest n;
    the matrix exponential is evaluated densely.
    """
    x = np.asarray(x, dtype=np.float64)
    x_perp = np.asarray(x_perp, dtype=np.float64)
    delta0 = np.asarray(delta0, dtype=np.float64)
    delta1 = np.asarray(delta1, dtype=np.float64)
    n, r = x.shape
    if np.abs(delta0 + delta0.T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(delta0).max(initial=0.0)):
        raise ValueError("delta0 must be skew-symmetric")
    frame = np.hstack([x, x_perp])
    if np.abs(frame.T @ frame - np.eye(n)).max() > 1e-8:
        raise ValueError("[X, X_perp] must be orthogonal")
    omega = np.zeros((n, n))
    omega[:r, :r] = delta0
    omega[r:, :r] = delta1
    omega[:r, r:] = -delta1.T
    return frame @ expm(t * omega)[:, :r]

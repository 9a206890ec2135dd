"""Input validation helpers shared by the numerical modules."""

import numpy as np

from .exceptions import SymmetryError


def as_dense(a, name="array", ndim=2):
    """Coerce to a float64 ndarray with the given ndim and finite entries."""
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def require_symmetric(m, name="matrix", tol=1e-12):
    """Return the symmetrized matrix; raise SymmetryError beyond relative tol."""
    m = as_dense(m, name)
    if m.shape[0] != m.shape[1]:
        raise SymmetryError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    gap = float(np.abs(m - m.T).max())
    if gap > tol * scale:
        raise SymmetryError(
            f"{name} is not symmetric: max|M - M^T| = {gap:.3e} > {tol:.1e} * {scale:.3e}"
        )
    return 0.5 * (m + m.T)


def require_spd(c, name="matrix", tol=1e-12):
    """Validate symmetric positive definiteness; return (C, eigenvalues, eigenvectors)."""
    c = require_symmetric(c, name)
    w, e = np.linalg.eigh(c)
    if w[0] <= tol * max(1.0, abs(w[-1])):
        raise ValueError(f"{name} must be positive definite; smallest eigenvalue {w[0]:.3e}")
    return c, w, e


def stiefel_defect(x):
    """Frobenius norm of X^T X - I."""
    x = np.asarray(x)
    r = x.shape[1]
    return float(np.linalg.norm(x.T @ x - np.eye(r)))


def require_stiefel(x, name="point", tol=1e-8):
    """Validate orthonormal columns within tol; returns the array."""
    x = as_dense(x, name)
    if x.shape[0] < x.shape[1]:
        raise ValueError(f"{name} must be tall (n >= r), got shape {x.shape}")
    defect = stiefel_defect(x)
    if defect > tol:
        raise ValueError(f"{name} is not on the Stiefel manifold: |X^T X - I| = {defect:.3e}")
    return x


def sym(m):
    """Symmetric part (M + M^T) / 2."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))

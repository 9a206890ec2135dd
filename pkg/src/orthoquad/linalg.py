"""Dense and sparse symmetric linear-algebra primitives.

Eigensolvers (dense oracle and sparse block-preconditioned iteration with
deflation), a block conjugate-gradient solver with curvature monitoring,
rank-revealing thin orthonormalization, and the nuclear norm.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lobpcg

from .exceptions import ConvergenceFailureError, IndefiniteOperatorError, SymmetryError

__all__ = [
    "EigPairs",
    "SparseSymOperator",
    "dense_sym_eig",
    "smallest_eigenpairs",
    "cg_solve",
    "thin_qr",
    "nuclear_norm",
]

# size below which sparse eigenproblems are dispatched to the dense oracle
_DENSE_CUTOFF = 64


@dataclass(frozen=True)
class EigPairs:
    """Eigenvalues in ascending order and the matching orthonormal eigenvectors."""

    values: np.ndarray  # (k,)
    vectors: np.ndarray  # (n, k)

    def __iter__(self):
        return iter((self.values, self.vectors))


class SparseSymOperator:
    """Symmetric linear operator: a sparse matrix plus optional low-rank terms.

    The operator acts as ``S + sum_j U_j M_j U_j^T`` where ``S`` is sparse
    symmetric and each correction has a thin ``U_j`` (n, k_j) with a small
    symmetric ``M_j`` (k_j, k_j). Low-rank terms keep spectral shifts of a
    few directions cheap at large n. Instances are immutable; applying the
    operator never mutates shared state.
    """

    def __init__(self, matrix, corrections=(), check=True, tol=1e-12):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"operator must be square, got {matrix.shape}")
        if check:
            gap = abs(matrix - matrix.T)
            scale = max(1.0, abs(matrix).max() if matrix.nnz else 0.0)
            if gap.nnz and gap.max() > tol * scale:
                raise SymmetryError(
                    f"sparse part is not symmetric: max|S - S^T| = {gap.max():.3e}"
                )
            if not np.all(np.isfinite(matrix.data)):
                raise ValueError("sparse part contains non-finite values")
        self.matrix = matrix
        terms = []
        for u, m in corrections:
            u = np.asarray(u, dtype=np.float64)
            m = np.asarray(m, dtype=np.float64)
            if u.ndim == 1:
                u = u[:, None]
            if m.ndim == 0:
                m = m.reshape(1, 1)
            elif m.ndim == 1:
                m = np.diag(m)
            if check:
                if u.shape[0] != matrix.shape[0] or m.shape != (u.shape[1], u.shape[1]):
                    raise ValueError("correction shapes are inconsistent")
                if np.abs(m - m.T).max(initial=0.0) > tol * max(1.0, np.abs(m).max(initial=0.0)):
                    raise SymmetryError("correction block is not symmetric")
            terms.append((u, 0.5 * (m + m.T)))
        self.corrections = tuple(terms)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        """Apply to a vector (n,) or block (n, r)."""
        y = self.matrix @ x
        for u, m in self.corrections:
            y = y + u @ (m @ (u.T @ x))
        return y

    __call__ = apply
    __matmul__ = apply

    def with_correction(self, u, m):
        """New operator with one more low-rank symmetric term appended."""
        return SparseSymOperator(
            self.matrix, self.corrections + ((u, m),), check=False
        )

    def diagonal(self):
        d = self.matrix.diagonal().copy()
        for u, m in self.corrections:
            d += np.einsum("ik,kl,il->i", u, m, u)
        return d

    def to_dense(self):
        a = self.matrix.toarray()
        for u, m in self.corrections:
            a = a + u @ m @ u.T
        return a

    def to_linear_operator(self):
        return LinearOperator(self.shape, matvec=self.apply, matmat=self.apply, dtype=np.float64)

    def norm_estimate(self, iters=20, seed=0):
        """Power-iteration estimate of the spectral norm."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.n)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iters):
            w = self.apply(v)
            est = float(np.linalg.norm(w))
            if est == 0.0:
                return 0.0
            v = w / est
        return est


def dense_sym_eig(m, tol=1e-12):
    """Full spectrum of a dense symmetric matrix, ascending.

    Serves as the small-instance oracle. Raises SymmetryError when the
    input is asymmetric beyond ``tol`` relative to its magnitude.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SymmetryError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if float(np.abs(m - m.T).max(initial=0.0)) > tol * scale:
        raise SymmetryError("matrix is not symmetric within tolerance")
    values, vectors = np.linalg.eigh(0.5 * (m + m.T))
    return EigPairs(values=values, vectors=vectors)


def _dense_deflated_eig(a_dense, k, deflate):
    """Dense path for smallest eigenpairs restricted to the complement of `deflate`."""
    n = a_dense.shape[0]
    if deflate is None or deflate.shape[1] == 0:
        pairs = dense_sym_eig(a_dense)
        return EigPairs(pairs.values[:k], pairs.vectors[:, :k])
    w = deflate.shape[1]
    # orthonormal basis of the complement via full QR of the deflation basis
    q, _ = np.linalg.qr(deflate, mode="complete")
    comp = q[:, w:]
    reduced = comp.T @ a_dense @ comp
    pairs = dense_sym_eig(reduced)
    vectors = comp @ pairs.vectors[:, :k]
    return EigPairs(pairs.values[:k], vectors)


def smallest_eigenpairs(a, k, deflate=None, tol=1e-9, max_iter=2000, seed=0):
    """k smallest eigenpairs of a symmetric operator, optionally deflated.

    Parameters
    ----------
    a : SparseSymOperator, scipy sparse matrix, or dense ndarray
    k : number of requested eigenpairs (k < n)
    deflate : optional (n, w) orthonormal basis; the solve is restricted to
        its orthogonal complement and returned vectors satisfy ``W^T v = 0``.
    tol : residual tolerance, relative to the operator norm scale
    seed : seed for the random starting block (deterministic per seed)

    Uses a block preconditioned conjugate-gradient eigensolver with a Jacobi
    preconditioner (inverse diagonal floored at 1e-12; disabled when the
    diagonal has non-positive entries). Small problems fall back to the
    dense oracle. Raises ConvergenceFailureError with the best residual if
    the iteration cap is hit before residuals meet tolerance.
    """
    if not isinstance(a, SparseSymOperator):
        if sp.issparse(a):
            a = SparseSymOperator(a)
        else:
            a = SparseSymOperator(sp.csr_matrix(np.asarray(a, dtype=np.float64)))
    n = a.n
    if k > n:
        raise ValueError(f"need k <= n, got k={k}, n={n}")
    if deflate is not None:
        deflate = np.asarray(deflate, dtype=np.float64)
        if deflate.ndim == 1:
            deflate = deflate[:, None]
        gram = deflate.T @ deflate
        if np.abs(gram - np.eye(deflate.shape[1])).max() > 1e-8:
            raise ValueError("deflation basis columns must be orthonormal")

    ndefl = 0 if deflate is None else deflate.shape[1]
    if n <= max(_DENSE_CUTOFF, 5 * (k + ndefl) + 1):
        return _dense_deflated_eig(a.to_dense(), k, deflate)

    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((n, k))
    if deflate is not None:
        x0 -= deflate @ (deflate.T @ x0)
    x0, _ = np.linalg.qr(x0)

    diag = a.diagonal()
    precond = None
    if np.all(diag > 0):
        precond = sp.diags(1.0 / np.maximum(diag, 1e-12)).tocsr()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values, vectors = lobpcg(
            a.to_linear_operator(),
            x0,
            M=precond,
            Y=deflate,
            tol=tol,
            maxiter=max_iter,
            largest=False,
        )
    order = np.argsort(values)
    values = np.asarray(values)[order]
    vectors = np.asarray(vectors)[:, order]
    # re-orthonormalize and check residuals against the operator scale
    vectors, _ = np.linalg.qr(vectors)
    scale = max(1.0, float(np.abs(values).max()), a.norm_estimate(seed=seed))
    resid = np.linalg.norm(a.apply(vectors) - vectors * values, axis=0)
    if np.any(resid > 10.0 * tol * scale):
        raise ConvergenceFailureError(
            f"eigensolver did not reach tol={tol:.1e}; best residual {resid.max():.3e}",
            best=EigPairs(values, vectors),
            residual=float(resid.max()),
            iterations=max_iter,
        )
    return EigPairs(values=values, vectors=vectors)


def cg_solve(
    op,
    rhs,
    tol=1e-10,
    max_iter=None,
    x0=None,
    restart_every=50,
    return_info=False,
):
    """Conjugate gradients for ``op(X) = rhs`` with a PSD operator on blocks.

    ``op`` is a callable mapping an array shaped like ``rhs`` to another;
    inner products are Frobenius. Every ``restart_every`` iterations the true
    residual is recomputed; if it grew past the best checkpoint the recursion
    restarts from the best iterate, so checkpoint residuals are nonincreasing.

    Raises IndefiniteOperatorError on negative curvature and
    ConvergenceFailureError (carrying the best iterate) at the iteration cap.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    size = rhs.size
    if max_iter is None:
        max_iter = max(10 * size, 100)
    stop = tol * max(1.0, float(np.linalg.norm(rhs)))

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=np.float64)
    r = rhs - op(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rr = float(np.sum(r * r))
    best_x = x.copy()
    best_res = float(np.sqrt(rr))
    iterations = 0
    curvature_floor = -1e-12
    checkpoints = [best_res]

    def _finish(converged):
        info = {
            "iterations": iterations,
            "residual": best_res,
            "converged": converged,
            "checkpoint_residuals": checkpoints + [best_res],
        }
        return (best_x, info) if return_info else best_x

    if best_res <= stop:
        return _finish(True)

    while iterations < max_iter:
        q = op(p)
        pq = float(np.sum(p * q))
        pp = float(np.sum(p * p))
        if pq < curvature_floor * max(pp, 1.0):
            raise IndefiniteOperatorError(
                f"negative curvature {pq:.3e} detected at iteration {iterations}",
                partial=best_x,
                curvature=pq,
            )
        if pq <= 0.0:
            # numerically semidefinite direction; no further progress possible
            break
        alpha = rr / pq
        x = x + alpha * p
        r = r - alpha * q
        iterations += 1

        if iterations % restart_every == 0:
            # residual replacement: recompute the true residual to arrest
            # recursion drift; the kept (best) iterate improves monotonically
            true_r = rhs - op(x)
            res = float(np.linalg.norm(true_r))
            if res < best_res:
                best_x, best_res = x.copy(), res
            checkpoints.append(best_res)
            if best_res <= stop:
                return _finish(True)
            r = true_r
            if res > 2.0 * best_res:
                p = r.copy()  # direction restart after serious degradation
            rr = float(np.sum(r * r))
            continue

        rr_new = float(np.sum(r * r))
        res = float(np.sqrt(rr_new))
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= stop:
            return _finish(True)
        p = r + (rr_new / rr) * p
        rr = rr_new

    if best_res <= stop:
        return _finish(True)
    raise ConvergenceFailureError(
        f"cg did not reach tol within {max_iter} iterations; residual {best_res:.3e}",
        best=best_x,
        residual=best_res,
        iterations=iterations,
    )


def thin_qr(m, drop_tol=1e-10):
    """Orthonormal basis of the column span, pruning dependent columns.

    Modified Gram-Schmidt with one reorthogonalization pass, left to right,
    so leading orthonormal blocks pass through with their span intact.
    Columns whose orthogonalized norm falls below ``drop_tol`` times the
    largest input column norm are dropped; the output width is the
    numerical rank. Rank zero yields an (n, 0) array.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-d array")
    n, l = m.shape
    if l == 0:
        return np.zeros((n, 0))
    col_norms = np.linalg.norm(m, axis=0)
    scale = float(col_norms.max(initial=0.0))
    if scale == 0.0:
        return np.zeros((n, 0))
    cols = []
    for j in range(l):
        v = m[:, j].copy()
        for _ in range(2):
            for q in cols:
                v -= q * (q @ v)
        nv = np.linalg.norm(v)
        if nv > drop_tol * scale:
            cols.append(v / nv)
    if not cols:
        return np.zeros((n, 0))
    return np.column_stack(cols)


def nuclear_norm(m):
    """Sum of singular values."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.linalg.svd(m, compute_uv=False).sum())

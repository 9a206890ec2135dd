"""The quadratic objective over St(n, r), its derivatives, and quality certificates.

The problem is  min  f(X) = 1/2 tr(X^T A X C) - tr(B^T X)  over X^T X = I_r,
with A symmetric (n, n), C symmetric positive definite (r, r), B (n, r).
A critical point carries a symmetric multiplier L with A X C - B = X L; the
eigenvalues gamma_i of C^{-1/2} L C^{-1/2} measure solution quality: all of
them below the r-th smallest eigenvalue of A marks a "qualified" point, all
below the smallest marks a certified global minimizer.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    DegenerateInstanceError,
    NormBoundError,
    NotCriticalError,
    NotDegenerateError,
)
from .linalg import SparseSymOperator, dense_sym_eig, nuclear_norm, smallest_eigenpairs
from .stiefel import orthonormal_complement, polar_project, tangent_project
from .validation import require_spd, sym

__all__ = [
    "GroundSpectrum",
    "QuadraticProblem",
    "SurrogateModel",
    "QualifiedCertificate",
    "ground_spectrum",
    "problem_from_arrays",
    "objective",
    "euclidean_grad",
    "riemannian_grad",
    "multiplier",
    "hessian_apply",
    "lift",
    "surrogate",
    "sigma_nondegeneracy",
    "qualified_certificate",
    "safeguard",
    "safeguard_sigma_floor",
    "lower_bound",
    "degenerate_solution",
    "second_order_margin",
]


@dataclass(frozen=True)
class GroundSpectrum:
    """The r smallest eigenvalues of the system matrix, the next one, and their eigenvectors."""

    d: np.ndarray  # (r,) ascending
    d_next: float
    vectors: np.ndarray  # (n, r) orthonormal

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float64)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=np.float64))
        if np.any(np.diff(d) < -1e-12 * max(1.0, np.abs(d).max(initial=0.0))):
            raise ValueError("ground eigenvalues must be ascending")

    @property
    def r(self):
        return self.d.shape[0]

    @property
    def d_r(self):
        return float(self.d[-1])

    @property
    def d_1(self):
        return float(self.d[0])

    @property
    def gap(self):
        return float(self.d_next) - self.d_r


@dataclass(frozen=True)
class QuadraticProblem:
    """Problem data (A, B, C) together with the ground spectrum of A.

    ``deflate`` optionally holds an orthonormal basis of directions excluded
    from the search (the graph pipeline removes the uninformative all-ones
    null vector this way); the ground spectrum is then relative to the
    complement and solvers keep every internal direction orthogonal to it.
    """

    a: SparseSymOperator
    b: np.ndarray  # (n, r)
    c: np.ndarray  # (r, r) symmetric positive definite
    ground: GroundSpectrum
    deflate: np.ndarray = None  # (n, w) orthonormal, orthogonal to the ground space
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        c, c_eigvals, c_eigvecs = require_spd(self.c, "C")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "_c_eig", (c_eigvals, c_eigvecs))
        if self.deflate is not None:
            object.__setattr__(self, "deflate", np.asarray(self.deflate, dtype=np.float64))
        if self.b.shape != (self.a.n, self.ground.r):
            raise ValueError(
                f"B must be ({self.a.n}, {self.ground.r}), got {self.b.shape}"
            )
        if c.shape[0] != self.ground.r:
            raise ValueError("C size must match the number of ground eigenvalues")
        if self.validate:
            vg = self.ground.vectors
            scale = max(1.0, float(np.abs(self.ground.d).max()))
            resid = np.linalg.norm(self.a.apply(vg) - vg * self.ground.d)
            if resid > 1e-6 * scale:
                raise ValueError(
                    f"ground vectors are not eigenvectors of A (residual {resid:.3e})"
                )
            if self.ground.gap < -1e-10 * scale:
                raise ValueError(
                    f"ground spectrum is not the smallest block (d_next - d_r = {self.ground.gap:.3e})"
                )
            if self.deflate is not None:
                w = self.deflate
                if np.abs(w.T @ w - np.eye(w.shape[1])).max() > 1e-8:
                    raise ValueError("deflation basis must be orthonormal")
                if np.abs(w.T @ vg).max() > 1e-8:
                    raise ValueError("deflation basis must be orthogonal to the ground space")

    @property
    def n(self):
        return self.a.n

    @property
    def r(self):
        return self.ground.r

    def c_power(self, exponent):
        """C^exponent through the cached eigendecomposition of C."""
        w, e = self._c_eig
        return e @ np.diag(w**exponent) @ e.T


def ground_spectrum(a, r, deflate=None, tol=1e-10, seed=0):
    """Compute the ground spectrum (r smallest eigenpairs plus the next value) of A.

    When the deflated complement has exactly r dimensions there is no next
    eigenvalue; the gap is then vacuously infinite.
    """
    ndefl = 0 if deflate is None else np.atleast_2d(np.asarray(deflate).T).shape[0]
    available = a.n - ndefl if hasattr(a, "n") else np.asarray(a).shape[0] - ndefl
    if available < r:
        raise ValueError(f"need at least {r} directions outside the deflated space")
    if available == r:
        pairs = smallest_eigenpairs(a, r, deflate=deflate, tol=tol, seed=seed)
        return GroundSpectrum(d=pairs.values, d_next=np.inf, vectors=pairs.vectors)
    pairs = smallest_eigenpairs(a, r + 1, deflate=deflate, tol=tol, seed=seed)
    return GroundSpectrum(
        d=pairs.values[:r], d_next=float(pairs.values[r]), vectors=pairs.vectors[:, :r]
    )


def problem_from_arrays(a, b, c, deflate=None, tol=1e-10, seed=0):
    """Build a QuadraticProblem from raw matrices, computing the ground spectrum."""
    if not isinstance(a, SparseSymOperator):
        a = SparseSymOperator(a if sp.issparse(a) else sp.csr_matrix(np.asarray(a, dtype=np.float64)))
    b = np.asarray(b, dtype=np.float64)
    r = b.shape[1]
    ground = ground_spectrum(a, r, deflate=deflate, tol=tol, seed=seed)
    return QuadraticProblem(a=a, b=b, c=np.asarray(c, dtype=np.float64), ground=ground)


def objective(problem, x):
    """f(X) = 1/2 <X, A X C> - <B, X>."""
    ax = problem.a.apply(x)
    return 0.5 * float(np.sum(x * (ax @ problem.c))) - float(np.sum(problem.b * x))


def euclidean_grad(problem, x):
    """A X C - B."""
    return problem.a.apply(x) @ problem.c - problem.b


def multiplier(problem, x, grad=None):
    """Symmetric multiplier sym(X^T (A X C - B))."""
    if grad is None:
        grad = euclidean_grad(problem, x)
    return sym(x.T @ grad)


def riemannian_grad(problem, x):
    """Tangent projection of the Euclidean gradient; zero exactly at critical points."""
    g = euclidean_grad(problem, x)
    return g - x @ sym(x.T @ g)


def hessian_apply(problem, x, lam, v):
    """Riemannian Hessian action: Proj_X( A V C - V sym(lam) )."""
    av = problem.a.apply(v)
    return tangent_project(x, av @ problem.c - v @ sym(lam))


def lift(a, ground):
    """Raise the r smallest eigenvalues of A to the r-th one.

    Returns A plus the low-rank term V_g diag(d_r - d_i) V_g^T, stored as a
    correction so sparsity survives at large n. The lifted operator keeps A
    on the complement of the ground space and satisfies lifted(v_k) = d_r v_k.
    """
    shift = ground.d_r - ground.d
    return a.with_correction(ground.vectors, np.diag(shift))


@dataclass(frozen=True)
class SurrogateModel:
    """Majorizing quadratic model tangent to f at a base point.

    With D = lifted(A) - A >= 0 the model value is
    1/2 <X, A~ X C> - <X, B_k> + constant, where B_k = B + D X_k C matches
    gradients at the base point and the constant 1/2 <X_k, D X_k C> makes
    the model touch f there; elsewhere on the manifold it dominates f.
    """

    base: np.ndarray
    a_tilde: SparseSymOperator
    b_k: np.ndarray
    constant: float
    shift: np.ndarray  # (r,) nonnegative ground shifts d_r - d_i
    ground_vectors: np.ndarray

    def apply_d(self, x):
        """Apply D = A~ - A."""
        vg = self.ground_vectors
        return vg @ (self.shift[:, None] * (vg.T @ x))

    def value(self, x, c):
        ax = self.a_tilde.apply(x)
        return 0.5 * float(np.sum(x * (ax @ c))) + self.constant - float(np.sum(self.b_k * x))


def surrogate(problem, x_k, a_tilde=None):
    """Surrogate model of the objective at base point x_k."""
    ground = problem.ground
    if a_tilde is None:
        a_tilde = lift(problem.a, ground)
    shift = ground.d_r - ground.d
    vg = ground.vectors
    dxc = vg @ (shift[:, None] * (vg.T @ x_k)) @ problem.c
    b_k = problem.b + dxc
    constant = 0.5 * float(np.sum(x_k * dxc))
    return SurrogateModel(
        base=x_k,
        a_tilde=a_tilde,
        b_k=b_k,
        constant=constant,
        shift=shift,
        ground_vectors=vg,
    )


def sigma_nondegeneracy(ground, b, c):
    """Smallest singular value of V_g^T B C^{-1}; positive marks a non-degenerate instance."""
    m = np.linalg.solve(np.asarray(c, dtype=np.float64).T, (ground.vectors.T @ b).T).T
    return float(np.linalg.svd(m, compute_uv=False)[-1])


def safeguard_sigma_floor(sigma, d_r):
    """Replacement value for sigma when an instance is numerically degenerate."""
    if sigma > 0.0:
        return sigma
    return 1e-8 * max(1.0, abs(d_r))


def safeguard(lam, c, d_r, sigma):
    """Clamp multiplier eigenvalues at d_r - sigma in the C-weighted metric.

    Diagonalize C^{-1/2} lam C^{-1/2} = U diag(gamma) U^T and rebuild with
    gamma_i replaced by min(gamma_i, d_r - sigma). The output always
    satisfies S(lam) <= (d_r - sigma) C, which keeps downstream Newton
    systems positive semidefinite. Raises DegenerateInstanceError for
    sigma <= 0; callers substitute a small floor instead when they must
    proceed (see safeguard_sigma_floor).
    """
    if sigma <= 0.0:
        raise DegenerateInstanceError(
            f"safeguard requires sigma > 0, got {sigma:.3e}; instance is degenerate"
        )
    c, c_w, c_e = require_spd(c, "C")
    c_half = c_e @ np.diag(np.sqrt(c_w)) @ c_e.T
    c_inv_half = c_e @ np.diag(1.0 / np.sqrt(c_w)) @ c_e.T
    gamma_mat = sym(c_inv_half @ sym(lam) @ c_inv_half)
    gammas, u = np.linalg.eigh(gamma_mat)
    clipped = np.minimum(gammas, d_r - sigma)
    return sym(c_half @ (u * clipped) @ u.T @ c_half)


def _gamma_spectrum(lam, problem):
    c_inv_half = problem.c_power(-0.5)
    return np.linalg.eigvalsh(sym(c_inv_half @ sym(lam) @ c_inv_half))


@dataclass(frozen=True)
class QualifiedCertificate:
    """Checkable evidence attached to a candidate solution.

    gamma holds the ascending eigenvalues of C^{-1/2} lam C^{-1/2};
    ``qualified`` requires both a small first-order residual and
    gamma_max <= d_r, ``global_opt`` the stronger gamma_max <= d_1.
    ``safeguard_bound`` reports d_r - sigma, the margin qualified points
    must satisfy on non-degenerate instances. ``polar_global`` flags the
    closed-form identity-weight case (C = I, left singular vectors of B
    inside the ground space, X equal to the polar factor of B), which
    certifies global optimality even when gamma_max exceeds d_1.
    """

    lam: np.ndarray
    gamma: np.ndarray
    residual: float
    sigma: float
    qualified: bool
    global_opt: bool
    safeguard_bound: float
    polar_global: bool
    d_1: float
    d_r: float

    @property
    def gamma_max(self):
        return float(self.gamma[-1])

    def to_dict(self):
        return {
            "residual": self.residual,
            "gamma": [float(g) for g in self.gamma],
            "sigma": self.sigma,
            "qualified": bool(self.qualified),
            "global": bool(self.global_opt),
            "safeguard_bound": self.safeguard_bound,
            "polar_global": bool(self.polar_global),
        }


def qualified_certificate(problem, x, tol=1e-8, rtol=1e-10):
    """First-order residual, multiplier spectrum, and quality flags at X.

    ``tol`` is absolute on the residual; eigenvalue comparisons use
    ``rtol`` relative to the eigenvalue scale.
    """
    grad = euclidean_grad(problem, x)
    lam = sym(x.T @ grad)
    residual = float(np.linalg.norm(grad - x @ lam))
    gamma = _gamma_spectrum(lam, problem)
    ground = problem.ground
    sigma = sigma_nondegeneracy(ground, problem.b, problem.c)
    scale = max(1.0, float(np.abs(ground.d).max()))
    critical = residual <= tol
    qualified = critical and gamma[-1] <= ground.d_r + rtol * scale
    global_opt = critical and gamma[-1] <= ground.d_1 + rtol * scale

    polar_global = False
    if critical and np.abs(problem.c - np.eye(problem.r)).max() <= 1e-10:
        u_b, s_b, _ = np.linalg.svd(problem.b, full_matrices=False)
        if s_b[-1] > 1e-12 * max(1.0, s_b[0]):
            vg = ground.vectors
            outside = u_b - vg @ (vg.T @ u_b)
            if np.linalg.norm(outside) <= 1e-8 and np.linalg.norm(x - polar_project(problem.b)) <= 1e-6:
                polar_global = True

    return QualifiedCertificate(
        lam=lam,
        gamma=gamma,
        residual=residual,
        sigma=sigma,
        qualified=bool(qualified),
        global_opt=bool(global_opt),
        safeguard_bound=ground.d_r - sigma,
        polar_global=polar_global,
        d_1=ground.d_1,
        d_r=ground.d_r,
    )


def lower_bound(problem):
    """1/2 tr(C) d_r - ||B||_*, a bound for the lifted problem's objective."""
    return 0.5 * float(np.trace(problem.c)) * problem.ground.d_r - nuclear_norm(problem.b)


def degenerate_solution(problem, rotation=None, tol=1e-8):
    """Closed-form global solution when V_g^T B C^{-1} vanishes on a lifted problem.

    Requires the problem's ground eigenvalues to be (numerically) equal, so
    that the ground value d_1 is the smallest eigenvalue of A with its full
    multiplicity, and the spectral-norm bound ||(A - d_1 I)^+ B C^{-1}||_2 <= 1.
    Returns X = V_g U + (A - d_1 I)^+ B C^{-1} with U^T U chosen to land on
    the manifold; the multiplier is d_1 C. ``rotation`` optionally left-
    multiplies the U factor by an orthogonal matrix (the solution family is
    non-unique). Dense path; intended for verification-scale instances.
    """
    ground = problem.ground
    d1 = ground.d_1
    scale = max(1.0, abs(d1), abs(float(ground.d_next)))
    if ground.d_r - d1 > 1e-8 * scale:
        raise NotDegenerateError(
            "degenerate construction needs equal ground eigenvalues (a lifted problem)"
        )
    w_mat = np.linalg.solve(problem.c.T, problem.b.T).T  # B C^{-1}
    vg = ground.vectors
    if np.linalg.norm(vg.T @ w_mat) > tol * max(1.0, float(np.linalg.norm(w_mat))):
        raise NotDegenerateError("V_g^T B C^{-1} is not zero; instance is not degenerate")

    a_dense = problem.a.to_dense()
    eigvals, eigvecs = dense_sym_eig(a_dense)
    gaps = eigvals - d1
    null_mask = gaps <= 1e-10 * max(1.0, float(gaps.max(initial=0.0)))
    inv_gaps = np.where(null_mask, 0.0, 1.0 / np.where(null_mask, 1.0, gaps))
    y = eigvecs @ (inv_gaps[:, None] * (eigvecs.T @ w_mat))

    spectral = float(np.linalg.svd(y, compute_uv=False)[0]) if y.size else 0.0
    if spectral > 1.0 + 1e-10:
        raise NormBoundError(
            f"spectral norm bound violated: ||(A - d_1 I)^+ B C^{{-1}}||_2 = {spectral:.6f} > 1"
        )

    gram = np.eye(problem.r) - y.T @ y
    gw, ge = np.linalg.eigh(sym(gram))
    gw = np.clip(gw, 0.0, None)
    u_factor = np.diag(np.sqrt(gw)) @ ge.T  # U^T U = gram
    if rotation is not None:
        rotation = np.asarray(rotation, dtype=np.float64)
        if np.abs(rotation.T @ rotation - np.eye(problem.r)).max() > 1e-10:
            raise ValueError("rotation must be orthogonal")
        u_factor = rotation @ u_factor
    x = vg @ u_factor + y

    resid = np.linalg.norm(problem.a.apply(x) - d1 * x - w_mat)
    if resid > 1e-8 * max(1.0, float(np.linalg.norm(w_mat))):
        raise NotDegenerateError(
            f"construction failed the first-order residual check ({resid:.3e}); "
            "B has components on eigenvalue-d_1 directions outside V_g"
        )
    return x


def second_order_margin(problem, x, x_perp=None, tol=1e-8):
    """d_perp_min - gamma_max at a critical point; nonnegative is necessary for minimality.

    d_perp_min is the smallest eigenvalue of X_perp^T A X_perp. The sign of
    the margin is a necessary condition only: an indefinite Hessian can
    hide behind a positive margin. Raises NotCriticalError when X fails the
    first-order residual test.
    """
    grad = euclidean_grad(problem, x)
    lam = sym(x.T @ grad)
    residual = float(np.linalg.norm(grad - x @ lam))
    if residual > tol:
        raise NotCriticalError(f"point is not critical: residual {residual:.3e} > {tol:.1e}")
    if x_perp is None:
        x_perp = orthonormal_complement(x)
    reduced = x_perp.T @ problem.a.apply(x_perp)
    d_perp_min = float(np.linalg.eigvalsh(sym(reduced))[0])
    gamma = _gamma_spectrum(lam, problem)
    return d_perp_min - float(gamma[-1])

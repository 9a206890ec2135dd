"""Sequential subspace solver for quadratic minimization over St(n, r).

Outer loop: build a subspace from the ground eigenvectors, the current
iterate, the euclidean gradient, and an SQP direction; compress the lifted
surrogate model onto it; solve the small St(l, r) problem by a safeguarded
Riemannian Newton method; repeat. Each accepted step satisfies the sandwich
f(X_{k+1}) <= f_k(X_{k+1}) <= f_k(X_k) = f(X_k), so objectives decrease
monotonically while multipliers stay qualified for the surrogate models.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceFailureError, IndefiniteOperatorError
from .linalg import cg_solve, thin_qr
from .model import (
    euclidean_grad,
    lift,
    objective,
    qualified_certificate,
    safeguard,
    safeguard_sigma_floor,
    sigma_nondegeneracy,
    surrogate,
)
from .stiefel import polar_project, tangent_project
from .validation import sym

__all__ = [
    "SsmOptions",
    "IterationRecord",
    "SolveReport",
    "initialize",
    "sqp_direction",
    "build_subspace",
    "reduce_model",
    "newton_direction_subspace",
    "subproblem_solve",
    "SubproblemResult",
    "ssm_solve",
]


@dataclass(frozen=True)
class SsmOptions:
    """Stopping and inner-solver parameters for the subspace solver.

    ``cg_tol`` governs the Newton systems inside the compressed subproblem;
    the outer direction solve uses the looser ``sqp_cg_tol`` because that
    direction only enriches the search subspace and never needs to be exact.
    """

    tol_grad: float = 1e-8
    max_outer: int = 200
    cg_tol: float = 1e-10
    cg_max: int = 500
    sqp_cg_tol: float = 1e-6
    newton_tol: float = 1e-11
    newton_max: int = 100
    armijo_c1: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_max_backtracks: int = 30

    def __post_init__(self):
        if min(self.tol_grad, self.cg_tol, self.newton_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_outer, self.cg_max, self.newton_max, self.armijo_max_backtracks) < 1:
            raise ValueError("iteration counts must be at least 1")
        if not (0.0 < self.armijo_c1 < 1.0 and 0.0 < self.armijo_backtrack < 1.0):
            raise ValueError("armijo parameters must lie in (0, 1)")


@dataclass
class IterationRecord:
    """Per-outer-step summary; extras beyond the serialized schema aid testing."""

    k: int
    f: float
    grad_norm: float
    gamma_max: float
    cg_iters: int
    subspace_rank: int
    f_next: float = None
    surrogate_next: float = None
    step_norm: float = None
    multiplier_drift: float = None

    def to_dict(self):
        return {
            "k": self.k,
            "f": self.f,
            "grad_norm": self.grad_norm,
            "gamma_max": self.gamma_max,
            "cg_iters": self.cg_iters,
            "subspace_rank": self.subspace_rank,
        }


@dataclass
class SolveReport:
    """Outcome of a solve: per-iteration summaries, final point, certificate."""

    solver: str
    iterations: list
    x: np.ndarray
    certificate: object
    termination: str
    wall_time_s: float
    events: list = field(default_factory=list)

    @property
    def objective(self):
        return self.iterations[-1].f if self.iterations else None

    @property
    def cg_evaluations(self):
        return int(sum(rec.cg_iters for rec in self.iterations))

    def iterations_to(self, threshold):
        """Index of the first recorded iterate with grad_norm <= threshold, or None."""
        for i, rec in enumerate(self.iterations):
            if rec.grad_norm <= threshold:
                return i
        return None

    def to_json_dict(self):
        cert = self.certificate
        return {
            "iterations": [rec.to_dict() for rec in self.iterations],
            "final": {
                "objective": self.iterations[-1].f if self.iterations else None,
                "residual": cert.residual,
                "gamma": [float(g) for g in cert.gamma],
                "qualified": bool(cert.qualified),
                "global": bool(cert.global_opt),
            },
            "termination": self.termination,
            "wall_time_s": self.wall_time_s,
        }


def initialize(problem):
    """Starting pair: X_1 is the polar factor of V_g V_g^T B, with its lifted multiplier.

    The polar factor is taken from the SVD of V_g^T B, which also resolves
    rank-deficient (including zero) inputs deterministically: B = 0 yields
    X_1 = V_g. The returned multiplier d_r C - sym(Q^T V_g^T B) is always
    bounded above by d_r C.
    """
    ground = problem.ground
    vg = ground.vectors
    m = vg.T @ problem.b
    u1, _, u2t = np.linalg.svd(m)
    q = u1 @ u2t
    x1 = vg @ q
    lam1 = ground.d_r * problem.c - sym(q.T @ m)
    return x1, sym(lam1)


def sqp_direction(problem, model, x_k, lam_safe, cg_tol=1e-10, cg_max=500):
    """Newton-type direction restricted orthogonal to the ground space.

    Solves P A~ P Z C - Z lam = P E with P = I - V_g V_g^T and
    E = -A~ X_k C + B_k + X_k lam; the restriction keeps the operator
    positive semidefinite whenever lam <= (d_r - sigma) C, so plain
    conjugate gradients apply. Returns (Z, cg_iterations). Convergence
    failure propagates with the partial iterate attached.
    """
    vg = model.ground_vectors
    c = problem.c
    deflate = problem.deflate

    def project(y):
        out = y - vg @ (vg.T @ y)
        if deflate is not None:
            out = out - deflate @ (deflate.T @ out)
        return out

    e_k = -model.a_tilde.apply(x_k) @ c + model.b_k + x_k @ lam_safe
    rhs = project(e_k)

    # projecting both sides keeps roundoff drift out of the excluded
    # directions, where the multiplier term would otherwise amplify it
    def op(z):
        pz = project(z)
        return project(model.a_tilde.apply(pz) @ c - pz @ lam_safe)

    # tolerance proportional to the right-hand side, so the direction keeps
    # its relative accuracy even when the residual is already small
    tol_eff = cg_tol * min(1.0, float(np.linalg.norm(rhs)))
    if tol_eff == 0.0:
        return np.zeros_like(rhs), 0
    z, info = cg_solve(op, rhs, tol=tol_eff, max_iter=cg_max, return_info=True)
    return project(z), info["iterations"]


def build_subspace(ground, x_k, grad_full, z_k, deflate=None):
    """Orthonormal basis of span{V_g, X_k, A X_k C - B, Z_k}, pruned of dependent columns.

    With a deflation basis present, the stacked blocks are projected against
    it first so roundoff drift into excluded directions cannot accumulate.
    """
    blocks = [ground.vectors, x_k, grad_full]
    if z_k is not None:
        blocks.append(z_k)
    stacked = np.hstack(blocks)
    if deflate is not None:
        stacked = stacked - deflate @ (deflate.T @ stacked)
    return thin_qr(stacked)


def reduce_model(model, v_k):
    """Compress the surrogate onto the subspace: (V^T A~ V, V^T B_k)."""
    a_red = v_k.T @ model.a_tilde.apply(v_k)
    return sym(a_red), v_k.T @ model.b_k


def _red_objective(a_red, b_red, c, y):
    return 0.5 * float(np.sum(y * (a_red @ y @ c))) - float(np.sum(b_red * y))


def _red_decrease(a_red, b_red, c, y, y_new):
    """Exact objective change f(y_new) - f(y) of the quadratic model.

    Evaluated through the expansion <grad, d> + 1/2 <d, A d C>, whose
    roundoff scales with the step instead of the objective magnitude, so
    tiny Newton steps near convergence are judged reliably.
    """
    d = y_new - y
    g = a_red @ y @ c - b_red
    return float(np.sum(g * d)) + 0.5 * float(np.sum(d * (a_red @ d @ c)))


def newton_direction_subspace(a_red, c, y, xi_safe, e_j, cg_tol=1e-10, cg_max=None):
    """Tangent-space Newton direction for the compressed problem.

    Solves Proj_Y { A (Proj_Y Z) C - (Proj_Y Z) xi } = Proj_Y E_j by
    conjugate gradients within the tangent space at Y. On negative
    curvature the direction falls back to steepest descent Proj_Y E_j
    (the negative Riemannian gradient). Returns (Z, cg_iters, fallback).
    """
    rhs = tangent_project(y, e_j)
    if cg_max is None:
        cg_max = 4 * y.size + 20

    def op(z):
        pz = tangent_project(y, z)
        return tangent_project(y, a_red @ pz @ c - pz @ xi_safe)

    tol_eff = cg_tol * min(1.0, float(np.linalg.norm(rhs)))
    if tol_eff == 0.0:
        return np.zeros_like(rhs), 0, False
    try:
        z, info = cg_solve(op, rhs, tol=tol_eff, max_iter=cg_max, return_info=True)
        return tangent_project(y, z), info["iterations"], False
    except IndefiniteOperatorError:
        return rhs, 0, True
    except ConvergenceFailureError as err:
        return tangent_project(y, err.best), err.iterations, False


def _escape_candidate(y, xi, c_half, c_inv_half, vg_red, d_r, rtol=1e-10):
    """Strictly better feasible point near a stationary Y whose multiplier exceeds d_r C.

    Reflects the worst eigen-direction of the multiplier through a unit
    vector chosen in the compressed ground space, or follows the matching
    tangent curve when the reflection coefficient vanishes. Returns None
    when Y is already qualified.
    """
    gamma_mat = sym(c_inv_half @ sym(xi) @ c_inv_half)
    gammas, u = np.linalg.eigh(gamma_mat)
    scale = max(1.0, abs(d_r), float(np.abs(gammas).max(initial=0.0)))
    if gammas[-1] <= d_r + rtol * scale:
        return None
    idx = len(gammas) - 1
    ybar = y @ c_half @ u
    others = np.delete(np.arange(ybar.shape[1]), idx)
    if others.size:
        m_o = ybar[:, others].T @ vg_red
        _, _, vt = np.linalg.svd(m_o)
        qvec = vt[-1]
    else:
        qvec = np.zeros(vg_red.shape[1])
        qvec[0] = 1.0
    v1 = vg_red @ qvec
    v1 = v1 / np.linalg.norm(v1)
    xi1 = float(v1 @ ybar[:, idx])
    w = c_inv_half @ u[:, idx]
    return v1, w, xi1, float(gammas[-1])


@dataclass
class SubproblemResult:
    y: np.ndarray
    xi: np.ndarray
    newton_iters: int
    cg_iters: int
    escapes: int
    stalled: bool
    residual: float


def subproblem_solve(a_red, b_red, c, y0, xi0, d_r, sigma, opts, vg_red=None):
    """Riemannian Newton iteration for the compressed St(l, r) problem.

    Starts from (y0, xi0) with xi0 already safeguarded. Each step solves the
    safeguarded Newton system on the tangent space, backtracks to sufficient
    decrease, and refreshes the multiplier as sym(Y^T (A Y C - B)). Once the
    first-order residual meets tolerance, a stationary point whose multiplier
    exceeds d_r C is abandoned through an explicit escape step (possible
    whenever the compressed ground space vg_red is supplied), which strictly
    decreases the objective; iteration then resumes. Line-search failure
    returns the best point found with ``stalled`` set.
    """
    y = np.asarray(y0, dtype=np.float64).copy()
    xi = sym(np.asarray(xi0, dtype=np.float64))
    c_w, c_e = np.linalg.eigh(c)
    c_half = c_e @ np.diag(np.sqrt(c_w)) @ c_e.T
    c_inv_half = c_e @ np.diag(1.0 / np.sqrt(c_w)) @ c_e.T
    sigma_eff = safeguard_sigma_floor(sigma, d_r)
    bscale = max(1.0, float(np.linalg.norm(b_red)))
    max_escapes = 4 * y.shape[1] + 4

    f_y = _red_objective(a_red, b_red, c, y)
    total_cg = 0
    escapes = 0
    stalled = False
    residual = np.inf

    j = 0
    while j < opts.newton_max:
        e_j = -(a_red @ y @ c) + b_red + y @ xi
        residual = float(np.linalg.norm(e_j))
        if residual <= opts.newton_tol * bscale:
            if vg_red is None:
                break
            esc = _escape_candidate(y, xi, c_half, c_inv_half, vg_red, d_r)
            if esc is None:
                break
            if escapes >= max_escapes:
                break
            v1, w, xi1, _ = esc
            if abs(xi1) > 1e-6:
                y_new = polar_project(y - 2.0 * xi1 * np.outer(v1, w))
                accepted = _red_decrease(a_red, b_red, c, y, y_new) < 0.0
            else:
                accepted = False
                vdir = np.outer(v1, w)
                t = 1.0
                for _ in range(opts.armijo_max_backtracks + 10):
                    y_new = polar_project(y + t * vdir)
                    if _red_decrease(a_red, b_red, c, y, y_new) < 0.0:
                        accepted = True
                        break
                    t *= opts.armijo_backtrack
            if not accepted:
                break
            escapes += 1
            y = y_new
            f_y = _red_objective(a_red, b_red, c, y)
            xi = sym(y.T @ (a_red @ y @ c - b_red))
            continue

        xi_safe = safeguard(xi, c, d_r, sigma_eff)
        z, cg_iters, _ = newton_direction_subspace(
            a_red, c, y, xi_safe, e_j, cg_tol=opts.cg_tol
        )
        total_cg += cg_iters
        grad = -tangent_project(y, e_j)
        dirder = float(np.sum(grad * z))
        if dirder >= 0.0:
            z = -grad
            dirder = -float(np.sum(grad * grad))
            if dirder >= 0.0:
                break

        # sufficient decrease on the exact quadratic change; once steps sink to
        # the retraction's roundoff floor, accept them when the first-order
        # residual still shrinks (plain Newton progress the objective cannot
        # resolve in double precision)
        noise_slack = 2e-15 * max(1.0, abs(f_y))
        alpha = 1.0
        accepted = False
        for _ in range(opts.armijo_max_backtracks):
            y_new = polar_project(y + alpha * z)
            dec = _red_decrease(a_red, b_red, c, y, y_new)
            if dec <= opts.armijo_c1 * alpha * dirder:
                accepted = True
                break
            if dec <= noise_slack:
                xi_new = sym(y_new.T @ (a_red @ y_new @ c - b_red))
                e_new = -(a_red @ y_new @ c) + b_red + y_new @ xi_new
                if float(np.linalg.norm(e_new)) < residual:
                    accepted = True
                    break
            alpha *= opts.armijo_backtrack
        if not accepted:
            stalled = True
            break
        y = y_new
        f_y = _red_objective(a_red, b_red, c, y)
        xi = sym(y.T @ (a_red @ y @ c - b_red))
        j += 1

    e_final = -(a_red @ y @ c) + b_red + y @ xi
    return SubproblemResult(
        y=y,
        xi=xi,
        newton_iters=j,
        cg_iters=total_cg,
        escapes=escapes,
        stalled=stalled,
        residual=float(np.linalg.norm(e_final)),
    )


def ssm_solve(problem, opts=None, iterate_hook=None):
    """Drive the sequential subspace method to a qualified critical point.

    Terminates when the Riemannian gradient of the original objective drops
    below ``tol_grad``, the outer cap is reached, or no further progress is
    possible. The returned report carries per-step summaries, the final
    point, and a certificate evaluated against the original (A, B, C).
    ``iterate_hook(k, x)`` is invoked on every outer iterate when given.
    """
    opts = opts or SsmOptions()
    t_start = time.perf_counter()
    ground = problem.ground
    c = problem.c
    c_inv_half = problem.c_power(-0.5)
    a_tilde = lift(problem.a, ground)

    x, _ = initialize(problem)
    records = []
    events = []
    termination = "max_outer"
    prev_xi = None  # surrogate multiplier carried from the last subproblem

    for k in range(1, opts.max_outer + 1):
        if iterate_hook is not None:
            iterate_hook(k, x)
        g_eucl = euclidean_grad(problem, x)
        lam = sym(x.T @ g_eucl)
        grad = g_eucl - x @ lam
        grad_norm = float(np.linalg.norm(grad))
        f_val = objective(problem, x)
        gamma_max = float(np.linalg.eigvalsh(sym(c_inv_half @ lam @ c_inv_half))[-1])
        drift = None
        if prev_xi is not None:
            drift = float(np.linalg.norm(prev_xi - lam))

        if grad_norm <= opts.tol_grad:
            records.append(
                IterationRecord(k, f_val, grad_norm, gamma_max, 0, 0, multiplier_drift=drift)
            )
            termination = "converged"
            break

        model = surrogate(problem, x, a_tilde=a_tilde)
        sigma_k = sigma_nondegeneracy(ground, model.b_k, c)
        if sigma_k <= 0.0:
            events.append(f"k={k}: degenerate sigma; safeguard floor substituted")
        sigma_eff = safeguard_sigma_floor(sigma_k, ground.d_r)
        lam_safe = safeguard(lam, c, ground.d_r, sigma_eff)

        cg_total = 0
        try:
            z_k, cg_used = sqp_direction(
                problem, model, x, lam_safe, cg_tol=opts.sqp_cg_tol, cg_max=opts.cg_max
            )
            cg_total += cg_used
        except ConvergenceFailureError as err:
            # the partial iterate still enriches the subspace usefully
            z_k = err.best
            cg_total += err.iterations or 0
            events.append(f"k={k}: sqp cg hit iteration cap; partial direction kept")

        v_k = build_subspace(ground, x, g_eucl, z_k, deflate=problem.deflate)
        rank = v_k.shape[1]
        a_red, b_red = reduce_model(model, v_k)
        y0 = v_k.T @ x
        vg_red = v_k.T @ ground.vectors
        sub = subproblem_solve(
            a_red, b_red, c, y0, lam_safe, ground.d_r, sigma_k, opts, vg_red=vg_red
        )
        cg_total += sub.cg_iters
        if sub.stalled:
            events.append(f"k={k}: subproblem line search stalled")

        gamma_sub = np.linalg.eigvalsh(sym(c_inv_half @ sub.xi @ c_inv_half))[-1]
        if gamma_sub > ground.d_r + 1e-8 * max(1.0, abs(ground.d_r)):
            # rare: escape could not reach a qualified point from the incumbent;
            # retry once from the ground-aligned start and keep the better end
            m_red = vg_red.T @ b_red
            u1, _, u2t = np.linalg.svd(m_red)
            y_alt = vg_red @ (u1 @ u2t)
            xi_alt = safeguard(
                sym(ground.d_r * c - sym((u1 @ u2t).T @ m_red)), c, ground.d_r, sigma_eff
            )
            retry = subproblem_solve(
                a_red, b_red, c, y_alt, xi_alt, ground.d_r, sigma_k, opts, vg_red=vg_red
            )
            cg_total += retry.cg_iters
            if _red_objective(a_red, b_red, c, retry.y) < _red_objective(a_red, b_red, c, sub.y):
                sub = retry
                events.append(f"k={k}: subproblem restarted from the ground-aligned point")

        x_next = v_k @ sub.y
        f_next = objective(problem, x_next)
        surrogate_next = model.value(x_next, c)
        step_norm = float(np.linalg.norm(x_next - x))
        records.append(
            IterationRecord(
                k,
                f_val,
                grad_norm,
                gamma_max,
                cg_total,
                rank,
                f_next=f_next,
                surrogate_next=surrogate_next,
                step_norm=step_norm,
                multiplier_drift=drift,
            )
        )

        if f_next > f_val + 1e-12 * max(1.0, abs(f_val)):
            # cannot happen for accepted subproblem steps; guard anyway
            events.append(f"k={k}: surrogate step rejected (no decrease)")
            termination = "stalled"
            break
        no_decrease = f_val - f_next <= 1e-15 * max(1.0, abs(f_val))
        if no_decrease and step_norm <= 1e-14:
            termination = "stalled"
            break
        x = x_next
        prev_xi = sub.xi
    else:
        # final-state record when the outer cap is exhausted
        g_eucl = euclidean_grad(problem, x)
        lam = sym(x.T @ g_eucl)
        grad_norm = float(np.linalg.norm(g_eucl - x @ lam))
        gamma_max = float(np.linalg.eigvalsh(sym(c_inv_half @ lam @ c_inv_half))[-1])
        records.append(
            IterationRecord(opts.max_outer + 1, objective(problem, x), grad_norm, gamma_max, 0, 0)
        )

    if termination == "stalled":
        g_eucl = euclidean_grad(problem, x)
        lam = sym(x.T @ g_eucl)
        grad_norm = float(np.linalg.norm(g_eucl - x @ lam))
        gamma_max = float(np.linalg.eigvalsh(sym(c_inv_half @ lam @ c_inv_half))[-1])
        records.append(
            IterationRecord(records[-1].k + 1, objective(problem, x), grad_norm, gamma_max, 0, 0)
        )

    cert = qualified_certificate(problem, x)
    return SolveReport(
        solver="ssm",
        iterations=records,
        x=x,
        certificate=cert,
        termination=termination,
        wall_time_s=time.perf_counter() - t_start,
        events=events,
    )

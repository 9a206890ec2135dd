"""Semi-supervised graph classification through the Stiefel quadratic form.

A partially labeled graph embedding problem is reduced to the standard
quadratic objective: split the Laplacian by labeled/unlabeled vertices,
center the unlabeled block against the all-ones direction, factor out the
rank deficiency of the constraint Gram matrix, and hand the result to any
of the manifold solvers. Labels are recovered from row-wise argmax of the
reconstructed unlabeled embedding.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .baselines import BaselineOptions, projected_gradient_solve, riemannian_gd_solve
from .exceptions import CardinalityError, DegenerateInstanceError
from .graphs import conductance, laplacian
from .linalg import SparseSymOperator
from .model import QuadraticProblem, ground_spectrum, objective
from .solver import SsmOptions, initialize, ssm_solve

__all__ = [
    "SemiSupInstance",
    "ClassificationResult",
    "balanced_cardinality",
    "assemble",
    "assemble_graph",
    "rank_reduce",
    "classify",
    "embedding_energy",
]


def balanced_cardinality(n_vertices, n_classes):
    """Near-equal class sizes; the remainder goes to the lowest class indices."""
    base = n_vertices // n_classes
    rem = n_vertices - base * n_classes
    return np.array([base + (1 if i < rem else 0) for i in range(n_classes)], dtype=int)


@dataclass
class SemiSupInstance:
    """Laplacian blocks, labeled indicators, and the derived quadratic data."""

    l_ll: sp.csr_matrix
    l_lu: sp.csr_matrix
    l_ul: sp.csr_matrix
    l_uu: sp.csr_matrix
    y_l: np.ndarray  # (m, r) one-hot
    c: np.ndarray  # (r,) class cardinalities
    c_u: np.ndarray  # (r,) unlabeled cardinalities
    z0: np.ndarray  # (n, r) centering shift
    a_op: SparseSymOperator  # P L_uu P
    b: np.ndarray  # (n, r)
    c_mat: np.ndarray  # (r, r) constraint Gram matrix, PSD with null vector 1_r
    q_tilde: np.ndarray  # (r, r') isometry
    c_tilde: np.ndarray  # (r',) positive eigenvalues
    order: np.ndarray = field(default=None)  # original index of each permuted vertex
    graph: object = field(default=None, repr=False)

    @property
    def n_labeled(self):
        return self.y_l.shape[0]

    @property
    def n_unlabeled(self):
        return self.b.shape[0]

    @property
    def n_classes(self):
        return self.y_l.shape[1]

    @property
    def reduced_rank(self):
        return int(self.c_tilde.shape[0])


def rank_reduce(c_mat, tol=1e-10):
    """Factor a PSD matrix as Q~ diag(C~) Q~^T keeping eigenvalues above tol * max.

    Raises DegenerateInstanceError when nothing survives (reduced rank zero).
    """
    c_mat = np.asarray(c_mat, dtype=np.float64)
    w, e = np.linalg.eigh(0.5 * (c_mat + c_mat.T))
    if w[0] < -1e-10 * max(1.0, abs(w[-1])):
        raise ValueError(f"matrix is not positive semidefinite (min eig {w[0]:.3e})")
    keep = w > tol * max(w[-1], 0.0)
    if not np.any(keep):
        raise DegenerateInstanceError("constraint matrix has numerical rank zero")
    return e[:, keep], w[keep]


def assemble(lap_matrix, y_l, c, order=None, graph=None):
    """Derive the quadratic data from a labeled-first Laplacian.

    ``lap_matrix`` is the (m', m') combinatorial Laplacian with the m labeled
    vertices occupying the leading rows/columns, ``y_l`` their one-hot (m, r)
    indicator, and ``c`` the prescribed class cardinalities (summing to m' and
    dominating the labeled class counts). Builds the blocks, the centered
    operator A = P L_uu P (stored sparse plus a rank-2 correction), the linear
    term B, the constraint Gram matrix C, and its rank reduction.
    """
    lap_matrix = sp.csr_matrix(lap_matrix)
    y_l = np.asarray(y_l, dtype=np.float64)
    c = np.asarray(c, dtype=int)
    m_total = lap_matrix.shape[0]
    m, r = y_l.shape
    n = m_total - m
    if n < 1:
        raise CardinalityError("no unlabeled vertices remain")
    row_sums = y_l.sum(axis=1)
    if not np.all((y_l == 0) | (y_l == 1)) or not np.all(row_sums == 1):
        raise ValueError("y_l must have one-hot rows")
    labeled_counts = y_l.sum(axis=0).astype(int)
    if c.shape != (r,):
        raise CardinalityError(f"cardinality vector must have {r} entries")
    if int(c.sum()) != m_total:
        raise CardinalityError(
            f"cardinalities must sum to the vertex count ({int(c.sum())} != {m_total})"
        )
    if np.any(c < labeled_counts):
        raise CardinalityError("each cardinality must cover its labeled count")
    c_u = c - labeled_counts
    if n < r:
        raise CardinalityError("need at least as many unlabeled vertices as classes")

    l_ll = lap_matrix[:m, :m].tocsr()
    l_lu = lap_matrix[:m, m:].tocsr()
    l_ul = lap_matrix[m:, :m].tocsr()
    l_uu = lap_matrix[m:, m:].tocsr()

    ones = np.ones(n)
    z0 = np.outer(ones, c_u) / n

    # A = P L_uu P expanded into L_uu plus a symmetric rank-2 term
    u_vec = (l_uu @ ones) / n
    s = float(ones @ (l_uu @ ones)) / n**2
    correction_u = np.column_stack([ones, u_vec])
    correction_m = np.array([[s, -1.0], [-1.0, 0.0]])
    a_op = SparseSymOperator(l_uu, corrections=((correction_u, correction_m),), check=False)

    raw_b = l_uu @ z0 + l_ul @ y_l
    b = raw_b - np.outer(ones, ones @ raw_b) / n

    c_mat = np.diag(c_u.astype(np.float64)) - np.outer(c_u, c_u) / n
    q_tilde, c_tilde = rank_reduce(c_mat)

    if order is None:
        order = np.arange(m_total)
    return SemiSupInstance(
        l_ll=l_ll,
        l_lu=l_lu,
        l_ul=l_ul,
        l_uu=l_uu,
        y_l=y_l,
        c=c,
        c_u=c_u,
        z0=z0,
        a_op=a_op,
        b=b,
        c_mat=c_mat,
        q_tilde=q_tilde,
        c_tilde=c_tilde,
        order=np.asarray(order, dtype=int),
        graph=graph,
    )


def assemble_graph(graph, labeled_idx, labeled_classes, n_classes, cardinality=None):
    """Assemble from a WeightedGraph and labels on arbitrary vertex indices.

    ``labeled_classes`` uses 1-based class ids. Vertices are permuted so
    labeled ones come first; the permutation is stored on the instance and
    undone when labels are recovered.
    """
    labeled_idx = np.asarray(labeled_idx, dtype=int)
    labeled_classes = np.asarray(labeled_classes, dtype=int)
    if labeled_idx.size != labeled_classes.size:
        raise ValueError("labeled indices and classes must align")
    if labeled_idx.size != np.unique(labeled_idx).size:
        raise ValueError("labeled indices must be distinct")
    if np.any(labeled_classes < 1) or np.any(labeled_classes > n_classes):
        raise ValueError(f"classes must lie in 1..{n_classes}")

    m_total = graph.n
    mask = np.zeros(m_total, dtype=bool)
    mask[labeled_idx] = True
    order = np.concatenate([labeled_idx, np.where(~mask)[0]])
    lap = laplacian(graph).matrix
    lap_perm = lap[order][:, order]

    y_l = np.zeros((labeled_idx.size, n_classes))
    y_l[np.arange(labeled_idx.size), labeled_classes - 1] = 1.0

    if cardinality is None:
        cardinality = balanced_cardinality(m_total, n_classes)
    return assemble(lap_perm, y_l, cardinality, order=order, graph=graph)


@dataclass
class ClassificationResult:
    """Predicted labels with the evidence that produced them."""

    labels: np.ndarray  # (m',) 1-based classes in original vertex order
    x_u: np.ndarray  # (n, r) recovered unlabeled embedding (permuted order)
    z_tilde: np.ndarray  # (n, r') manifold solution
    objective: float
    certificate: object
    report: object
    accuracy: float = None
    conductance_per_class: dict = None
    unlabeled_disconnected: np.ndarray = None
    wall_time_s: float = 0.0
    standard_scale: float = 1.0  # normalization applied to (B, C) of the standard form
    problem: object = None

    def to_json_dict(self):
        return {
            "labels": [int(v) for v in self.labels],
            "accuracy": None if self.accuracy is None else float(self.accuracy),
            "objective": float(self.objective),
            "certificate": self.certificate.to_dict(),
            "conductance": (
                None
                if self.conductance_per_class is None
                else {str(k): float(v) for k, v in self.conductance_per_class.items()}
            ),
        }


def _flag_disconnected(instance):
    """Unlabeled vertices in graph components that contain no labeled vertex."""
    if instance.graph is None:
        return np.array([], dtype=int)
    _, comp = connected_components(instance.graph.weights, directed=False)
    m = instance.n_labeled
    labeled_components = set(comp[instance.order[:m]])
    unlabeled_orig = instance.order[m:]
    flagged = [int(v) for v in unlabeled_orig if comp[v] not in labeled_components]
    return np.asarray(flagged, dtype=int)


def classify(instance, options=None, solver="ssm", truth=None, eig_tol=1e-10, seed=0):
    """Solve the reduced manifold problem and recover labels.

    The standard-form problem uses A = P L_uu P with its smallest eigenpairs
    computed orthogonally to the all-ones null direction, the linear term
    mapped to the minus convention of the objective, and C~ as the weight
    matrix. ``solver`` picks the subspace method or a gradient baseline
    (started from the same initialization). ``truth`` holds 1-based true
    labels in original vertex order; accuracy is measured over unlabeled
    vertices. Raises DegenerateInstanceError when the reduced rank is zero.
    """
    t_start = time.perf_counter()
    if solver not in ("ssm", "rgd", "pg"):
        raise ValueError(f"unknown solver {solver!r}")
    r_red = instance.reduced_rank
    if r_red < 1:
        raise DegenerateInstanceError("instance has reduced rank zero")
    n = instance.n_unlabeled

    # the weight matrix is normalized to unit spectral norm: dividing both the
    # linear term and C by the same factor moves neither the minimizers nor
    # the gamma spectrum / quality flags, but calibrates the solver's absolute
    # tolerances to the problem scale (c_tilde entries grow with vertex count)
    scale = float(instance.c_tilde.max())
    sqrt_ct = np.sqrt(instance.c_tilde)
    b_tilde = instance.b @ instance.q_tilde
    b_std = -(b_tilde * sqrt_ct) / scale
    c_std = np.diag(instance.c_tilde / scale)

    ones_unit = np.ones((n, 1)) / np.sqrt(n)
    ground = ground_spectrum(instance.a_op, r_red, deflate=ones_unit, tol=eig_tol, seed=seed)
    problem = QuadraticProblem(
        a=instance.a_op, b=b_std, c=c_std, ground=ground, deflate=ones_unit
    )

    if solver == "ssm":
        report = ssm_solve(problem, options if isinstance(options, SsmOptions) else options)
    elif solver in ("rgd", "pg"):
        x0, _ = initialize(problem)
        base = options if isinstance(options, BaselineOptions) else BaselineOptions(x0=x0)
        if base.x0 is None:
            base = BaselineOptions(
                step_rule=base.step_rule,
                alpha=base.alpha,
                tol_grad=base.tol_grad,
                max_iter=base.max_iter,
                seed=base.seed,
                x0=x0,
            )
        run = riemannian_gd_solve if solver == "rgd" else projected_gradient_solve
        report = run(problem, base)
    else:
        raise ValueError(f"unknown solver {solver!r}")

    z_tilde = report.x
    x_u = (z_tilde * sqrt_ct) @ instance.q_tilde.T + instance.z0

    labels_perm = np.empty(instance.order.size, dtype=int)
    labels_perm[: instance.n_labeled] = np.argmax(instance.y_l, axis=1) + 1
    labels_perm[instance.n_labeled :] = np.argmax(x_u, axis=1) + 1
    labels = np.empty_like(labels_perm)
    labels[instance.order] = labels_perm

    accuracy = None
    if truth is not None:
        truth = np.asarray(truth, dtype=int)
        unlabeled_orig = instance.order[instance.n_labeled :]
        accuracy = float(np.mean(labels[unlabeled_orig] == truth[unlabeled_orig]))

    cond = None
    if instance.graph is not None:
        cond = {}
        for cls in range(1, instance.n_classes + 1):
            members = np.where(labels == cls)[0]
            if members.size == 0 or members.size >= instance.graph.n:
                cond[cls] = float("nan")
            else:
                cond[cls] = conductance(instance.graph, members)

    return ClassificationResult(
        labels=labels,
        x_u=x_u,
        z_tilde=z_tilde,
        objective=objective(problem, z_tilde),
        certificate=report.certificate,
        report=report,
        accuracy=accuracy,
        conductance_per_class=cond,
        unlabeled_disconnected=_flag_disconnected(instance),
        wall_time_s=time.perf_counter() - t_start,
        standard_scale=scale,
        problem=problem,
    )


def embedding_energy(instance, x_u):
    """<X, L X> of the full embedding [Y_l; X_u] under the permuted Laplacian."""
    y_l = instance.y_l
    term_ll = float(np.sum(y_l * (instance.l_ll @ y_l)))
    term_lu = float(np.sum(y_l * (instance.l_lu @ x_u)))
    term_uu = float(np.sum(x_u * (instance.l_uu @ x_u)))
    return term_ll + 2.0 * term_lu + term_uu

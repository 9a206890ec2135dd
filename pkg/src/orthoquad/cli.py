"""Command-line surface: solve, classify, circles, eigs, bench.

Exit codes: 0 success, 1 usage error, 2 input format error, 3 solver
non-convergence (artifacts are still written).
"""

import argparse
import sys

import numpy as np

from . import __version__
from .bench import BENCH_SUITES, run_bench, write_plot_csv, write_rows_csv
from .datasets import gen_circles
from .exceptions import ConvergenceFailureError, FormatError, OrthoquadError
from .graphs import knn_gaussian_graph
from .io import (
    load_dense_csv,
    load_operator_mm,
    load_problem_file,
    save_dense_binary,
    save_dense_csv,
    write_json,
)
from .linalg import smallest_eigenpairs
from .semisup import assemble_graph, classify
from .solver import SsmOptions

USAGE_ERROR, FORMAT_ERROR, SOLVER_ERROR = 1, 2, 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="orthoquad",
        description="Quadratic minimization over Stiefel manifolds and graph classification",
    )
    parser.add_argument("--version", action="version", version=f"orthoquad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a problem file with a named solver")
    p_solve.add_argument("--problem", required=True, help="TOML problem description")
    p_solve.add_argument("--solver", default="ssm", choices=["ssm", "rgd", "pg"])
    p_solve.add_argument("--tol", type=float, default=None, help="gradient-norm stop")
    p_solve.add_argument("--max-outer", type=int, default=None)
    p_solve.add_argument("--out", required=True, help="solve report JSON path")

    p_cls = sub.add_parser("classify", help="semi-supervised classification of points")
    p_cls.add_argument("--points", required=True, help="CSV, one point per row")
    p_cls.add_argument("--labels", required=True, help="CSV of (vertex_index, class_index)")
    p_cls.add_argument("--k", type=int, default=10, help="nearest-neighbor count")
    p_cls.add_argument("--classes", type=int, required=True)
    p_cls.add_argument("--cardinality", default=None, help="comma-separated class sizes")
    p_cls.add_argument("--truth", default=None, help="CSV of all (vertex_index, class_index)")
    p_cls.add_argument("--solver", default="ssm", choices=["ssm", "rgd", "pg"])
    p_cls.add_argument("--seed", type=int, default=0)
    p_cls.add_argument("--out", required=True, help="classification result JSON path")

    p_circ = sub.add_parser("circles", help="generate the concentric-circles dataset")
    p_circ.add_argument("--seed", type=int, default=0)
    p_circ.add_argument("--n-per", type=int, default=2000)
    p_circ.add_argument("--radii", default="1,2,3")
    p_circ.add_argument("--noise", type=float, default=0.2)
    p_circ.add_argument("--out", required=True, help="points CSV path")
    p_circ.add_argument("--labels-out", default=None, help="true labels CSV path")

    p_eigs = sub.add_parser("eigs", help="smallest eigenpairs of a Matrix Market operator")
    p_eigs.add_argument("--matrix", required=True)
    p_eigs.add_argument("--k", type=int, required=True)
    p_eigs.add_argument("--deflate-ones", action="store_true",
                        help="restrict to the complement of the all-ones vector")
    p_eigs.add_argument("--tol", type=float, default=1e-9)
    p_eigs.add_argument("--seed", type=int, default=0)
    p_eigs.add_argument("--out", required=True, help="eigenvalues JSON path")
    p_eigs.add_argument("--vectors", default=None, help="optional binary matrix of eigenvectors")

    p_bench = sub.add_parser("bench", help="solver comparison over a suite")
    p_bench.add_argument("--suite", required=True, choices=list(BENCH_SUITES))
    p_bench.add_argument("--solvers", default="ssm,rgd,pg")
    p_bench.add_argument("--seeds", type=int, default=3)
    p_bench.add_argument("--out", required=True, help="CSV of benchmark rows")
    p_bench.add_argument("--emit-plot-data", default=None,
                         help="also write objective-vs-iteration series CSV")
    return parser


def _read_label_csv(path, n_vertices):
    raw = load_dense_csv(path)
    if raw.shape[1] != 2:
        raise FormatError(f"{path}: label CSV needs (vertex_index, class_index) rows")
    idx = raw[:, 0].astype(int)
    classes = raw[:, 1].astype(int)
    if np.any(idx < 0) or np.any(idx >= n_vertices):
        raise FormatError(f"{path}: vertex indices out of range")
    return idx, classes


def _cmd_solve(args):
    problem, file_opts = load_problem_file(args.problem)
    opts_kwargs = {k: file_opts[k] for k in file_opts if k in SsmOptions.__dataclass_fields__}
    if args.tol is not None:
        opts_kwargs["tol_grad"] = args.tol
    if args.max_outer is not None:
        opts_kwargs["max_outer"] = args.max_outer
    opts = SsmOptions(**opts_kwargs)
    if args.solver == "ssm":
        from .solver import ssm_solve

        report = ssm_solve(problem, opts)
    else:
        from .baselines import BaselineOptions, projected_gradient_solve, riemannian_gd_solve
        from .solver import initialize

        x0, _ = initialize(problem)
        run = riemannian_gd_solve if args.solver == "rgd" else projected_gradient_solve
        report = run(problem, BaselineOptions(x0=x0, tol_grad=opts.tol_grad,
                                              max_iter=max(opts.max_outer * 10, 1000)))
    write_json(args.out, report.to_json_dict())
    return 0 if report.termination == "converged" else SOLVER_ERROR


def _cmd_classify(args):
    points = load_dense_csv(args.points)
    graph = knn_gaussian_graph(points, args.k)
    labeled_idx, labeled_classes = _read_label_csv(args.labels, graph.n)
    cardinality = None
    if args.cardinality:
        cardinality = np.array([int(v) for v in args.cardinality.split(",")])
    truth = None
    if args.truth:
        t_idx, t_cls = _read_label_csv(args.truth, graph.n)
        if t_idx.size != graph.n:
            raise FormatError(f"{args.truth}: truth must label every vertex")
        truth = np.zeros(graph.n, dtype=int)
        truth[t_idx] = t_cls
    instance = assemble_graph(graph, labeled_idx, labeled_classes, args.classes, cardinality)
    result = classify(instance, solver=args.solver, truth=truth, seed=args.seed)
    write_json(args.out, result.to_json_dict())
    return 0 if result.report.termination == "converged" else SOLVER_ERROR


def _cmd_circles(args):
    radii = tuple(float(v) for v in args.radii.split(","))
    points, labels = gen_circles(seed=args.seed, n_per=args.n_per, radii=radii, noise=args.noise)
    save_dense_csv(args.out, points)
    if args.labels_out:
        rows = np.column_stack([np.arange(labels.size), labels]).astype(float)
        save_dense_csv(args.labels_out, rows)
    return 0


def _cmd_eigs(args):
    op = load_operator_mm(args.matrix)
    deflate = None
    if args.deflate_ones:
        deflate = np.ones((op.n, 1)) / np.sqrt(op.n)
    pairs = smallest_eigenpairs(op, args.k, deflate=deflate, tol=args.tol, seed=args.seed)
    residuals = np.linalg.norm(op.apply(pairs.vectors) - pairs.vectors * pairs.values, axis=0)
    write_json(
        args.out,
        {
            "values": [float(v) for v in pairs.values],
            "residuals": [float(r) for r in residuals],
            "deflated_ones": bool(args.deflate_ones),
        },
    )
    if args.vectors:
        save_dense_binary(args.vectors, pairs.vectors)
    return 0


def _cmd_bench(args):
    solvers = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
    rows, series = run_bench(args.suite, solvers=solvers, seeds=args.seeds)
    write_rows_csv(args.out, rows)
    if args.emit_plot_data:
        write_plot_csv(args.emit_plot_data, series)
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "classify": _cmd_classify,
    "circles": _cmd_circles,
    "eigs": _cmd_eigs,
    "bench": _cmd_bench,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage problems
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (FormatError, FileNotFoundError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return FORMAT_ERROR
    except ConvergenceFailureError as err:
        print(f"error: {err}", file=sys.stderr)
        return SOLVER_ERROR
    except (OrthoquadError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())

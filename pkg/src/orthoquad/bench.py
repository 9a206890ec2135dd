"""Benchmark harness: datasets x solvers x seeds, CSV rows, plot series."""

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import BaselineOptions, projected_gradient_solve, riemannian_gd_solve
from .datasets import gen_circles
from .graphs import knn_gaussian_graph
from .model import problem_from_arrays
from .semisup import assemble_graph, classify
from .solver import SsmOptions, initialize, ssm_solve

__all__ = ["BenchRow", "run_bench", "write_rows_csv", "write_plot_csv", "BENCH_SUITES"]

THREADS_ENV = "ORTHOQUAD_THREADS"


@dataclass(frozen=True)
class BenchRow:
    """One benchmark cell; mirrors the objective/residual/evaluations/runtime columns."""

    dataset: str
    solver: str
    seed: int
    objective: float
    residual: float
    cg_evaluations: int
    runtime_s: float
    accuracy: float = None

    def to_csv_dict(self):
        return {
            "dataset": self.dataset,
            "solver": self.solver,
            "seed": self.seed,
            "objective": repr(float(self.objective)),
            "residual": repr(float(self.residual)),
            "cg_evaluations": self.cg_evaluations,
            "runtime_s": repr(float(self.runtime_s)),
            "accuracy": "" if self.accuracy is None else repr(float(self.accuracy)),
        }


def _sample_labels(truth, per_class, seed):
    rng = np.random.default_rng(seed)
    labeled, classes = [], []
    for cls in np.unique(truth):
        members = np.where(truth == cls)[0]
        pick = rng.choice(members, size=per_class, replace=False)
        labeled.extend(int(i) for i in pick)
        classes.extend(int(cls) for _ in pick)
    return labeled, classes


def _circles_cell(seed, solvers, ssm_opts):
    pts, truth = gen_circles(seed=seed, n_per=150, noise=0.15)
    graph = knn_gaussian_graph(pts, 10)
    labeled, classes = _sample_labels(truth, 5, seed + 7919)
    instance = assemble_graph(graph, labeled, classes, 3)
    rows, series = [], []
    for solver in solvers:
        t0 = time.perf_counter()
        result = classify(instance, options=ssm_opts if solver == "ssm" else None,
                          solver=solver, truth=truth)
        elapsed = time.perf_counter() - t0
        report = result.report
        rows.append(
            BenchRow(
                dataset="circles",
                solver=solver,
                seed=seed,
                objective=report.objective,
                residual=report.certificate.residual,
                cg_evaluations=report.cg_evaluations,
                runtime_s=elapsed,
                accuracy=result.accuracy,
            )
        )
        series.append(("circles", solver, seed, report))
    return rows, series


def _quadratic_cell(dataset, problem, seed, solvers, ssm_opts):
    rows, series = [], []
    x0, _ = initialize(problem)
    for solver in solvers:
        t0 = time.perf_counter()
        if solver == "ssm":
            report = ssm_solve(problem, ssm_opts)
        else:
            run = riemannian_gd_solve if solver == "rgd" else projected_gradient_solve
            report = run(problem, BaselineOptions(x0=x0, tol_grad=1e-8, max_iter=3000))
        elapsed = time.perf_counter() - t0
        rows.append(
            BenchRow(
                dataset=dataset,
                solver=solver,
                seed=seed,
                objective=report.objective,
                residual=report.certificate.residual,
                cg_evaluations=report.cg_evaluations,
                runtime_s=elapsed,
            )
        )
        series.append((dataset, solver, seed, report))
    return rows, series


def _random_problem(seed, n=50, r=3):
    rng = np.random.default_rng(seed)
    while True:
        a = rng.standard_normal((n, n))
        a = 0.5 * (a + a.T)
        b = rng.standard_normal((n, r))
        g = rng.standard_normal((r, r))
        c = g @ g.T + 0.3 * np.eye(r)
        problem = problem_from_arrays(a, b, c)
        from .model import sigma_nondegeneracy

        if sigma_nondegeneracy(problem.ground, b, c) > 0.05:
            return problem


def _e1_problem():
    a = np.diag([1.0, 2.0, 4.0])
    b = np.array([[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]])
    return problem_from_arrays(a, b, np.eye(2))


BENCH_SUITES = ("circles", "random", "e1")


def run_bench(suite, solvers=("ssm", "rgd", "pg"), seeds=3, ssm_opts=None):
    """All (solver, seed) cells of one suite; returns (rows, series).

    Rows are sorted by (dataset, solver, seed). ``series`` pairs each cell
    with its SolveReport for iteration-level inspection and plot emission.
    Cells may run on a thread pool sized by the ORTHOQUAD_THREADS variable
    (default 1, fully sequential).
    """
    if suite not in BENCH_SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {BENCH_SUITES}")
    for solver in solvers:
        if solver not in ("ssm", "rgd", "pg"):
            raise ValueError(f"unknown solver {solver!r}")
    ssm_opts = ssm_opts or SsmOptions()
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)

    def cell(seed):
        if suite == "circles":
            return _circles_cell(seed, solvers, ssm_opts)
        if suite == "random":
            return _quadratic_cell("random-st50-3", _random_problem(1000 + seed), seed, solvers, ssm_opts)
        return _quadratic_cell("e1", _e1_problem(), seed, solvers, ssm_opts)

    workers = max(1, int(os.environ.get(THREADS_ENV, "1")))
    rows, series = [], []
    if workers == 1:
        results = [cell(s) for s in seed_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(cell, seed_list))
    for cell_rows, cell_series in results:
        rows.extend(cell_rows)
        series.extend(cell_series)
    rows.sort(key=lambda r: (r.dataset, r.solver, r.seed))
    series.sort(key=lambda s: (s[0], s[1], s[2]))
    return rows, series


def write_rows_csv(path, rows):
    fields = [
        "dataset",
        "solver",
        "seed",
        "objective",
        "residual",
        "cg_evaluations",
        "runtime_s",
        "accuracy",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_csv_dict())


def write_plot_csv(path, series):
    """Objective-vs-iteration long-format series for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "solver", "seed", "iteration", "objective", "grad_norm"])
        for dataset, solver, seed, report in series:
            for rec in report.iterations:
                writer.writerow([dataset, solver, seed, rec.k, repr(rec.f), repr(rec.grad_norm)])

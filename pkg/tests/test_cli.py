import json

import numpy as np
import pytest
import scipy.sparse as sp

from orthoquad import SparseSymOperator, gen_circles
from orthoquad.cli import main
from orthoquad.io import save_dense_csv, save_operator_mm


@pytest.fixture
def problem_files(tmp_path):
    save_operator_mm(tmp_path / "A.mtx", SparseSymOperator(sp.diags([1.0, 2.0, 4.0]).tocsr()))
    save_dense_csv(tmp_path / "B.csv", np.array([[0.5, 0.0], [0.0, 0.5], [0.0, 0.0]]))
    save_dense_csv(tmp_path / "C.csv", np.eye(2))
    (tmp_path / "e1.toml").write_text('a = "A.mtx"\nb = "B.csv"\nc = "C.csv"\nr = 2\n')
    return tmp_path


class TestSolve:
    def test_end_to_end(self, problem_files):
        out = problem_files / "report.json"
        rc = main(
            ["solve", "--problem", str(problem_files / "e1.toml"), "--solver", "ssm",
             "--tol", "1e-8", "--out", str(out)]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["final"]["qualified"] is True
        assert payload["final"]["objective"] == pytest.approx(0.5, abs=1e-8)
        assert payload["termination"] == "converged"

    def test_nonconvergence_exit_code_still_writes(self, tmp_path):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((12, 12))
        a = 0.5 * (a + a.T)
        save_operator_mm(tmp_path / "A.mtx", SparseSymOperator(sp.csr_matrix(a)))
        save_dense_csv(tmp_path / "B.csv", rng.standard_normal((12, 2)))
        save_dense_csv(tmp_path / "C.csv", np.eye(2))
        (tmp_path / "p.toml").write_text(
            'a = "A.mtx"\nb = "B.csv"\nc = "C.csv"\nr = 2\n\n[options]\nmax_outer = 1\n'
        )
        out = tmp_path / "r.json"
        rc = main(["solve", "--problem", str(tmp_path / "p.toml"), "--out", str(out)])
        assert rc == 3
        assert out.exists()
        assert json.loads(out.read_text())["termination"] != "converged"

    def test_missing_problem_file_is_format_error(self, tmp_path):
        rc = main(["solve", "--problem", str(tmp_path / "nope.toml"),
                   "--out", str(tmp_path / "r.json")])
        assert rc == 2


class TestUsage:
    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag(self):
        assert main(["solve"]) == 1

    def test_version_exits_cleanly(self):
        assert main(["--version"]) == 0


class TestCircles:
    def test_deterministic_output(self, tmp_path):
        args = ["circles", "--seed", "5", "--n-per", "50", "--noise", "0.1",
                "--out", str(tmp_path / "a.csv"), "--labels-out", str(tmp_path / "la.csv")]
        assert main(args) == 0
        first = (tmp_path / "a.csv").read_bytes()
        args[args.index("--out") + 1] = str(tmp_path / "b.csv")
        args[args.index("--labels-out") + 1] = str(tmp_path / "lb.csv")
        assert main(args) == 0
        assert first == (tmp_path / "b.csv").read_bytes()
        pts = np.loadtxt(tmp_path / "a.csv", delimiter=",")
        assert pts.shape == (150, 2)
        labels = np.loadtxt(tmp_path / "la.csv", delimiter=",").astype(int)
        assert sorted(set(labels[:, 1])) == [1, 2, 3]

    def test_zero_noise_exact_radii(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["circles", "--seed", "0", "--n-per", "20", "--noise", "0",
                     "--radii", "1,2,3", "--out", str(out)]) == 0
        pts = np.loadtxt(out, delimiter=",")
        radii = np.linalg.norm(pts, axis=1)
        expected = np.repeat([1.0, 2.0, 3.0], 20)
        np.testing.assert_allclose(radii, expected, atol=1e-12)


class TestClassify:
    def test_end_to_end_with_accuracy(self, tmp_path):
        points, truth = gen_circles(seed=2, n_per=100, noise=0.15)
        save_dense_csv(tmp_path / "pts.csv", points)
        truth_rows = np.column_stack([np.arange(truth.size), truth]).astype(float)
        save_dense_csv(tmp_path / "truth.csv", truth_rows)
        rng = np.random.default_rng(0)
        rows = []
        for cls in (1, 2, 3):
            for v in rng.choice(np.where(truth == cls)[0], 5, replace=False):
                rows.append((float(v), float(cls)))
        save_dense_csv(tmp_path / "lab.csv", np.array(rows))
        out = tmp_path / "cls.json"
        rc = main(
            ["classify", "--points", str(tmp_path / "pts.csv"), "--labels",
             str(tmp_path / "lab.csv"), "--k", "10", "--classes", "3",
             "--truth", str(tmp_path / "truth.csv"), "--out", str(out)]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["accuracy"] is not None and payload["accuracy"] > 0.5
        assert set(payload) == {"labels", "accuracy", "objective", "certificate", "conductance"}
        assert len(payload["labels"]) == 300

    def test_bad_label_csv_is_format_error(self, tmp_path):
        points, _ = gen_circles(seed=2, n_per=30, noise=0.15)
        save_dense_csv(tmp_path / "pts.csv", points)
        save_dense_csv(tmp_path / "lab.csv", np.ones((3, 3)))  # wrong width
        rc = main(["classify", "--points", str(tmp_path / "pts.csv"), "--labels",
                   str(tmp_path / "lab.csv"), "--k", "5", "--classes", "3",
                   "--out", str(tmp_path / "o.json")])
        assert rc == 2


class TestEigs:
    def test_values_and_deflation(self, tmp_path):
        w = sp.diags([np.ones(29), np.ones(29)], [-1, 1])
        lap = (sp.diags(np.asarray(w.sum(axis=1)).ravel()) - w).tocsr()
        save_operator_mm(tmp_path / "L.mtx", SparseSymOperator(lap))
        out = tmp_path / "eigs.json"
        rc = main(["eigs", "--matrix", str(tmp_path / "L.mtx"), "--k", "2",
                   "--deflate-ones", "--out", str(out),
                   "--vectors", str(tmp_path / "V.bin")])
        assert rc == 0
        payload = json.loads(out.read_text())
        expected = [2 - 2 * np.cos(np.pi * j / 30) for j in (1, 2)]
        np.testing.assert_allclose(payload["values"], expected, atol=1e-8)
        from orthoquad.io import load_dense_binary

        vec = load_dense_binary(tmp_path / "V.bin")
        assert vec.shape == (30, 2)
        assert np.abs(vec.sum(axis=0)).max() <= 1e-8


class TestBench:
    def test_threaded_rows_match_sequential(self, monkeypatch):
        from orthoquad.bench import THREADS_ENV, run_bench

        rows_seq, _ = run_bench("e1", solvers=("ssm",), seeds=2)
        monkeypatch.setenv(THREADS_ENV, "2")
        rows_par, _ = run_bench("e1", solvers=("ssm",), seeds=2)
        assert [(r.dataset, r.solver, r.seed, r.objective) for r in rows_seq] == [
            (r.dataset, r.solver, r.seed, r.objective) for r in rows_par
        ]

    def test_row_count_and_columns(self, tmp_path):
        out = tmp_path / "b.csv"
        rc = main(["bench", "--suite", "e1", "--solvers", "ssm,rgd", "--seeds", "3",
                   "--out", str(out), "--emit-plot-data", str(tmp_path / "plot.csv")])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "dataset,solver,seed,objective,residual,cg_evaluations,runtime_s,accuracy"
        assert len(lines) == 1 + 2 * 3
        plot_lines = (tmp_path / "plot.csv").read_text().strip().splitlines()
        assert plot_lines[0] == "dataset,solver,seed,iteration,objective,grad_norm"
        assert len(plot_lines) > 1

import json

import numpy as np
import pytest

from orthoquad import (
    SsmOptions,
    build_subspace,
    initialize,
    multiplier,
    multistart_oracle,
    newton_direction_subspace,
    objective,
    problem_from_arrays,
    random_point,
    reduce_model,
    riemannian_grad,
    safeguard,
    sigma_nondegeneracy,
    sphere_trs_oracle,
    sqp_direction,
    ssm_solve,
    subproblem_solve,
    surrogate,
    tangent_project,
)
from orthoquad.validation import stiefel_defect, sym

from conftest import make_e1, rand_problem

X1 = np.eye(3)[:, :2]


class TestInitialize:
    def test_worked_instance(self, e1):
        x1, lam1 = initialize(e1)
        np.testing.assert_allclose(x1, X1, atol=1e-13)
        np.testing.assert_allclose(lam1, np.diag([1.5, 1.5]), atol=1e-13)

    def test_zero_b_falls_back_to_ground(self):
        problem = rand_problem(7, 2, seed=0)
        zero_b = problem_from_arrays(problem.a.to_dense(), np.zeros((7, 2)), np.eye(2))
        x1, lam1 = initialize(zero_b)
        np.testing.assert_allclose(x1, zero_b.ground.vectors, atol=1e-12)
        np.testing.assert_allclose(lam1, zero_b.ground.d_r * np.eye(2), atol=1e-12)

    def test_multiplier_bounded_by_ground_level(self):
        for seed in range(8):
            problem = rand_problem(9, 3, seed=seed)
            x1, lam1 = initialize(problem)
            assert stiefel_defect(x1) <= 1e-12
            c_inv_half = problem.c_power(-0.5)
            gammas = np.linalg.eigvalsh(sym(c_inv_half @ lam1 @ c_inv_half))
            assert gammas.max() <= problem.ground.d_r + 1e-10


class TestSqpDirection:
    def test_zero_at_surrogate_ground_critical(self, e1):
        # at X1 the right side lies in the ground span, which the projector kills
        model = surrogate(e1, X1)
        lam = multiplier(e1, X1)
        sigma = sigma_nondegeneracy(e1.ground, model.b_k, e1.c)
        lam_safe = safeguard(lam, e1.c, e1.ground.d_r, sigma)
        z, _ = sqp_direction(e1, model, X1, lam_safe)
        assert np.linalg.norm(z) <= 1e-12

    def test_equation_residual_and_orthogonality(self, e1):
        x = np.eye(3)[:, 1:]  # [e2, e3]
        model = surrogate(e1, x)
        lam = multiplier(e1, x)
        sigma = sigma_nondegeneracy(e1.ground, model.b_k, e1.c)
        lam_safe = safeguard(lam, e1.c, e1.ground.d_r, sigma)
        z, _ = sqp_direction(e1, model, x, lam_safe, cg_tol=1e-12)
        vg = e1.ground.vectors
        assert np.linalg.norm(vg.T @ z) <= 1e-10

        def project(y):
            return y - vg @ (vg.T @ y)

        e_k = -model.a_tilde.apply(x) @ e1.c + model.b_k + x @ lam_safe
        lhs = project(model.a_tilde.apply(project(z))) @ e1.c - z @ lam_safe
        assert np.linalg.norm(lhs - project(e_k)) <= 1e-8

    def test_degenerate_sigma_runs_without_curvature_error(self):
        # B = 0 makes sigma vanish; the floored safeguard keeps the system PSD
        problem = rand_problem(8, 2, seed=1)
        zero_b = problem_from_arrays(problem.a.to_dense(), np.zeros((8, 2)), np.eye(2))
        x = random_point(8, 2, seed=1)
        model = surrogate(zero_b, x)
        lam = multiplier(zero_b, x)
        from orthoquad.model import safeguard_sigma_floor

        sigma = safeguard_sigma_floor(0.0, zero_b.ground.d_r)
        lam_safe = safeguard(lam, zero_b.c, zero_b.ground.d_r, sigma)
        z, iters = sqp_direction(zero_b, model, x, lam_safe)
        assert np.all(np.isfinite(z))
        assert iters >= 0


class TestBuildSubspace:
    def test_dependent_columns_pruned(self):
        problem = rand_problem(9, 2, seed=2)
        zero_b = problem_from_arrays(problem.a.to_dense(), np.zeros((9, 2)), np.eye(2))
        vg = zero_b.ground.vectors
        grad = zero_b.a.apply(vg) @ zero_b.c  # = vg diag(d): inside the ground span
        v_k = build_subspace(zero_b.ground, vg, grad, None)
        assert v_k.shape[1] == 2  # far below the 4r cap

    def test_first_iteration_shape(self, e1):
        x1, lam1 = initialize(e1)
        model = surrogate(e1, x1)
        from orthoquad import euclidean_grad

        g = euclidean_grad(e1, x1)
        v_k = build_subspace(e1.ground, x1, g, None)
        assert v_k.shape[1] <= 8
        assert np.abs(v_k.T @ v_k - np.eye(v_k.shape[1])).max() <= 1e-12

    def test_full_dimension_cap(self):
        # independent blocks at n = 4r make the subspace the whole space
        problem = rand_problem(8, 2, seed=3)
        x = random_point(8, 2, seed=33)
        from orthoquad import euclidean_grad

        rng = np.random.default_rng(3)
        v_k = build_subspace(
            problem.ground, x, euclidean_grad(problem, x), rng.standard_normal((8, 2))
        )
        assert v_k.shape[1] == 8


class TestReduceModel:
    def test_identity_reduction(self, e1):
        x = random_point(3, 2, seed=4)
        model = surrogate(e1, x)
        a_red, b_red = reduce_model(model, np.eye(3))
        np.testing.assert_allclose(a_red, model.a_tilde.to_dense(), atol=1e-12)
        np.testing.assert_allclose(b_red, model.b_k, atol=1e-13)

    def test_compressed_ground_eigenvalue(self, e1):
        x1, _ = initialize(e1)
        model = surrogate(e1, x1)
        from orthoquad import euclidean_grad

        v_k = build_subspace(e1.ground, x1, euclidean_grad(e1, x1), None)
        a_red, _ = reduce_model(model, v_k)
        vg_red = v_k.T @ e1.ground.vectors
        assert np.linalg.norm(a_red @ vg_red - e1.ground.d_r * vg_red) <= 1e-10

    def test_symmetry(self):
        problem = rand_problem(10, 2, seed=5)
        x = random_point(10, 2, seed=5)
        model = surrogate(problem, x)
        from orthoquad import euclidean_grad

        v_k = build_subspace(problem.ground, x, euclidean_grad(problem, x), None)
        a_red, _ = reduce_model(model, v_k)
        assert np.abs(a_red - a_red.T).max() <= 1e-12


class TestSubproblem:
    def test_orthogonal_group_case(self):
        # l = r: St(r, r) is the orthogonal group; any output stays orthogonal
        rng = np.random.default_rng(6)
        a_red = np.diag([1.0, 2.0])
        b_red = rng.standard_normal((2, 2))
        c = np.eye(2)
        y0, _ = np.linalg.qr(rng.standard_normal((2, 2)))
        out = subproblem_solve(a_red, b_red, c, y0, np.zeros((2, 2)), 2.0, 0.5, SsmOptions())
        assert stiefel_defect(out.y) <= 1e-10

    def test_full_space_reproduces_worked_minimum(self, e1):
        model = surrogate(e1, X1)
        sigma = sigma_nondegeneracy(e1.ground, model.b_k, e1.c)
        lam_safe = safeguard(multiplier(e1, X1), e1.c, e1.ground.d_r, sigma)
        vg_red = e1.ground.vectors
        out = subproblem_solve(
            model.a_tilde.to_dense(), model.b_k, e1.c, X1, lam_safe,
            e1.ground.d_r, sigma, SsmOptions(), vg_red=vg_red,
        )
        assert objective(e1, out.y) == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(out.y, X1, atol=1e-8)

    def test_random_reduced_self_consistency(self):
        rng = np.random.default_rng(7)
        a_red = rng.standard_normal((8, 8))
        a_red = 0.5 * (a_red + a_red.T)
        b_red = rng.standard_normal((8, 2))
        c = np.eye(2)
        w = np.linalg.eigvalsh(a_red)
        d_r = w[1]
        y0 = random_point(8, 2, seed=7)
        xi0 = safeguard(sym(y0.T @ (a_red @ y0 @ c - b_red)), c, d_r, 0.4)
        out = subproblem_solve(a_red, b_red, c, y0, xi0, d_r, 0.4, SsmOptions())
        assert out.residual <= 1e-9 * max(1.0, np.linalg.norm(b_red))
        xi_check = sym(out.y.T @ (a_red @ out.y @ c - b_red))
        assert np.linalg.norm(out.xi - xi_check) <= 1e-8

    def test_escape_from_non_qualified_stationary_point(self):
        # a stationary start whose multiplier exceeds the ground level must be
        # abandoned with a strict objective decrease
        problem = make_e1(delta1=1.5, delta2=0.5)
        x_bar = np.array([[-1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert np.linalg.norm(riemannian_grad(problem, x_bar)) <= 1e-13
        model = surrogate(problem, x_bar)
        a_full = model.a_tilde.to_dense()
        lam_bar = sym(x_bar.T @ (a_full @ x_bar @ problem.c - model.b_k))
        gammas = np.linalg.eigvalsh(lam_bar)
        assert gammas.max() > problem.ground.d_r  # not qualified
        sigma = sigma_nondegeneracy(problem.ground, model.b_k, problem.c)
        out = subproblem_solve(
            a_full, model.b_k, problem.c, x_bar, lam_bar,
            problem.ground.d_r, sigma, SsmOptions(), vg_red=problem.ground.vectors,
        )
        f_bar = model.value(x_bar, problem.c)
        f_out = model.value(out.y, problem.c)
        assert out.escapes >= 1
        assert f_out < f_bar - 1e-10


class TestNewtonDirection:
    def test_zero_rhs(self):
        y = random_point(4, 2, seed=8)
        z, iters, fallback = newton_direction_subspace(
            np.diag([1.0, 2.0, 3.0, 4.0]), np.eye(2), y, np.zeros((2, 2)), np.zeros((4, 2))
        )
        assert np.linalg.norm(z) == 0.0
        assert not fallback

    def test_diagonal_scalar_closed_form(self):
        # sphere case l = 3, r = 1 at y = e1: tangent entries solve scalar equations
        a_red = np.diag([1.0, 2.0, 5.0])
        c = np.eye(1)
        y = np.array([[1.0], [0.0], [0.0]])
        xi = np.array([[0.5]])
        e_j = np.array([[0.0], [0.3], [-0.4]])
        z, _, fallback = newton_direction_subspace(a_red, c, y, xi, e_j, cg_tol=1e-14)
        assert not fallback
        np.testing.assert_allclose(z[1, 0], 0.3 / (2.0 - 0.5), atol=1e-10)
        np.testing.assert_allclose(z[2, 0], -0.4 / (5.0 - 0.5), atol=1e-10)
        assert abs(z[0, 0]) <= 1e-12

    def test_descent_direction(self):
        rng = np.random.default_rng(9)
        a_red = rng.standard_normal((6, 6))
        a_red = 0.5 * (a_red + a_red.T)
        c = np.eye(2)
        y = random_point(6, 2, seed=9)
        b_red = rng.standard_normal((6, 2))
        xi = sym(y.T @ (a_red @ y @ c - b_red))
        w = np.linalg.eigvalsh(a_red)
        xi_safe = safeguard(xi, c, w[1], 0.5)
        e_j = -(a_red @ y @ c) + b_red + y @ xi
        z, _, _ = newton_direction_subspace(a_red, c, y, xi_safe, e_j)
        grad = -tangent_project(y, e_j)
        assert float(np.sum(grad * z)) < 0


class TestSsmSolve:
    def test_worked_instance(self, e1):
        report = ssm_solve(e1)
        assert report.termination == "converged"
        assert len(report.iterations) <= 5
        assert report.objective == pytest.approx(0.5, abs=1e-10)
        cert = report.certificate
        assert cert.qualified
        np.testing.assert_allclose(cert.lam, np.diag([0.5, 1.5]), atol=1e-8)

    def test_polar_factor_instance_attains_lower_bound(self):
        # equal ground eigenvalues with B spanning the ground space: the polar
        # factor of B is the unique global minimizer and the bound is tight
        from orthoquad import lower_bound, polar_project

        rng = np.random.default_rng(10)
        base = rng.standard_normal((8, 8))
        base = 0.5 * (base + base.T)
        w, vec = np.linalg.eigh(base)
        w[:2] = w[0]
        a = vec @ np.diag(w) @ vec.T
        vg = vec[:, :2]
        b = vg @ (rng.standard_normal((2, 2)) + 3 * np.eye(2))
        problem = problem_from_arrays(a, b, np.eye(2))
        report = ssm_solve(problem)
        assert report.objective == pytest.approx(lower_bound(problem), abs=1e-8)
        np.testing.assert_allclose(report.x, polar_project(b), atol=1e-6)

    def test_sphere_oracle_agreement(self):
        rng = np.random.default_rng(11)
        for trial in range(5):
            a = rng.standard_normal((50, 50))
            a = 0.5 * (a + a.T)
            b = rng.standard_normal(50)
            problem = problem_from_arrays(a, b[:, None], np.eye(1))
            report = ssm_solve(problem)
            x_oracle, _ = sphere_trs_oracle(a, b)
            assert report.objective == pytest.approx(
                objective(problem, x_oracle[:, None]), abs=1e-6
            )

    def test_monotone_objectives_and_sandwich(self):
        problem = rand_problem(15, 3, seed=12)
        report = ssm_solve(problem)
        objs = [rec.f for rec in report.iterations]
        assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(objs, objs[1:]))
        for rec in report.iterations:
            if rec.surrogate_next is None:
                continue
            slack = 1e-12 * max(1.0, abs(rec.f))
            assert rec.f_next <= rec.surrogate_next + slack
            assert rec.surrogate_next <= rec.f + slack

    def test_feasible_iterates(self):
        problem = rand_problem(12, 2, seed=13)
        defects = []
        ssm_solve(problem, iterate_hook=lambda k, x: defects.append(stiefel_defect(x)))
        assert defects and max(defects) <= 1e-10

    def test_multiplier_drift_vanishes(self):
        problem = rand_problem(12, 2, seed=14)
        report = ssm_solve(problem)
        shift_norm = (problem.ground.d_r - problem.ground.d).max()
        c_norm = np.linalg.norm(problem.c, 2)
        drifts = []
        for prev, rec in zip(report.iterations, report.iterations[1:]):
            if rec.multiplier_drift is None or prev.step_norm is None:
                continue
            drifts.append(rec.multiplier_drift)
            assert rec.multiplier_drift <= shift_norm * c_norm * prev.step_norm + 1e-10
        assert drifts and drifts[-1] <= 1e-7

    def test_final_certificate_qualified(self):
        for seed in range(5):
            problem = rand_problem(10, 2, seed=300 + seed, min_sigma=0.05)
            report = ssm_solve(problem)
            cert = report.certificate
            assert cert.qualified
            assert cert.gamma_max <= problem.ground.d_r + 1e-8

    def test_report_json_schema(self, e1):
        payload = ssm_solve(e1).to_json_dict()
        text = json.dumps(payload)
        parsed = json.loads(text)
        assert set(parsed) == {"iterations", "final", "termination", "wall_time_s"}
        assert set(parsed["iterations"][0]) == {
            "k", "f", "grad_norm", "gamma_max", "cg_iters", "subspace_rank",
        }
        assert set(parsed["final"]) == {"objective", "residual", "gamma", "qualified", "global"}

    def test_subspace_escape_through_outer_loop(self):
        # feeding a non-qualified stationary point as the incumbent must not stall
        problem = make_e1(delta1=1.5, delta2=0.5)
        report = ssm_solve(problem)
        oracle = multistart_oracle(problem, 200, seed=0)
        assert report.objective <= oracle.objective + 1e-8
        assert report.certificate.qualified


class TestDeterminism:
    def test_identical_reports_for_identical_inputs(self):
        problem = rand_problem(14, 2, seed=77)
        first = ssm_solve(problem)
        second = ssm_solve(problem)
        np.testing.assert_array_equal(first.x, second.x)
        assert [r.f for r in first.iterations] == [r.f for r in second.iterations]
        assert first.certificate.residual == second.certificate.residual


class TestSsmOptionsValidation:
    def test_rejects_bad_tolerances(self):
        with pytest.raises(ValueError):
            SsmOptions(tol_grad=0.0)
        with pytest.raises(ValueError):
            SsmOptions(max_outer=0)
        with pytest.raises(ValueError):
            SsmOptions(armijo_c1=1.5)

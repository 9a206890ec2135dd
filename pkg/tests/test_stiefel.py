import numpy as np
import pytest

from orthoquad import (
    RankDeficiencyError,
    orthonormal_complement,
    polar_project,
    random_point,
    retract,
    tangent_project,
)
from orthoquad import test_curve as curve  # alias keeps pytest from collecting it
from orthoquad.validation import stiefel_defect

from conftest import rand_tangent


class TestPolarProject:
    def test_positive_diagonal_scaling(self):
        y = np.array([[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
        np.testing.assert_allclose(polar_project(y), np.eye(3)[:, :2], atol=1e-14)

    def test_equal_norm_orthogonal_columns(self):
        y = np.array([[1.0, 1.0], [1.0, -1.0], [0.0, 0.0]])
        np.testing.assert_allclose(polar_project(y), y / np.sqrt(2.0), atol=1e-14)

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((7, 3))
        u, _, vt = np.linalg.svd(y, full_matrices=False)
        np.testing.assert_allclose(polar_project(y), u @ vt, atol=1e-10)

    def test_identity_on_manifold_points(self):
        for seed in range(4):
            x = random_point(9, 3, seed=seed)
            np.testing.assert_allclose(polar_project(x), x, atol=1e-12)

    def test_rank_deficient_raises(self):
        y = np.zeros((4, 2))
        y[:, 0] = [1.0, 0.0, 0.0, 0.0]
        y[:, 1] = [2.0, 0.0, 0.0, 0.0]
        with pytest.raises(RankDeficiencyError):
            polar_project(y)


class TestTangentProject:
    def test_normal_space_maps_to_zero(self):
        rng = np.random.default_rng(1)
        x = random_point(6, 2, seed=1)
        s = rng.standard_normal((2, 2))
        s = 0.5 * (s + s.T)
        np.testing.assert_allclose(tangent_project(x, x @ s), 0.0, atol=1e-13)

    def test_horizontal_unchanged(self):
        rng = np.random.default_rng(2)
        x = random_point(6, 2, seed=2)
        u = rng.standard_normal((6, 2))
        u -= x @ (x.T @ u)  # now X^T u = 0
        np.testing.assert_allclose(tangent_project(x, u), u, atol=1e-13)

    def test_skew_characterization_and_idempotence(self):
        rng = np.random.default_rng(3)
        x = random_point(8, 3, seed=3)
        u = rng.standard_normal((8, 3))
        p = tangent_project(x, u)
        skew = x.T @ p
        assert np.abs(skew + skew.T).max() <= 1e-12
        np.testing.assert_allclose(tangent_project(x, p), p, atol=1e-13)

    def test_orthogonal_decomposition(self):
        rng = np.random.default_rng(4)
        x = random_point(7, 2, seed=4)
        u = rng.standard_normal((7, 2))
        w = rng.standard_normal((7, 2))
        residual = u - tangent_project(x, u)
        assert abs(np.sum(residual * tangent_project(x, w))) <= 1e-12


class TestRetract:
    def test_zero_step(self):
        x = random_point(5, 2, seed=5)
        v = rand_tangent(x, np.random.default_rng(5))
        np.testing.assert_allclose(retract(x, v, 0.0), x, atol=1e-14)

    def test_planar_rotation_geometry(self):
        x = np.eye(3)[:, :2]
        v = np.zeros((3, 2))
        v[2, 0] = 1.0  # e3 e1^T
        out = retract(x, v, 1.0)
        expected = np.zeros((3, 2))
        expected[:, 0] = [1.0 / np.sqrt(2.0), 0.0, 1.0 / np.sqrt(2.0)]
        expected[:, 1] = [0.0, 1.0, 0.0]
        np.testing.assert_allclose(out, expected, atol=1e-13)

    def test_taylor_order(self):
        x = random_point(9, 3, seed=6)
        v = rand_tangent(x, np.random.default_rng(6))
        v /= np.linalg.norm(v)
        errors = []
        steps = [1e-2, 5e-3, 2.5e-3]
        for t in steps:
            errors.append(np.linalg.norm(retract(x, v, t) - (x + t * v)))
        # second-order: error ratio tracks the squared step ratio
        assert errors[1] / errors[0] == pytest.approx(0.25, rel=0.15)
        assert errors[2] / errors[1] == pytest.approx(0.25, rel=0.15)

    def test_feasible_for_large_steps(self):
        x = random_point(10, 4, seed=7)
        v = rand_tangent(x, np.random.default_rng(7))
        for t in (0.3, 1.0, 10.0, 100.0):
            assert stiefel_defect(retract(x, v, t)) <= 1e-10


class TestRandomPoint:
    def test_square_is_orthogonal(self):
        x = random_point(3, 3, seed=0)
        assert stiefel_defect(x) <= 1e-12

    def test_deterministic(self):
        np.testing.assert_array_equal(random_point(5, 2, seed=7), random_point(5, 2, seed=7))

    def test_feasibility(self):
        assert stiefel_defect(random_point(50, 4, seed=1)) <= 1e-12


class TestTestCurve:
    def _setup(self, seed):
        rng = np.random.default_rng(seed)
        x = random_point(8, 3, seed=seed)
        x_perp = orthonormal_complement(x)
        d0 = rng.standard_normal((3, 3))
        d0 = 0.5 * (d0 - d0.T)
        d1 = rng.standard_normal((5, 3))
        return x, x_perp, d0, d1

    def test_zero_time(self):
        x, x_perp, d0, d1 = self._setup(0)
        np.testing.assert_allclose(curve(x, x_perp, d0, d1, 0.0), x, atol=1e-13)

    def test_planar_rotation(self):
        x = np.eye(3)[:, :2]
        x_perp = np.eye(3)[:, 2:]
        d0 = np.zeros((2, 2))
        d1 = np.array([[1.0, 0.0]])  # rotate e1 toward e3
        t = 0.7
        out = curve(x, x_perp, d0, d1, t)
        expected = np.zeros((3, 2))
        expected[:, 0] = [np.cos(t), 0.0, np.sin(t)]
        expected[:, 1] = [0.0, 1.0, 0.0]
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_finite_difference_derivative(self):
        x, x_perp, d0, d1 = self._setup(2)
        h = 1e-4
        fd = (curve(x, x_perp, d0, d1, h) - curve(x, x_perp, d0, d1, -h)) / (2 * h)
        expected = x @ d0 + x_perp @ d1
        assert np.linalg.norm(fd - expected) <= 1e-6

    def test_stays_on_manifold(self):
        x, x_perp, d0, d1 = self._setup(3)
        for t in np.linspace(-1.0, 1.0, 9):
            assert stiefel_defect(curve(x, x_perp, d0, d1, t)) <= 1e-10

    def test_rejects_non_skew(self):
        x, x_perp, _, d1 = self._setup(4)
        with pytest.raises(ValueError):
            curve(x, x_perp, np.eye(3), d1, 0.1)

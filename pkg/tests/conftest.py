import numpy as np
import pytest

from orthoquad import problem_from_arrays

E1_D = (1.0, 2.0, 4.0)


def make_e1(delta1=0.5, delta2=0.5):
    """Worked 3x2 instance: diagonal system matrix, diagonal linear term, C = I."""
    a = np.diag(E1_D)
    b = np.array([[delta1, 0.0], [0.0, delta2], [0.0, 0.0]])
    return problem_from_arrays(a, b, np.eye(2))


def rand_sym(n, rng):
    m = rng.standard_normal((n, n))
    return 0.5 * (m + m.T)


def rand_spd(r, rng, shift=0.3):
    g = rng.standard_normal((r, r))
    return g @ g.T + shift * np.eye(r)


def rand_problem(n, r, seed, identity_c=False, min_sigma=None):
    """Random dense instance; optional rejection until sigma exceeds min_sigma."""
    from orthoquad import sigma_nondegeneracy

    rng = np.random.default_rng(seed)
    while True:
        a = rand_sym(n, rng)
        b = rng.standard_normal((n, r))
        c = np.eye(r) if identity_c else rand_spd(r, rng)
        problem = problem_from_arrays(a, b, c)
        if min_sigma is None:
            return problem
        if sigma_nondegeneracy(problem.ground, b, c) > min_sigma:
            return problem


def rand_tangent(x, rng):
    """Random tangent vector at a Stiefel point."""
    from orthoquad import tangent_project

    return tangent_project(x, rng.standard_normal(x.shape))


@pytest.fixture
def e1():
    return make_e1()

"""
Configuration for pytest test suite.
This module contains fixtures shared by the unit, integration and e2e tests.
"""
import numpy as np
import pytest

from src.models.grid import Grid
from src.models.linops import DenseOperator, IdentityOperator, OperatorFamily, make_difference_1d
from src.models.potential import POTENTIALS, get_potential
from src.models.problem import ImplicitConcaveInstance, ReconstructionProblem
from src.repositories.csv_grid import CsvGridRepository
from src.repositories.pgm_grid import PgmGridRepository


POTENTIAL_IDS = list(POTENTIALS)
NONNEGATIVE_POTENTIAL_IDS = ["exp", "geman-mcclure", "sine"]


def make_instance(potential_id, b, beta, A=None, regularizers=None):
    """Build an instance with first differences unless told otherwise."""
    b = np.asarray(b, dtype=float)
    A = A if A is not None else IdentityOperator(b.size)
    regularizers = regularizers if regularizers is not None else make_difference_1d(A.in_dim)
    problem = ReconstructionProblem(A, b, regularizers, beta, get_potential(potential_id))
    return ImplicitConcaveInstance(problem)


@pytest.fixture
def rng():
    """A fixed-seed numpy generator for sampled properties."""
    return np.random.default_rng(20240617)


@pytest.fixture(params=POTENTIAL_IDS)
def potential(request):
    """Every catalog potential."""
    return get_potential(request.param)


@pytest.fixture
def scalar_instance():
    """n = 1, A = [1], b = [0], G_1 = [1], beta = 1, exp."""
    problem = ReconstructionProblem(
        IdentityOperator(1),
        [0.0],
        OperatorFamily([DenseOperator([[1.0]])]),
        1.0,
        get_potential("exp"),
    )
    return ImplicitConcaveInstance(problem)


@pytest.fixture
def small_instance_factory():
    """Factory for small random instances with a well-conditioned dense A."""

    def factory(potential_id, n=8, beta=0.5, seed=0):
        gen = np.random.default_rng(seed)
        A = DenseOperator(np.eye(n) + 0.1 * gen.normal(size=(n, n)) / np.sqrt(n))
        return make_instance(potential_id, gen.uniform(0.0, 1.0, n), beta, A=A)

    return factory


@pytest.fixture
def piecewise_signal():
    """256-sample piecewise-constant signal in [0, 1]."""
    levels = [0.2, 0.8, 0.4, 0.9, 0.1, 0.6, 0.3, 0.7]
    return np.repeat(levels, 32)


@pytest.fixture
def step_image():
    """32x32 image with a vertical and a horizontal step edge."""
    img = np.full((32, 32), 0.2)
    img[:, 16:] = 0.8
    img[20:, :8] = 0.5
    return img


@pytest.fixture
def csv_repository():
    return CsvGridRepository()


@pytest.fixture
def pgm_repository():
    return PgmGridRepository()


@pytest.fixture
def signal_csv(tmp_path, csv_repository, piecewise_signal):
    """The piecewise signal written as a one-column CSV."""
    path = tmp_path / "signal.csv"
    csv_repository.write(Grid.from_array(piecewise_signal), str(path))
    return path

"""Unit tests for the half-quadratic block coordinate descent."""
import numpy as np
import pytest
from pydantic import ValidationError

from src.cli.schemas import InitMode, SolverConfig
from src.models.linops import DenseOperator, IdentityOperator, OperatorFamily, make_difference_1d
from src.models.problem import SigmaVector
from src.services import icf, oracle
from src.services.hq_solver import HalfQuadraticSolver, cg, solve
from src.services.measurements import gaussian_noise
from src.utils.errors import ConfigError, NotConverged, NumericalError

from src.tests.conftest import NONNEGATIVE_POTENTIAL_IDS, make_instance


TIGHT = SolverConfig(max_outer_iters=5000, outer_tol_rel_obj=1e-14, outer_tol_rel_x=1e-10, cg_tol=1e-12)
ROOMY = SolverConfig(max_outer_iters=2000)


def _scalar_problem():
    return make_instance("exp", [1.0], 1.0, regularizers=OperatorFamily([DenseOperator([[1.0]])]))


def _noisy_signal(clean, std=0.1, seed=42):
    return clean + gaussian_noise(clean.size, std, seed)


@pytest.mark.unit
class TestConjugateGradients:
    """cg on small symmetric systems."""

    def test_identity_one_iteration(self):
        rhs = np.array([1.0, -2.0, 3.0])

        x, iters, residual = cg(lambda v: v, rhs, np.zeros(3), 1e-10, 10)

        np.testing.assert_array_equal(x, rhs)
        assert iters == 1
        assert residual == 0.0

    def test_diagonal(self):
        x, _, _ = cg(lambda v: 2.0 * v, 2.0 * np.ones(5), np.zeros(5), 1e-12, 10)
        np.testing.assert_allclose(x, np.ones(5), rtol=0, atol=1e-12)

    def test_random_spd_matches_direct_solve(self, rng):
        # Arrange
        B = rng.normal(size=(10, 10))
        M = B @ B.T + 10.0 * np.eye(10)
        rhs = rng.normal(size=10)

        # Act
        x, iters, residual = cg(lambda v: M @ v, rhs, np.zeros(10), 1e-12, 100)

        # Assert
        np.testing.assert_allclose(x, np.linalg.solve(M, rhs), rtol=0, atol=1e-8)
        assert iters <= 15
        assert residual <= 1e-12

    def test_well_conditioned_finishes_in_about_n_steps(self, rng):
        n = 32
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        M = Q @ np.diag(rng.uniform(1.0, 4.0, n)) @ Q.T
        _, iters, residual = cg(lambda v: M @ v, rng.normal(size=n), np.zeros(n), 1e-8, 10 * n)
        assert iters <= n + 5
        assert residual <= 1e-8

    def test_zero_rhs(self):
        x, iters, residual = cg(lambda v: v, np.zeros(4), np.ones(4), 1e-10, 10)
        assert x.tolist() == [0.0] * 4
        assert (iters, residual) == (0, 0.0)

    def test_negative_curvature(self):
        with pytest.raises(NumericalError):
            cg(lambda v: -v, np.ones(3), np.zeros(3), 1e-10, 10)

    def test_budget_exhausted_reports_residual(self, rng):
        M = np.diag(np.linspace(1.0, 1000.0, 50))
        _, iters, residual = cg(lambda v: M @ v, rng.normal(size=50), np.zeros(50), 1e-14, 3)
        assert iters == 3
        assert residual > 1e-14


@pytest.mark.unit
class TestHalfSteps:
    """sigma_step and x_step in isolation."""

    def test_sigma_step_at_origin(self):
        inst = make_instance("exp", np.zeros(5), 1.0)
        sigma = HalfQuadraticSolver().sigma_step(inst, np.zeros(5))
        assert sigma.values.tolist() == [1.0] * 4

    def test_sine_clipped_everywhere(self):
        """All jumps beyond sqrt(pi/2) switch the regularizer off."""
        inst = make_instance("sine", np.zeros(4), 1.0)
        sigma = HalfQuadraticSolver().sigma_step(inst, [0.0, 2.0, 4.0, 6.0])
        assert sigma.values.tolist() == [0.0, 0.0, 0.0]

    def test_zero_sigma_returns_observation(self):
        # Arrange
        b = np.array([0.3, 0.9, 0.1, 0.5])
        inst = make_instance("sine", b, 1.0)
        sigma = SigmaVector(np.zeros(3), inst.potential)

        # Act
        x, iters = HalfQuadraticSolver().x_step(inst, sigma, np.zeros(4))

        # Assert
        np.testing.assert_allclose(x, b, rtol=0, atol=1e-12)
        assert iters == 1

    def test_matches_dense_normal_equations(self, rng):
        """n = 6 with a dense A against an explicitly assembled normal matrix."""
        # Arrange
        n, beta = 6, 0.7
        A = np.eye(n) + 0.2 * rng.normal(size=(n, n))
        inst = make_instance("geman-mcclure", rng.normal(size=n), beta, A=DenseOperator(A))
        sigma = SigmaVector(rng.uniform(0.1, 1.0, n - 1), inst.potential)
        G = np.diff(np.eye(n), axis=0)
        normal = A.T @ A + beta * G.T @ np.diag(sigma.values) @ G

        # Act
        x, _ = HalfQuadraticSolver().x_step(inst, sigma, np.zeros(n))

        # Assert
        np.testing.assert_allclose(x, np.linalg.solve(normal, A.T @ inst.problem.b), rtol=0, atol=1e-8)

    def test_x_step_does_not_increase_augmented(self, potential, rng):
        inst = make_instance(potential.id, rng.uniform(0, 1, 16), 0.4)
        x_warm = np.cumsum(rng.uniform(0.3, 1.0, 16))
        sigma = icf.sigma_update(inst, x_warm)

        x, _ = HalfQuadraticSolver().x_step(inst, sigma, x_warm)

        assert icf.augmented_value(inst, x, sigma) <= icf.augmented_value(inst, x_warm, sigma) + 1e-12

    def test_proximal_term(self):
        """With mu > 0 the x-step solves (I + mu I) x = b + mu x_warm when sigma = 0."""
        b = np.array([1.0, 0.0, 1.0])
        inst = make_instance("sine", b, 1.0)
        solver = HalfQuadraticSolver(SolverConfig(tikhonov_mu=1.0))

        x, _ = solver.x_step(inst, SigmaVector(np.zeros(2), inst.potential), np.ones(3))

        np.testing.assert_allclose(x, (b + 1.0) / 2.0, rtol=0, atol=1e-12)

    def test_proximal_residual_uses_warm_start(self, rng):
        """The x-step residual is taken against A^T b + mu x_warm, not A^T b."""
        # Arrange
        inst = make_instance("exp", rng.normal(size=6), 0.5)
        solver = HalfQuadraticSolver(SolverConfig(tikhonov_mu=0.3, cg_tol=1e-12))
        sigma = SigmaVector(rng.uniform(0.2, 1.0, inst.m), inst.potential)
        x_warm = rng.normal(size=6)

        # Act
        x, _ = solver.x_step(inst, sigma, x_warm)

        # Assert
        rhs = inst.adjoint_b + 0.3 * x_warm
        residual = solver.normal_operator(inst, sigma).matvec(x) - rhs
        assert np.linalg.norm(residual) <= 1e-10 * np.linalg.norm(rhs)
        assert np.linalg.norm(solver.normal_operator(inst, sigma).matvec(x) - inst.adjoint_b) > 1e-3

    def test_cg_budget_exhausted(self, piecewise_signal):
        inst = make_instance("exp", piecewise_signal, 5.0)
        solver = HalfQuadraticSolver(SolverConfig(cg_max_iters=1))
        sigma = SigmaVector(np.full(inst.m, 0.5), inst.potential)

        with pytest.raises(NotConverged) as info:
            solver.x_step(inst, sigma, np.zeros(inst.n))

        assert info.value.x is not None


@pytest.mark.unit
class TestInitialPoint:
    def test_identity_starts_from_observation(self):
        inst = make_instance("exp", [0.1, 0.2, 0.3], 1.0)
        np.testing.assert_array_equal(HalfQuadraticSolver().initial_point(inst), [0.1, 0.2, 0.3])

    def test_dense_starts_from_adjoint(self):
        A = DenseOperator([[2.0, 0.0], [0.0, 3.0]])
        inst = make_instance("exp", [1.0, 1.0], 1.0, A=A)
        np.testing.assert_array_equal(HalfQuadraticSolver().initial_point(inst), [2.0, 3.0])

    def test_zero_and_given(self):
        inst = make_instance("exp", [0.1, 0.2], 1.0)
        zero = HalfQuadraticSolver(SolverConfig(init_mode=InitMode.ZERO)).initial_point(inst)
        given = HalfQuadraticSolver().initial_point(inst, [5.0, 6.0])
        assert zero.tolist() == [0.0, 0.0]
        assert given.tolist() == [5.0, 6.0]

    def test_given_without_x0(self):
        inst = make_instance("exp", [0.1, 0.2], 1.0)
        with pytest.raises(ConfigError):
            HalfQuadraticSolver(SolverConfig(init_mode=InitMode.GIVEN)).initial_point(inst)

    def test_observation_needs_square_a(self):
        A = DenseOperator(np.ones((3, 2)))
        inst = make_instance("exp", [1.0, 1.0, 1.0], 1.0, A=A, regularizers=make_difference_1d(2))
        with pytest.raises(ConfigError):
            HalfQuadraticSolver(SolverConfig(init_mode=InitMode.FROM_OBSERVATION)).initial_point(inst)


@pytest.mark.unit
class TestSolve:
    """Full runs of the block descent."""

    def test_scalar_matches_grid_search(self):
        """(x - 1)^2 + 1 - exp(-x^2) minimized on [-2, 2]."""
        # Arrange
        inst = _scalar_problem()

        # Act
        result = solve(inst, TIGHT)
        x_grid, _ = oracle.grid_minimize_1d(
            lambda t: (t - 1.0) ** 2 + 1.0 - np.exp(-t * t), -2.0, 2.0, 1e-5, vectorized=True
        )

        # Assert
        assert abs(icf.f_grad(inst, result.x)[0]) <= 1e-5
        assert result.x[0] == pytest.approx(x_grid, abs=1e-4)

    def test_vanishing_beta_returns_observation(self, piecewise_signal):
        b = _noisy_signal(piecewise_signal)
        result = solve(make_instance("exp", b, 1e-12), ROOMY)
        np.testing.assert_allclose(result.x, b, rtol=0, atol=1e-5)

    def test_denoising_improves_error(self, piecewise_signal):
        b = _noisy_signal(piecewise_signal)
        result = solve(make_instance("exp", b, 0.5), ROOMY)
        assert np.mean((result.x - piecewise_signal) ** 2) < np.mean((b - piecewise_signal) ** 2)

    @pytest.mark.parametrize("potential_id", NONNEGATIVE_POTENTIAL_IDS)
    def test_trace_invariants(self, potential_id, small_instance_factory):
        # Arrange
        inst = small_instance_factory(potential_id, beta=0.3)

        # Act
        result = solve(inst, TIGHT)
        trace = result.trace
        scale = 1.0 + max(abs(v) for v in trace.augmented_values)

        # Assert
        assert trace.max_ascent() <= 1e-12 * scale
        assert trace.max_sigma_step_gap() <= 1e-9 * scale
        assert min(trace.f_values) >= 0.0
        assert min(trace.augmented_values) >= -1e-9

    def test_log_staircase(self):
        """Tall plateaus keep every jump far from the log guard."""
        # Arrange
        b = np.cumsum([0.0, 3.0, 3.0, -3.0, 3.0, -3.0, -3.0])
        inst = make_instance("log", b, 0.1)

        # Act
        result = solve(inst, TIGHT)
        scale = 1.0 + max(abs(v) for v in result.trace.augmented_values)

        # Assert
        assert result.trace.max_ascent() <= 1e-12 * scale
        assert icf.stationarity_report(inst, result.x, result.sigma).correspondence_ok

    @pytest.mark.parametrize("potential_id", NONNEGATIVE_POTENTIAL_IDS)
    def test_converged_output_is_stationary(self, potential_id, small_instance_factory):
        inst = small_instance_factory(potential_id, beta=0.3, seed=3)

        result = solve(inst, TIGHT)
        report = icf.stationarity_report(inst, result.x, result.sigma)

        assert report.correspondence_ok, report

    def test_callback_sees_feasible_sigma(self, small_instance_factory):
        inst = small_instance_factory("sine")
        seen = []

        def record(k, x, sigma):
            assert inst.potential.sigma_domain.closure_contains(sigma.values)
            seen.append(k)

        result = solve(inst, callback=record)

        assert seen == list(range(len(result.trace)))

    def test_outer_budget_exhausted(self, piecewise_signal):
        # Arrange
        inst = make_instance("geman-mcclure", _noisy_signal(piecewise_signal), 0.5)

        # Act
        with pytest.raises(NotConverged) as info:
            solve(inst, SolverConfig(max_outer_iters=1))

        # Assert
        assert len(info.value.trace) == 2
        assert info.value.x.shape == (256,)
        assert len(info.value.sigma) == 255

    def test_deterministic(self, piecewise_signal):
        inst = make_instance("exp", _noisy_signal(piecewise_signal), 0.5)
        first = solve(inst, ROOMY)
        second = solve(inst, ROOMY)
        assert first.trace.to_frame().equals(second.trace.to_frame())
        np.testing.assert_array_equal(first.x, second.x)

    def test_identity_a_without_regularization_effect(self):
        """Flat b is already optimal: one iteration, no movement."""
        inst = make_instance("exp", np.full(6, 0.4), 1.0, A=IdentityOperator(6))
        result = solve(inst)
        np.testing.assert_allclose(result.x, 0.4, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("field, value", [("cg_tol", 0.0), ("max_outer_iters", 0), ("tikhonov_mu", -1.0)])
    def test_invalid_config(self, field, value):
        with pytest.raises(ValidationError):
            SolverConfig(**{field: value})

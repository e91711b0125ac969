import numpy as np
from django.test import SimpleTestCase

from reconstruction.energy_model import QuadraticEnergy, ZeroEnergy
from reconstruction.exceptions import ConfigError, DivergenceError, ShapeError
from reconstruction.solver import (
    DataTerm,
    SolverConfig,
    apgd,
    conjugate_gradient,
    initial_estimate,
    map_reconstruct,
    objective,
    prox_data,
)
from reconstruction.tomography import Geometry, forward_project, system_matrix


class StubbornEnergy(ZeroEnergy):
    """Reports zero energy at the extrapolated point but one everywhere else."""

    def energy(self, x):
        return 1.0

    def energy_and_grad_input(self, x):
        return 0.0, np.zeros_like(np.asarray(x, dtype=float))


class NanEnergy(ZeroEnergy):
    def energy_and_grad_input(self, x):
        return float('nan'), np.zeros_like(np.asarray(x, dtype=float))


class DiagonalQuadratic:
    """Separable quadratic 1/2 sum c (x - 1)^2 with minimum 0."""

    def __init__(self, curvature):
        self.curvature = curvature

    def energy(self, x):
        return 0.5 * float(np.sum(self.curvature * (x - 1.0) ** 2))

    def energy_and_grad_input(self, x):
        return self.energy(x), self.curvature * (x - 1.0)


def small_tomographic_term(size=8, n_angles=6, sigma2=1.0, seed=0):
    geometry = Geometry.parallel((size, size), n_angles)
    image = np.random.default_rng(seed).uniform(size=(size, size))
    return DataTerm.tomographic(forward_project(image, geometry), sigma2), geometry


class DataTermTests(SimpleTestCase):
    def test_identity_value_and_gradient(self):
        term = DataTerm.identity(np.ones((2, 2)), sigma2=0.5)
        x = np.zeros((2, 2))
        self.assertAlmostEqual(term.value(x), 4.0)
        np.testing.assert_allclose(term.gradient(x), -2.0 * np.ones((2, 2)))

    def test_none_kind_is_zero(self):
        term = DataTerm.none((3, 3))
        self.assertEqual(term.value(np.ones((3, 3))), 0.0)
        self.assertFalse(term.gradient(np.ones((3, 3))).any())

    def test_tomographic_gradient_matches_matrix(self):
        term, geometry = small_tomographic_term(sigma2=2.0)
        matrix = system_matrix(geometry)
        x = np.random.default_rng(5).uniform(size=(8, 8))
        expected = matrix.T @ (matrix @ x.ravel() - term.observation.ravel()) / 2.0
        np.testing.assert_allclose(term.gradient(x).ravel(), expected, atol=1e-10)

    def test_invalid_terms_rejected(self):
        with self.assertRaises(ConfigError):
            DataTerm.identity(np.zeros((2, 2)), sigma2=0.0)
        with self.assertRaises(ConfigError):
            DataTerm('poisson', np.zeros((2, 2)))
        with self.assertRaises(ShapeError):
            DataTerm('tomographic', np.zeros((3, 3)), geometry=Geometry.parallel((8, 8), 6))


class ConjugateGradientTests(SimpleTestCase):
    def test_solves_spd_system(self):
        rng = np.random.default_rng(0)
        basis = rng.standard_normal((6, 6))
        matrix = basis @ basis.T + 6 * np.eye(6)
        rhs = rng.standard_normal(6)
        x, breakdown = conjugate_gradient(lambda v: matrix @ v, rhs, np.zeros(6), 20)
        self.assertFalse(breakdown)
        np.testing.assert_allclose(x, np.linalg.solve(matrix, rhs), rtol=1e-8)

    def test_indefinite_system_reports_breakdown(self):
        matrix = np.diag([1.0, -1.0])
        x, breakdown = conjugate_gradient(lambda v: matrix @ v, np.array([0.0, 1.0]), np.zeros(2), 5)
        self.assertTrue(breakdown)
        np.testing.assert_array_equal(x, np.zeros(2))


class ProxTests(SimpleTestCase):
    def test_zero_alpha_is_identity(self):
        term, _ = small_tomographic_term()
        y = np.random.default_rng(1).uniform(size=(8, 8))
        np.testing.assert_array_equal(prox_data(y, 0.0, term), y)

    def test_identity_closed_form(self):
        f = np.random.default_rng(2).uniform(size=(4, 4))
        y = np.random.default_rng(3).uniform(size=(4, 4))
        term = DataTerm.identity(f, sigma2=0.25)
        np.testing.assert_allclose(prox_data(y, 0.5, term), (y + 2.0 * f) / 3.0)

    def test_tomographic_matches_dense_solve(self):
        term, geometry = small_tomographic_term()
        matrix = system_matrix(geometry).toarray()
        y = np.random.default_rng(4).uniform(size=(8, 8))
        c = 0.3
        expected = np.linalg.solve(
            np.eye(64) + c * matrix.T @ matrix, y.ravel() + c * matrix.T @ term.observation.ravel(),
        )
        x, breakdown = prox_data(y, c, term, cg_iters=64, return_flag=True)
        self.assertFalse(breakdown)
        np.testing.assert_allclose(x.ravel(), expected, rtol=1e-6, atol=1e-8)

    def test_negative_alpha_rejected(self):
        with self.assertRaises(ConfigError):
            prox_data(np.zeros((2, 2)), -1.0, DataTerm.identity(np.zeros((2, 2))))


class ApgdTests(SimpleTestCase):
    def test_quadratic_regularizer_closed_form(self):
        f = np.random.default_rng(0).uniform(size=(6, 6))
        term = DataTerm.identity(f, sigma2=0.5)
        regularizer = QuadraticEnergy(variance=2.0)
        for accelerated in (True, False):
            x, _ = apgd(term, regularizer, np.zeros((6, 6)), SolverConfig(iterations=300),
                        accelerated=accelerated)
            np.testing.assert_allclose(x, f * 2.0 / 2.5, atol=1e-6)

    def test_momentum_beats_plain_descent_at_fixed_step(self):
        # Curvatures spread over two decades; with alpha = 1/L and no step growth both
        # variants run the textbook fixed-step schemes.
        regularizer = DiagonalQuadratic(np.geomspace(1.0, 100.0, 64).reshape(8, 8))
        cfg = SolverConfig(iterations=50, alpha0=1e-2, gamma1=1.0 - 1e-9)
        gaps = {}
        for accelerated in (True, False):
            _, records = apgd(DataTerm.none((8, 8)), regularizer, np.zeros((8, 8)), cfg,
                              accelerated=accelerated)
            gaps[accelerated] = records[-1].energy
        self.assertLess(gaps[False], regularizer.energy(np.zeros((8, 8))))
        self.assertLess(gaps[True], 0.5 * gaps[False])

    def test_zero_regularizer_reaches_least_squares(self):
        geometry = Geometry.parallel((8, 8), 16)
        image = np.random.default_rng(6).uniform(size=(8, 8))
        term = DataTerm.tomographic(forward_project(image, geometry))
        matrix = system_matrix(geometry).toarray()
        oracle = np.linalg.lstsq(matrix, term.observation.ravel(), rcond=None)[0]
        x, _ = apgd(term, ZeroEnergy(), initial_estimate(term),
                    SolverConfig(iterations=60, cg_iters=64, alpha_max=1e4))
        np.testing.assert_allclose(matrix @ x.ravel(), matrix @ oracle, atol=1e-6)
        normal_residual = matrix.T @ (matrix @ x.ravel() - term.observation.ravel())
        self.assertLess(np.linalg.norm(normal_residual), 1e-6 * np.linalg.norm(matrix.T @ term.observation.ravel()))

    def test_tomographic_quadratic_matches_normal_equations(self):
        term, geometry = small_tomographic_term(sigma2=4.0)
        matrix = system_matrix(geometry).toarray()
        regularizer = QuadraticEnergy(variance=0.5)
        expected = np.linalg.solve(matrix.T @ matrix / 4.0 + 2.0 * np.eye(64),
                                   matrix.T @ term.observation.ravel() / 4.0)
        x, _ = apgd(term, regularizer, initial_estimate(term),
                    SolverConfig(iterations=400, cg_iters=64))
        np.testing.assert_allclose(x.ravel(), expected, atol=1e-5)

    def test_records_margin_and_descent(self):
        term, _ = small_tomographic_term(sigma2=1.0, seed=3)
        regularizer = QuadraticEnergy(variance=0.2, center=0.5)
        x0 = initial_estimate(term)
        x, records = apgd(term, regularizer, x0, SolverConfig(iterations=50))
        self.assertEqual([r.t for r in records], list(range(1, 51)))
        self.assertTrue(all(r.margin >= 0 for r in records))
        self.assertLessEqual(objective(term, regularizer, x), objective(term, regularizer, x0))
        self.assertAlmostEqual(records[-1].energy, objective(term, regularizer, x), places=8)

    def test_zero_iterations_returns_start(self):
        x0 = np.full((4, 4), 0.3)
        x, records = apgd(DataTerm.identity(np.zeros((4, 4))), ZeroEnergy(), x0,
                          SolverConfig(iterations=0))
        np.testing.assert_array_equal(x, x0)
        self.assertEqual(records, [])

    def test_step_size_underflow_diverges(self):
        term = DataTerm.identity(np.ones((4, 4)))
        with self.assertRaises(DivergenceError) as ctx:
            apgd(term, StubbornEnergy(), np.zeros((4, 4)), SolverConfig(iterations=5, alpha_min=1e-6))
        self.assertEqual(ctx.exception.step, 1)
        np.testing.assert_array_equal(ctx.exception.partial, np.zeros((4, 4)))

    def test_non_finite_regularizer_diverges(self):
        with self.assertRaises(DivergenceError):
            apgd(DataTerm.identity(np.ones((4, 4))), NanEnergy(), np.zeros((4, 4)), SolverConfig())

    def test_start_shape_checked(self):
        with self.assertRaises(ShapeError):
            apgd(DataTerm.identity(np.ones((4, 4))), ZeroEnergy(), np.zeros((5, 5)), SolverConfig())

    def test_mode_seeking_without_data(self):
        regularizer = QuadraticEnergy(variance=1.0, center=0.25)
        x, _ = apgd(DataTerm.none((4, 4)), regularizer, np.zeros((4, 4)),
                    SolverConfig(iterations=200))
        np.testing.assert_allclose(x, 0.25, atol=1e-6)


class MapReconstructTests(SimpleTestCase):
    def test_identity_with_zero_regularizer_returns_observation(self):
        f = np.random.default_rng(0).uniform(size=(5, 5))
        x, _ = map_reconstruct(f, 'identity', ZeroEnergy(), SolverConfig(iterations=10))
        np.testing.assert_allclose(x, f)

    def test_unknown_kind_rejected(self):
        with self.assertRaises(ConfigError):
            map_reconstruct(np.zeros((4, 4)), 'none', ZeroEnergy(), SolverConfig())

    def test_initial_estimate_needs_observation(self):
        with self.assertRaises(ConfigError):
            initial_estimate(DataTerm.none((4, 4)))

    def test_invalid_solver_config(self):
        for kwargs in ({'iterations': -1}, {'alpha0': 0.0}, {'gamma1': 1.0}, {'cg_iters': 0}):
            with self.assertRaises(ConfigError):
                SolverConfig(**kwargs)

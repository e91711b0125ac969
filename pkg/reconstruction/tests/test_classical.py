import math

import numpy as np
from django.test import SimpleTestCase, tag
from scipy.sparse import linalg as sparse_linalg

from reconstruction.classical import (
    TvConfig,
    diagonal_steps,
    divergence,
    gradient,
    psnr,
    sart,
    select_tv_lambda,
    total_variation,
    tv_objective,
    tv_reconstruct,
)
from reconstruction.exceptions import ConfigError, ShapeError
from reconstruction.phantoms import shepp_logan
from reconstruction.tomography import Geometry, Sinogram, add_noise, fbp, forward_project, system_matrix


class SartTests(SimpleTestCase):
    def test_single_pixel_recovered_in_one_sweep(self):
        geometry = Geometry.parallel((1, 1), 4)
        sinogram = forward_project(np.array([[0.7]]), geometry)
        self.assertAlmostEqual(float(sart(sinogram, 1)[0, 0]), 0.7, places=12)

    def test_zero_sinogram_stays_zero(self):
        geometry = Geometry.parallel((16, 16), 10)
        result = sart(Sinogram(geometry, np.zeros(geometry.shape)), 5)
        self.assertFalse(result.any())

    def test_residual_decreases(self):
        geometry = Geometry.parallel((32, 32), 60)
        phantom = shepp_logan(32)
        sinogram = forward_project(phantom, geometry)
        matrix = system_matrix(geometry)
        residuals = []
        sart(sinogram, 20, callback=lambda sweep, x: residuals.append(
            np.linalg.norm(matrix @ x.ravel() - sinogram.values.ravel())
        ))
        self.assertEqual(len(residuals), 20)
        for before, after in zip(residuals[:5], residuals[1:6]):
            self.assertLess(after, before)

    def test_angle_blocks_converge_too(self):
        geometry = Geometry.parallel((16, 16), 24)
        phantom = shepp_logan(16)
        sinogram = forward_project(phantom, geometry)
        blocked = sart(sinogram, 20, blocks='angle', nonneg=True)
        self.assertGreater(psnr(blocked, phantom), psnr(sart(sinogram, 1, nonneg=True), phantom))

    def test_invalid_relax_rejected(self):
        geometry = Geometry.parallel((8, 8), 4)
        with self.assertRaises(ConfigError):
            sart(Sinogram(geometry, np.zeros(geometry.shape)), 1, relax=2.5)

    def test_x0_size_checked(self):
        geometry = Geometry.parallel((8, 8), 4)
        with self.assertRaises(ShapeError):
            sart(Sinogram(geometry, np.zeros(geometry.shape)), 1, x0=np.zeros((4, 4)))


class TotalVariationTests(SimpleTestCase):
    def test_divergence_is_negative_adjoint(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((9, 7))
        p = rng.standard_normal((2, 9, 7))
        self.assertAlmostEqual(np.vdot(gradient(x), p), -np.vdot(x, divergence(p)), places=10)

    def test_constant_image_has_zero_tv(self):
        self.assertEqual(total_variation(np.full((8, 8), 0.3)), 0.0)

    def test_zero_lambda_matches_least_squares(self):
        geometry = Geometry.parallel((16, 16), 32)
        sinogram = forward_project(shepp_logan(16), geometry)
        oracle = sparse_linalg.lsqr(system_matrix(geometry), sinogram.values.ravel(),
                                    atol=1e-14, btol=1e-14, iter_lim=20000)[0].reshape(16, 16)
        result = tv_reconstruct(sinogram, TvConfig(lam=0.0, iterations=20000))
        self.assertLessEqual(np.mean(np.abs(result - oracle)), 1e-3)

    def test_large_lambda_flattens_image(self):
        geometry = Geometry.parallel((16, 16), 32)
        sinogram = forward_project(shepp_logan(16), geometry)
        scale = float(sinogram.values.max())
        result = tv_reconstruct(sinogram, TvConfig(lam=1e3 * scale, iterations=5000))
        self.assertLessEqual(total_variation(result), 1e-3 * total_variation(fbp(sinogram)))

    def test_restarts_speed_up_large_lambda(self):
        geometry = Geometry.parallel((16, 16), 32)
        sinogram = forward_project(shepp_logan(16), geometry)
        lam = 1e3 * float(sinogram.values.max())
        plain = tv_reconstruct(sinogram, TvConfig(lam=lam, iterations=2000, restart=False))
        restarted = tv_reconstruct(sinogram, TvConfig(lam=lam, iterations=2000))
        self.assertLess(total_variation(restarted), total_variation(plain))

    def test_diagonal_steps_bound_the_scaled_operator(self):
        geometry = Geometry.parallel((8, 8), 12)
        matrix = system_matrix(geometry).toarray()
        grad = np.stack([gradient(unit.reshape(8, 8)).ravel() for unit in np.eye(64)], axis=1)
        operator = np.vstack([matrix, grad])
        sigma_grad, sigma_rays, tau = diagonal_steps(system_matrix(geometry), (8, 8))
        sigma = np.concatenate([sigma_rays, np.full(grad.shape[0], sigma_grad)])
        scaled = np.sqrt(sigma)[:, None] * operator * np.sqrt(tau.ravel())[None, :]
        self.assertLessEqual(np.linalg.norm(scaled, 2), 1.0 + 1e-9)
        self.assertEqual(sigma_grad, 0.5)
        self.assertEqual(tau.shape, (8, 8))

    def test_scalar_steps_remain_available(self):
        geometry = Geometry.parallel((16, 16), 20)
        sinogram = forward_project(shepp_logan(16), geometry)
        cfg = dict(lam=0.05, preconditioned=False, restart=False)
        early = tv_reconstruct(sinogram, TvConfig(iterations=10, **cfg))
        late = tv_reconstruct(sinogram, TvConfig(iterations=200, **cfg))
        self.assertLess(tv_objective(late, sinogram, 0.05), tv_objective(early, sinogram, 0.05))

    def test_restart_check_validated(self):
        with self.assertRaises(ConfigError):
            TvConfig(lam=0.1, restart_check=0)

    def test_x0_size_checked(self):
        sinogram = forward_project(shepp_logan(16), Geometry.parallel((16, 16), 8))
        with self.assertRaises(ShapeError):
            tv_reconstruct(sinogram, TvConfig(lam=0.1, iterations=2), x0=np.zeros((8, 8)))

    def test_objective_decreases_after_burn_in(self):
        for seed in range(3):
            geometry = Geometry.parallel((16, 16), 20)
            image = np.random.default_rng(seed).uniform(size=(16, 16))
            sinogram = forward_project(image, geometry)
            early = tv_reconstruct(sinogram, TvConfig(lam=0.1, iterations=10))
            late = tv_reconstruct(sinogram, TvConfig(lam=0.1, iterations=200))
            self.assertLessEqual(tv_objective(late, sinogram, 0.1), tv_objective(early, sinogram, 0.1))

    def test_nonneg_projection(self):
        geometry = Geometry.parallel((16, 16), 8)
        sinogram = add_noise(forward_project(shepp_logan(16), geometry), 0.05, seed=0)
        result = tv_reconstruct(sinogram, TvConfig(lam=0.01, iterations=50, nonneg=True))
        self.assertGreaterEqual(result.min(), 0.0)


class PsnrTests(SimpleTestCase):
    def test_identical_images(self):
        x = np.random.default_rng(0).uniform(size=(8, 8))
        self.assertEqual(psnr(x, x), math.inf)

    def test_uniform_error(self):
        self.assertAlmostEqual(psnr(np.full((4, 4), 0.1), np.zeros((4, 4))), 20.0, places=10)

    def test_checkerboard_error(self):
        board = np.where(np.indices((8, 8)).sum(axis=0) % 2 == 0, 0.5, -0.5)
        self.assertAlmostEqual(psnr(board, np.zeros((8, 8))), 10 * math.log10(4.0), places=10)

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        x, ref = rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8))
        self.assertAlmostEqual(psnr(x, ref), psnr(x + 0.25, ref + 0.25), places=8)

    def test_size_mismatch_rejected(self):
        with self.assertRaises(ShapeError):
            psnr(np.zeros((4, 4)), np.zeros((5, 5)))


@tag('slow')
class BaselineOrderingTests(SimpleTestCase):
    def test_few_view_ordering(self):
        phantom = shepp_logan(64)
        geometry = Geometry.parallel((64, 64), 20)
        sinogram = add_noise(forward_project(phantom, geometry), 1e-3, seed=0)

        fbp_psnr = psnr(fbp(sinogram), phantom)
        sart_psnr = psnr(sart(sinogram, 50, nonneg=True), phantom)
        _, tv_image, _ = select_tv_lambda(sinogram, phantom, TvConfig(lam=0.0, iterations=1000))
        tv_psnr = psnr(tv_image, phantom)

        self.assertGreaterEqual(sart_psnr - fbp_psnr, 1.0)
        self.assertGreaterEqual(tv_psnr - sart_psnr, 1.0)

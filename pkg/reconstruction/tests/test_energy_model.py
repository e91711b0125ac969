from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from reconstruction.energy_model import (
    QuadraticEnergy,
    ZeroEnergy,
    build_model,
    count_parameters,
    downsampling_stages,
    layer_specs,
    zero_model,
)
from reconstruction.exceptions import ConfigError, ShapeError


def directional_check(func, grad, point, rng, step=1e-5, directions=4):
    """Largest relative mismatch between <grad, v> and central differences along random v."""
    worst = 0.0
    for _ in range(directions):
        v = rng.standard_normal(point.shape)
        v /= np.linalg.norm(v)
        numeric = (func(point + step * v) - func(point - step * v)) / (2 * step)
        analytic = float(np.vdot(grad, v))
        worst = max(worst, abs(numeric - analytic) / max(abs(analytic), 1e-8))
    return worst


class ArchitectureTests(SimpleTestCase):
    def test_full_scale_parameter_count(self):
        self.assertEqual(count_parameters(48, (128, 128)), 12179905)

    def test_single_feature_parameter_count(self):
        self.assertEqual(count_parameters(1, (128, 128)), 5589)
        self.assertEqual(build_model(1, (128, 128), seed=0).n_parameters, 5589)

    def test_layer_table_at_128(self):
        specs = layer_specs(4, (128, 128))
        self.assertEqual(len(specs), 7)
        self.assertEqual([s[1] for s in specs], [4, 8, 16, 32, 48, 64, 1])
        self.assertEqual(specs[0][2:], (3, 1, 1))
        self.assertTrue(all(s[2:] == (4, 2, 1) for s in specs[1:6]))
        self.assertEqual(specs[-1][2:], (4, 1, 0))

    def test_smaller_inputs_drop_trailing_stages(self):
        self.assertEqual(downsampling_stages((64, 64)), 4)
        self.assertEqual(downsampling_stages((16, 16)), 2)
        self.assertEqual(len(layer_specs(8, (64, 64))), 6)

    def test_unsupported_size_rejected(self):
        with self.assertRaises(ConfigError) as ctx:
            build_model(8, (127, 127), seed=0)
        self.assertIn('4*2^s', str(ctx.exception))

    def test_deterministic_per_seed(self):
        a = build_model(2, (16, 16), seed=5).flat_parameters()
        b = build_model(2, (16, 16), seed=5).flat_parameters()
        c = build_model(2, (16, 16), seed=6).flat_parameters()
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))


class EnergyTests(SimpleTestCase):
    def setUp(self):
        self.model = build_model(2, (32, 32), seed=1)
        self.x = np.random.default_rng(2).uniform(size=(32, 32))

    def test_zero_network(self):
        model = zero_model(self.model)
        self.assertEqual(model.energy(self.x), 0.0)
        self.assertFalse(model.grad_input(self.x).any())

    def test_same_inputs_same_energy(self):
        self.assertEqual(self.model.energy(self.x), self.model.energy(self.x.copy()))

    def test_constant_shift_changes_energy(self):
        self.assertNotEqual(self.model.energy(self.x), self.model.energy(self.x + 0.3))

    def test_temperature_scaling(self):
        hot = self.model.with_temperature(2.0)
        self.assertEqual(hot.energy(self.x), self.model.energy(self.x) / 2.0)
        np.testing.assert_allclose(hot.grad_input(self.x), self.model.grad_input(self.x) / 2.0,
                                   rtol=1e-12)

    def test_batch_matches_single_images(self):
        batch = np.stack([self.x, 1.0 - self.x])
        values = self.model.energy(batch)
        self.assertEqual(values.shape, (2,))
        np.testing.assert_allclose(values[1], self.model.energy(1.0 - self.x), rtol=1e-10)

    def test_size_mismatch_rejected(self):
        with self.assertRaises(ShapeError):
            self.model.energy(np.zeros((16, 16)))

    def test_final_layer_is_affine(self):
        rng = np.random.default_rng(4)
        last = self.model.layers[-1]
        k1, k2 = rng.standard_normal(last.kernel.shape), rng.standard_normal(last.kernel.shape)

        def with_last_kernel(kernel):
            layers = self.model.layers[:-1] + (replace(last, kernel=kernel),)
            return replace(self.model, layers=layers)

        mid = with_last_kernel((k1 + k2) / 2).energy(self.x)
        ends = (with_last_kernel(k1).energy(self.x) + with_last_kernel(k2).energy(self.x)) / 2
        self.assertAlmostEqual(mid, ends, places=10)


class GradientTests(SimpleTestCase):
    def test_grad_input_matches_finite_differences(self):
        for seed in (0, 1, 2):
            rng = np.random.default_rng(seed)
            model = build_model(2, (32, 32), seed=seed)
            x = rng.uniform(size=(32, 32))
            error = directional_check(model.energy, model.grad_input(x), x, rng)
            self.assertLess(error, 1e-4)

    def test_grad_params_matches_finite_differences(self):
        for seed in (0, 1, 2):
            rng = np.random.default_rng(10 + seed)
            model = build_model(2, (32, 32), seed=seed)
            x = rng.uniform(size=(32, 32))

            def energy_of(flat):
                return model.with_flat_parameters(flat).energy(x)

            error = directional_check(energy_of, model.grad_params(x), model.flat_parameters(), rng)
            self.assertLess(error, 1e-4)

    def test_grad_params_is_batch_mean(self):
        model = build_model(2, (16, 16), seed=3)
        batch = np.random.default_rng(3).uniform(size=(3, 16, 16))
        expected = np.mean([model.grad_params(image) for image in batch], axis=0)
        np.testing.assert_allclose(model.grad_params(batch), expected, rtol=1e-10, atol=1e-14)

    def test_flat_parameter_roundtrip(self):
        model = build_model(2, (16, 16), seed=3)
        flat = model.flat_parameters()
        self.assertEqual(flat.shape, (model.n_parameters,))
        np.testing.assert_array_equal(model.with_flat_parameters(flat).flat_parameters(), flat)
        # Layer-major: the first kernel comes first, then its bias.
        first = model.layers[0]
        np.testing.assert_array_equal(flat[:first.kernel.size], first.kernel.ravel())
        np.testing.assert_array_equal(flat[first.kernel.size:first.n_parameters], first.bias)


class SimpleEnergyTests(SimpleTestCase):
    def test_quadratic_energy(self):
        energy = QuadraticEnergy(variance=2.0, center=1.0)
        x = np.full((2, 2), 3.0)
        self.assertEqual(energy.energy(x), 4.0)
        np.testing.assert_array_equal(energy.grad_input(x), np.ones((2, 2)))

    def test_quadratic_parameter_gradient(self):
        energy = QuadraticEnergy(variance=0.5)
        x = np.array([[[1.0]], [[3.0]]])
        # d/dv of x^2/(2v), averaged: -mean(x^2)/(2 v^2)
        np.testing.assert_allclose(energy.grad_params(x), [-5.0 / 0.5])

    def test_zero_energy(self):
        self.assertEqual(ZeroEnergy().energy(np.ones((4, 4))), 0.0)
        self.assertFalse(ZeroEnergy().grad_input(np.ones((4, 4))).any())

import numpy as np
from django.test import SimpleTestCase

from reconstruction.exceptions import ConfigError
from reconstruction.phantoms import (
    bars_dataset,
    blobs,
    discs_dataset,
    grid_overlay,
    make_mask,
    make_phantom,
    shepp_logan,
)


class SheppLoganTests(SimpleTestCase):
    def test_range_and_background(self):
        image = shepp_logan(64)
        self.assertEqual(image.shape, (64, 64))
        self.assertAlmostEqual(float(image.max()), 1.0)
        self.assertGreaterEqual(image.min(), 0.0)
        self.assertEqual(image[0, 0], 0.0)
        self.assertEqual(image[-1, -1], 0.0)

    def test_too_small_rejected(self):
        with self.assertRaises(ConfigError):
            shepp_logan(15)


class DiscsTests(SimpleTestCase):
    def test_same_seed_same_dataset(self):
        np.testing.assert_array_equal(discs_dataset(5, 32, seed=4), discs_dataset(5, 32, seed=4))

    def test_different_seeds_differ(self):
        self.assertFalse(np.array_equal(discs_dataset(3, 32, seed=0), discs_dataset(3, 32, seed=1)))

    def test_statistics(self):
        dataset = discs_dataset(100, 32, seed=0)
        self.assertEqual(dataset.shape, (100, 32, 32))
        self.assertGreaterEqual(dataset.min(), 0.0)
        self.assertLessEqual(dataset.max(), 1.0)
        self.assertTrue(0.05 <= dataset.mean() <= 0.4)
        self.assertTrue(all(image.any() for image in dataset))

    def test_invalid_count(self):
        with self.assertRaises(ConfigError):
            discs_dataset(0, 32, seed=0)


class BarsTests(SimpleTestCase):
    def test_bars_are_solid_rectangles(self):
        dataset = bars_dataset(50, 16, seed=0)
        self.assertEqual(dataset.shape, (50, 16, 16))
        self.assertGreaterEqual(dataset.min(), 0.0)
        self.assertLessEqual(dataset.max(), 1.0)
        for image in dataset:
            lit = image > 0
            # Every lit pixel sits in a fully lit 2x2 block.
            blocks = lit[:-1, :-1] & lit[1:, :-1] & lit[:-1, 1:] & lit[1:, 1:]
            covered = np.zeros_like(lit)
            for dr in (0, 1):
                for dc in (0, 1):
                    covered[dr:dr + 15, dc:dc + 15] |= blocks
            self.assertTrue(lit.any())
            np.testing.assert_array_equal(covered, lit)

    def test_edges_follow_the_axes(self):
        dataset = bars_dataset(200, 16, seed=1)
        rows = np.abs(np.diff(dataset, axis=1)).mean()
        cols = np.abs(np.diff(dataset, axis=2)).mean()
        diagonal = np.abs(dataset[:, 1:, 1:] - dataset[:, :-1, :-1]).mean()
        self.assertGreater(diagonal, 0.65 * (rows + cols))

    def test_seeded(self):
        np.testing.assert_array_equal(bars_dataset(3, 16, seed=5), bars_dataset(3, 16, seed=5))
        self.assertEqual(make_phantom('bars', 16, seed=0, count=4).shape, (4, 16, 16))


class OverlayTests(SimpleTestCase):
    def test_grid_overlay_lines(self):
        grid = grid_overlay(32, spacing=8)
        self.assertTrue(np.all(grid[0] == 1.0))
        self.assertTrue(np.all(grid[:, 8] == 1.0))
        self.assertEqual(grid[3, 3], 0.0)

    def test_blobs_normalized_and_seeded(self):
        image = blobs(32, seed=2)
        self.assertAlmostEqual(float(image.max()), 1.0)
        np.testing.assert_array_equal(image, blobs(32, seed=2))

    def test_make_phantom_dispatch(self):
        self.assertEqual(make_phantom('discs', 16, seed=0, count=3).shape, (3, 16, 16))
        self.assertEqual(make_phantom('grid-overlay', 16).shape, (16, 16))
        with self.assertRaises(ConfigError):
            make_phantom('checkerboard', 16)


class MaskTests(SimpleTestCase):
    def test_square_mask_area(self):
        mask = make_mask(32, 'square', fraction=0.25)
        self.assertEqual(int(mask.sum()), 64)

    def test_disc_mask_is_inside_square(self):
        disc = make_mask(32, 'disc', fraction=0.5)
        square = make_mask(32, 'square', fraction=0.5)
        self.assertTrue(disc.any())
        self.assertFalse(np.any(disc & ~square))

    def test_zero_fraction_is_empty(self):
        self.assertFalse(make_mask(32, fraction=0.0).any())

    def test_invalid_mask(self):
        with self.assertRaises(ConfigError):
            make_mask(32, 'triangle')
        with self.assertRaises(ConfigError):
            make_mask(32, fraction=1.5)

"""Synthetic images: Shepp-Logan, the random discs and bars training sets and overlays."""
import logging

import numpy as np
from skimage import data, draw, filters, transform

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

MIN_SIZE = 16
PHANTOM_KINDS = ('shepp-logan', 'discs', 'bars', 'grid-overlay', 'blobs')
DATASET_KINDS = ('discs', 'bars')
MASK_KINDS = ('square', 'disc')


def _check_size(size):
    size = int(size)
    if size < MIN_SIZE:
        raise ConfigError(f"phantom size must be at least {MIN_SIZE}, got {size}")
    return size


def _normalized(image):
    image = np.clip(image, 0.0, None)
    peak = image.max()
    return image / peak if peak > 0 else image


def shepp_logan(size):
    """Shepp-Logan head resampled to ``size`` x ``size``; max 1, background 0."""
    size = _check_size(size)
    image = transform.resize(data.shepp_logan_phantom(), (size, size), order=1,
                             anti_aliasing=True, preserve_range=True)
    # Resampling leaves tiny ringing values around the skull.
    image[image < 1e-6] = 0.0
    return _normalized(image)


def disc_image(size, rng, min_count=2, max_count=6, radius_range=(0.08, 0.22),
               intensity_range=(0.2, 1.0)):
    """One image of random discs; overlapping discs keep the brighter value."""
    image = np.zeros((size, size))
    for _ in range(rng.integers(min_count, max_count + 1)):
        radius = rng.uniform(*radius_range) * size
        center = rng.uniform(radius, size - radius, size=2)
        intensity = rng.uniform(*intensity_range)
        rows, cols = draw.disk(tuple(center), radius, shape=image.shape)
        image[rows, cols] = np.maximum(image[rows, cols], intensity)
    return image


def discs_dataset(count, size, seed):
    """``count`` disc images; the desk-scale training distribution."""
    size = _check_size(size)
    if count < 1:
        raise ConfigError(f"dataset count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    dataset = np.stack([disc_image(size, rng) for _ in range(count)])
    logger.info("Generated %d disc images of %dx%d (mean %.3f)", count, size, size, dataset.mean())
    return dataset


def bar_image(size, rng, min_count=2, max_count=4, thickness_range=(0.12, 0.2),
              length_range=(0.5, 0.85), intensity_range=(0.3, 1.0)):
    """One image of axis-aligned bars, each horizontal or vertical at random.

    Unlike discs the distribution is not rotation invariant, which makes
    rotated copies genuinely out of distribution.
    """
    image = np.zeros((size, size))
    for _ in range(rng.integers(min_count, max_count + 1)):
        thickness = max(2, int(round(rng.uniform(*thickness_range) * size)))
        length = int(round(rng.uniform(*length_range) * size))
        extent = (thickness, length) if rng.random() < 0.5 else (length, thickness)
        start = tuple(int(rng.integers(0, size - n + 1)) for n in extent)
        rows, cols = draw.rectangle(start, extent=extent, shape=image.shape)
        intensity = rng.uniform(*intensity_range)
        image[rows, cols] = np.maximum(image[rows, cols], intensity)
    return image


def bars_dataset(count, size, seed):
    """``count`` bar images, an orientation-sensitive companion to the discs."""
    size = _check_size(size)
    if count < 1:
        raise ConfigError(f"dataset count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    dataset = np.stack([bar_image(size, rng) for _ in range(count)])
    logger.info("Generated %d bar images of %dx%d (mean %.3f)", count, size, size, dataset.mean())
    return dataset


def grid_overlay(size, spacing=None, width=1):
    """Bright grid lines on a zero background."""
    size = _check_size(size)
    spacing = spacing or max(4, size // 8)
    image = np.zeros((size, size))
    for offset in range(width):
        image[offset::spacing, :] = 1.0
        image[:, offset::spacing] = 1.0
    return image


def blobs(size, seed, count=12, sigma=None):
    """Smooth random blobs, a stand-in for natural-image structure."""
    size = _check_size(size)
    rng = np.random.default_rng(seed)
    impulses = np.zeros((size, size))
    rows = rng.integers(0, size, size=count)
    cols = rng.integers(0, size, size=count)
    impulses[rows, cols] = rng.uniform(0.3, 1.0, size=count)
    smooth = filters.gaussian(impulses, sigma=sigma or size / 16.0)
    return _normalized(smooth)


def make_phantom(kind, size, seed=0, count=1):
    """Image for single-image kinds, ``(count, size, size)`` stack for dataset kinds."""
    if kind == 'shepp-logan':
        return shepp_logan(size)
    if kind == 'discs':
        return discs_dataset(count, size, seed)
    if kind == 'bars':
        return bars_dataset(count, size, seed)
    if kind == 'grid-overlay':
        return grid_overlay(size)
    if kind == 'blobs':
        return blobs(size, seed)
    raise ConfigError(f"unknown phantom kind {kind!r}; choose one of {PHANTOM_KINDS}")


def make_mask(size, kind='square', fraction=0.25, center=None):
    """Boolean region mask; ``fraction`` is the side (or diameter) relative to ``size``."""
    if kind not in MASK_KINDS:
        raise ConfigError(f"unknown mask kind {kind!r}; choose one of {MASK_KINDS}")
    if not 0 <= fraction <= 1:
        raise ConfigError(f"mask fraction must lie in [0, 1], got {fraction}")
    mask = np.zeros((size, size), dtype=bool)
    extent = fraction * size
    if extent == 0:
        return mask
    cy, cx = center if center is not None else ((size - 1) / 2.0, (size - 1) / 2.0)
    if kind == 'disc':
        rows, cols = draw.disk((cy, cx), extent / 2.0, shape=mask.shape)
    else:
        half = extent / 2.0
        rows, cols = draw.rectangle(
            (max(0, int(round(cy - half))), max(0, int(round(cx - half)))),
            end=(min(size - 1, int(round(cy + half)) - 1), min(size - 1, int(round(cx + half)) - 1)),
            shape=mask.shape,
        )
    mask[rows, cols] = True
    return mask

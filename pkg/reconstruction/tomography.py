"""Parallel-beam acquisition operator, its adjoint, noise model and FBP.

Conventions: the image origin is the grid center with x pointing along
columns and y pointing up (row 0 is the top row). A ray at angle ``theta``
and detector offset ``t`` is the line ``{t*(cos, sin) + u*(-sin, cos)}``;
detector offsets are measured from the center of the detector array.
Line integrals follow Joseph's method: bilinear interpolation at unit steps
along the ray's dominant axis, scaled by the step length.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
import logging
import math
from typing import Tuple

import numpy as np
from scipy import sparse

from .exceptions import ConfigError, ShapeError

logger = logging.getLogger(__name__)

FILTERS = ('ram-lak', 'none')


def default_detector_count(image_size, det_spacing=1.0):
    """Smallest odd bin count whose array covers the image diagonal."""
    diagonal = math.hypot(*image_size)
    count = math.ceil(diagonal / det_spacing)
    return count if count % 2 else count + 1


def angle_range(start, stop, n_angles):
    """``n_angles`` uniformly spaced angles on ``[start, stop)``."""
    if n_angles < 1:
        raise ConfigError(f"n_angles must be positive, got {n_angles}")
    return tuple(float(a) for a in start + (stop - start) * np.arange(n_angles) / n_angles)


@dataclass(frozen=True)
class Geometry:
    angles: Tuple[float, ...]
    n_detectors: int
    image_size: Tuple[int, int]
    det_spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'angles', tuple(float(a) for a in self.angles))
        object.__setattr__(self, 'image_size', tuple(int(n) for n in self.image_size))
        if not self.angles:
            raise ConfigError("geometry needs at least one projection angle")
        angles = np.asarray(self.angles)
        if np.any(np.diff(angles) <= 0):
            raise ConfigError("projection angles must be strictly increasing")
        if angles[0] < 0 or angles[-1] >= math.pi:
            raise ConfigError("projection angles must lie in [0, pi)")
        if self.n_detectors < 1:
            raise ConfigError(f"n_detectors must be positive, got {self.n_detectors}")
        if self.det_spacing <= 0:
            raise ConfigError(f"det_spacing must be positive, got {self.det_spacing}")
        if min(self.image_size) < 1:
            raise ConfigError(f"invalid image size {self.image_size}")
        if self.n_detectors * self.det_spacing < math.hypot(*self.image_size):
            logger.warning(
                "Detector array (%d bins x %.3g) does not cover the %dx%d image diagonal",
                self.n_detectors, self.det_spacing, *self.image_size,
            )

    @classmethod
    def parallel(cls, image_size, n_angles, start=0.0, stop=math.pi, n_detectors=None,
                 det_spacing=1.0):
        if n_detectors is None:
            n_detectors = default_detector_count(image_size, det_spacing)
        return cls(angle_range(start, stop, n_angles), n_detectors, tuple(image_size), det_spacing)

    @property
    def n_angles(self):
        return len(self.angles)

    @property
    def shape(self):
        return self.n_angles, self.n_detectors

    def detector_offsets(self):
        return (np.arange(self.n_detectors) - (self.n_detectors - 1) / 2.0) * self.det_spacing


@dataclass(frozen=True, eq=False)
class Sinogram:
    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.geometry.shape:
            raise ShapeError(
                f"sinogram values have shape {self.values.shape}, geometry expects "
                f"{self.geometry.shape}"
            )

    def with_values(self, values):
        return Sinogram(self.geometry, values)


def _interpolation_entries(ray_index, line, coord, extent, step, fixed):
    """Sparse entries for ray samples at fractional positions ``coord`` on the interpolated axis.

    ``fixed`` holds each sample's pixel index on the marching axis. ``line(fixed, neighbour)``
    turns that index and an interpolation neighbour into a flat pixel index.
    """
    lower = np.floor(coord).astype(np.int64)
    frac = coord - lower
    rows, cols, data = [], [], []
    for neighbour, weight in ((lower, 1.0 - frac), (lower + 1, frac)):
        inside = (neighbour >= 0) & (neighbour < extent) & (weight > 0)
        rows.append(ray_index[inside])
        cols.append(line(fixed[inside], neighbour[inside]))
        data.append(weight[inside] * step)
    return rows, cols, data


def _angle_entries(index, theta, geometry):
    height, width = geometry.image_size
    offsets = geometry.detector_offsets()
    c, s = math.cos(theta), math.sin(theta)
    center_x, center_y = (width - 1) / 2.0, (height - 1) / 2.0
    rays = index * geometry.n_detectors + np.arange(geometry.n_detectors)

    if abs(c) >= abs(s):
        # March over rows, interpolate along columns.
        rows = np.arange(height)
        y = center_y - rows
        col = offsets[:, None] / c - y[None, :] * (s / c) + center_x
        ray_index = np.broadcast_to(rays[:, None], col.shape).ravel()
        fixed = np.broadcast_to(rows[None, :], col.shape).ravel()
        return _interpolation_entries(
            ray_index, lambda r, q: r * width + q, col.ravel(), width, 1.0 / abs(c), fixed
        )

    # March over columns, interpolate along rows.
    cols = np.arange(width)
    x = cols - center_x
    y = offsets[:, None] / s - x[None, :] * (c / s)
    row = center_y - y
    ray_index = np.broadcast_to(rays[:, None], row.shape).ravel()
    fixed = np.broadcast_to(cols[None, :], row.shape).ravel()
    return _interpolation_entries(
        ray_index, lambda q, r: r * width + q, row.ravel(), height, 1.0 / abs(s), fixed
    )


def _worker_count():
    from django.conf import settings

    return max(1, getattr(settings, 'TOMO_EBM_THREADS', 1))


@lru_cache(maxsize=16)
def system_matrix(geometry):
    """Sparse matrix A of shape (n_angles * n_detectors, n_h * n_w)."""
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        per_angle = list(pool.map(
            lambda item: _angle_entries(item[0], item[1], geometry), enumerate(geometry.angles)
        ))
    rows = np.concatenate([r for entry in per_angle for r in entry[0]])
    cols = np.concatenate([c for entry in per_angle for c in entry[1]])
    data = np.concatenate([d for entry in per_angle for d in entry[2]])
    shape = (geometry.n_angles * geometry.n_detectors, geometry.image_size[0] * geometry.image_size[1])
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=shape)
    logger.debug("Built system matrix %s with %d non-zeros", shape, matrix.nnz)
    return matrix


def forward_project(x, geometry):
    x = np.asarray(x)
    if x.shape != geometry.image_size:
        raise ShapeError(f"image size {x.shape} does not match geometry {geometry.image_size}")
    values = system_matrix(geometry) @ x.ravel()
    return Sinogram(geometry, values.reshape(geometry.shape))


def back_project(sinogram):
    geometry = sinogram.geometry
    image = system_matrix(geometry).T @ np.asarray(sinogram.values).ravel()
    return image.reshape(geometry.image_size)


def padded_length(n_detectors):
    return max(64, 2 ** math.ceil(math.log2(2 * n_detectors)))


def ramp_response(n_pad, det_spacing=1.0):
    """Frequency response of the Ram-Lak filter on a length ``n_pad`` grid.

    Built from the sampled band-limited spatial ramp kernel; equals |omega|
    up to discretization and the DC bin is exactly 0.
    """
    n = np.concatenate((
        np.arange(1, n_pad / 2 + 1, 2, dtype=int),
        np.arange(n_pad / 2 - 1, 0, -2, dtype=int),
    ))
    kernel = np.zeros(n_pad)
    kernel[0] = 0.25
    kernel[1::2] = -1.0 / (np.pi * n) ** 2
    response = np.real(np.fft.fft(kernel)) / det_spacing
    response[0] = 0.0
    return response


def filter_rows(values, det_spacing=1.0, kind='ram-lak', keep_padding=False):
    """Filter each detector row on a zero-padded grid of length >= 2 * n_d."""
    if kind not in FILTERS:
        raise ConfigError(f"unknown filter {kind!r}; choose one of {FILTERS}")
    values = np.asarray(values, dtype=float)
    n_detectors = values.shape[-1]
    n_pad = padded_length(n_detectors)
    padded = np.zeros(values.shape[:-1] + (n_pad,))
    padded[..., :n_detectors] = values
    if kind == 'none':
        filtered = padded
    else:
        spectrum = np.fft.fft(padded, axis=-1) * ramp_response(n_pad, det_spacing)
        filtered = np.real(np.fft.ifft(spectrum, axis=-1))
    return filtered if keep_padding else filtered[..., :n_detectors]


def fbp(sinogram, filter='ram-lak'):
    geometry = sinogram.geometry
    steps = np.diff(geometry.angles)
    if steps.size and np.ptp(steps) > 1e-3 * steps.mean():
        logger.warning("FBP assumes uniformly spaced angles; reconstruction will be biased")
    filtered = filter_rows(sinogram.values, geometry.det_spacing, filter)
    scale = math.pi * geometry.det_spacing / geometry.n_angles
    return scale * back_project(sinogram.with_values(filtered))


def add_noise(sinogram, level, seed):
    """Add i.i.d. Gaussian noise with standard deviation ``level * max(values)``."""
    if level < 0:
        raise ConfigError(f"noise level must be non-negative, got {level}")
    values = np.asarray(sinogram.values)
    if level == 0:
        return sinogram.with_values(values.copy())
    sigma = level * float(values.max())
    rng = np.random.default_rng(seed)
    return sinogram.with_values(values + rng.normal(0.0, sigma, size=values.shape))


def noise_sigma(sinogram, level):
    return level * float(np.asarray(sinogram.values).max())

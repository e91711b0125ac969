"""Langevin sampling of the posterior, streaming moment maps and the
uncertainty experiments built on them (overlay corruption, rotated inputs).
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
from typing import List, Optional

import numpy as np
from django.conf import settings
from scipy import stats
from skimage import transform

from .classical import psnr
from .exceptions import ConfigError, DivergenceError, ShapeError
from .sampler import chain_rng, ula_step
from .solver import DataTerm, SolverConfig, map_reconstruct
from .tomography import Geometry, forward_project, noise_sigma

logger = logging.getLogger(__name__)

# Denoising PSNR (dB) of the full-scale model for rotations 0, 5 and 40 degrees.
REFERENCE_OOD_CURVE = {0: 33.39, 5: 30.25, 40: 28.20}
FEW_VIEW_ANGLES = 20


class MomentAccumulator:
    """Single-pass (Welford) per-pixel mean and variance."""

    def __init__(self, shape):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)
        self.partial = False

    @property
    def shape(self):
        return self.mean.shape

    def update(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != self.mean.shape:
            raise ShapeError(f"sample has shape {x.shape}, accumulator holds {self.mean.shape}")
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def merge(self, other):
        """Parallel combination of two accumulators; returns a new one."""
        if other.shape != self.shape:
            raise ShapeError(f"cannot merge accumulators of shapes {self.shape} and {other.shape}")
        merged = MomentAccumulator(self.shape)
        merged.partial = self.partial or other.partial
        total = self.count + other.count
        if total == 0:
            return merged
        delta = other.mean - self.mean
        merged.count = total
        merged.mean = self.mean + delta * (other.count / total)
        merged.m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / total)
        return merged

    @property
    def variance(self):
        if self.count < 2:
            raise ConfigError(f"variance needs at least two samples, have {self.count}")
        return np.maximum(self.m2 / (self.count - 1), 0.0)


def _posterior_gradient(term, regularizer):
    def gradient(x):
        return term.gradient(x) + regularizer.grad_input(x)
    return gradient


def _run_chain(index, term, regularizer, cfg, x0, burn_in, n_samples, stride, seed, dump):
    rng = chain_rng(seed, index)
    gradient = _posterior_gradient(term, regularizer)
    accumulator = MomentAccumulator(np.shape(x0))
    x = np.array(x0, dtype=float)
    total = burn_in + n_samples * stride
    for step in range(1, total + 1):
        try:
            x = ula_step(x, gradient, cfg, rng)
        except DivergenceError:
            logger.error("Posterior chain %d diverged at step %d", index, step)
            accumulator.partial = True
            return accumulator
        if step > burn_in and (step - burn_in) % stride == 0:
            accumulator.update(x)
            if dump is not None:
                dump.append(x.copy())
    return accumulator


@dataclass
class PosteriorResult:
    moments: MomentAccumulator
    samples: Optional[List[np.ndarray]] = None

    @property
    def partial(self):
        return self.moments.partial


def posterior_sample(term, regularizer, cfg, burn_in, n_samples, stride=10, seed=0, x0=None,
                     n_chains=1, keep_samples=False):
    """Sample exp(-(D + R)) with ULA and accumulate per-pixel moments.

    Every chain discards ``burn_in`` steps, then records every ``stride``-th
    state until it holds ``n_samples``. Chains start from ``x0`` (default the
    observation for identity data, zeros otherwise), draw from
    ``chain_rng(seed, chain)`` and are merged in chain order. A diverging
    chain contributes what it accumulated and marks the result partial.
    """
    if burn_in < 0:
        raise ConfigError(f"burn_in must be non-negative, got {burn_in}")
    if n_samples < 2:
        raise ConfigError(f"n_samples must be at least 2, got {n_samples}")
    if stride < 1 or n_chains < 1:
        raise ConfigError("stride and n_chains must be positive")
    if x0 is None:
        x0 = term.observation if term.kind == 'identity' else np.zeros(term.image_size)
    dumps = [[] if keep_samples else None for _ in range(n_chains)]

    def run(index):
        return _run_chain(index, term, regularizer, cfg, x0, burn_in, n_samples, stride, seed,
                          dumps[index])

    threads = 1 if settings.TOMO_EBM_DETERMINISTIC else settings.TOMO_EBM_THREADS
    logger.info(
        "Posterior sampling: %d chain(s), burn-in %d, %d samples, stride %d",
        n_chains, burn_in, n_samples, stride,
    )
    with ThreadPoolExecutor(max_workers=max(1, min(threads, n_chains))) as pool:
        accumulators = list(pool.map(run, range(n_chains)))

    moments = accumulators[0]
    for accumulator in accumulators[1:]:
        moments = moments.merge(accumulator)
    if moments.partial:
        logger.warning("Posterior sampling aborted early; moments cover %d samples", moments.count)
    samples = [s for dump in dumps for s in dump] if keep_samples else None
    return PosteriorResult(moments, samples)


def corrupt_image(reference, overlay, mask):
    """Replace ``reference`` by ``overlay`` inside ``mask``."""
    reference, overlay = np.asarray(reference, dtype=float), np.asarray(overlay, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not reference.shape == overlay.shape == mask.shape:
        raise ShapeError(
            f"reference {reference.shape}, overlay {overlay.shape} and mask {mask.shape} differ"
        )
    return np.where(mask, overlay, reference)


def _region_means(variance, mask):
    inside = float(variance[mask].mean()) if mask.any() else None
    outside = float(variance[~mask].mean()) if (~mask).any() else None
    return inside, outside


@dataclass(frozen=True)
class CorruptionReport:
    clean_inside: Optional[float]
    clean_outside: Optional[float]
    corrupted_inside: Optional[float]
    corrupted_outside: Optional[float]
    # One-sided Welch test of corrupted > clean over the inside-mask sample variances.
    p_value: Optional[float]
    n_samples: int
    partial: bool

    @property
    def inside_defined(self):
        return self.clean_inside is not None

    def ratio_of_ratios(self):
        if not self.inside_defined or not self.clean_outside or not self.corrupted_outside:
            return None
        clean = self.clean_inside / self.clean_outside
        corrupted = self.corrupted_inside / self.corrupted_outside
        return corrupted / clean if clean else None

    def rows(self):
        return [
            ('clean', self.clean_inside, self.clean_outside),
            ('corrupted', self.corrupted_inside, self.corrupted_outside),
        ]


def _inside_sample_variances(samples, mask):
    """Per-sample squared deviation from the chain mean, averaged inside ``mask``."""
    stack = np.stack(samples)
    deviations = (stack - stack.mean(axis=0)) ** 2
    return deviations[:, mask].mean(axis=1)


def corruption_experiment(reference, overlay, mask, regularizer, cfg, noise_level=1e-3,
                          n_angles=FEW_VIEW_ANGLES, burn_in=1000, n_samples=200, stride=10,
                          seed=0, temperature=1.0):
    """Posterior variance inside/outside ``mask`` for a clean and a corrupted scan.

    Both scans are projected with ``n_angles`` views over [0, pi) and share
    the noise draw, its standard deviation (taken from the clean scan) and
    the chain seeds, so the only difference is the overlay. ``temperature``
    is the sampling temperature the regularizer was trained at; the data
    variance is divided by it so both terms live on the same energy scale.
    """
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    reference = np.asarray(reference, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    corrupted = corrupt_image(reference, overlay, mask)
    geometry = Geometry.parallel(reference.shape, n_angles)
    sigma = noise_sigma(forward_project(reference, geometry), noise_level)
    noise = sigma * np.random.default_rng(seed).standard_normal(geometry.shape)
    sigma2 = max(sigma, 1e-6) ** 2 / temperature

    results = {}
    for label, image in (('clean', reference), ('corrupted', corrupted)):
        projected = forward_project(image, geometry)
        term = DataTerm.tomographic(projected.with_values(projected.values + noise), sigma2)
        results[label] = posterior_sample(
            term, regularizer, cfg, burn_in, n_samples, stride, seed, keep_samples=True,
        )
        logger.info("Corruption experiment: %s scan sampled (%d samples)", label,
                    results[label].moments.count)
        if results[label].moments.count < 2:
            raise DivergenceError(
                f"posterior chains for the {label} scan diverged before collecting two samples",
                partial=results[label].moments,
            )

    clean_in, clean_out = _region_means(results['clean'].moments.variance, mask)
    corrupt_in, corrupt_out = _region_means(results['corrupted'].moments.variance, mask)
    p_value = None
    if mask.any():
        test = stats.ttest_ind(
            _inside_sample_variances(results['corrupted'].samples, mask),
            _inside_sample_variances(results['clean'].samples, mask),
            equal_var=False, alternative='greater',
        )
        p_value = float(test.pvalue)
    else:
        logger.warning("Empty mask: inside-mask statistics are undefined")
    return CorruptionReport(
        clean_in, clean_out, corrupt_in, corrupt_out, p_value,
        min(results['clean'].moments.count, results['corrupted'].moments.count),
        results['clean'].partial or results['corrupted'].partial,
    )


def rotate(x, degrees):
    """Bilinear rotation about the image center, counter-clockwise; outside reads 0."""
    x = np.asarray(x, dtype=float)
    if degrees == 0:
        return x.copy()
    return transform.rotate(x, degrees, order=1, mode='constant', cval=0.0, preserve_range=True)


@dataclass(frozen=True)
class SweepPoint:
    degrees: float
    psnr: float
    reference_psnr: Optional[float]


def ood_denoise_sweep(images, regularizer, angles, noise_level=0.1, cfg=None, seed=0,
                      temperature=1.0):
    """Mean denoising PSNR for rotated copies of ``images``.

    For each angle the rotated image gets Gaussian noise of standard
    deviation ``noise_level * max`` and is reconstructed with an identity
    data term; PSNR is measured against the rotated clean image.
    The data variance is divided by ``temperature`` as in
    :func:`corruption_experiment`.
    """
    cfg = cfg or SolverConfig(iterations=200)
    images = [np.asarray(image, dtype=float) for image in images]
    if not images:
        raise ConfigError("sweep needs at least one image")
    if temperature <= 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    points = []
    for degrees in angles:
        scores = []
        for index, image in enumerate(images):
            target = rotate(image, degrees)
            sigma = noise_level * float(target.max())
            rng = np.random.default_rng([seed, index])
            noisy = target + sigma * rng.standard_normal(target.shape) if sigma > 0 else target
            estimate, _ = map_reconstruct(noisy, 'identity', regularizer, cfg,
                                          sigma2=max(sigma, 1e-3) ** 2 / temperature)
            scores.append(psnr(estimate, target))
        value = float(np.mean(scores))
        points.append(SweepPoint(float(degrees), value, REFERENCE_OOD_CURVE.get(degrees)))
        logger.info("OOD sweep: rotation %g deg, PSNR %.2f dB", degrees, value)
    return points


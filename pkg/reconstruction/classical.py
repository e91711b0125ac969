"""Baseline reconstructions (SART, TV-regularized least squares) and PSNR."""
from dataclasses import dataclass
import logging
import math
from typing import Optional

import numpy as np

from .exceptions import ConfigError, ShapeError
from .tomography import system_matrix

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-12
SART_BLOCKS = ('all', 'angle')
TV_LAMBDA_GRID = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0)


def _clamped(sums):
    sums = np.asarray(sums).ravel()
    return np.where(sums <= WEIGHT_FLOOR, WEIGHT_FLOOR, sums)


def sart(sinogram, iterations, relax=1.0, x0=None, nonneg=False, blocks='all', callback=None):
    """SART sweeps ``x <- x + relax * C^-1 A^T R^-1 (f - A x)``.

    ``blocks='all'`` updates with every ray at once (simultaneous variant);
    ``blocks='angle'`` applies the update one projection angle at a time.
    ``callback(sweep, x)`` is called after every sweep.
    """
    if not 0 < relax <= 2:
        raise ConfigError(f"relax must lie in (0, 2], got {relax}")
    if blocks not in SART_BLOCKS:
        raise ConfigError(f"blocks must be one of {SART_BLOCKS}, got {blocks!r}")
    geometry = sinogram.geometry
    matrix = system_matrix(geometry)
    if x0 is None:
        x = np.zeros(matrix.shape[1])
    else:
        if np.shape(x0) != geometry.image_size:
            raise ShapeError(f"x0 has shape {np.shape(x0)}, expected {geometry.image_size}")
        x = np.array(x0, dtype=float).ravel()
    data = np.asarray(sinogram.values, dtype=float).ravel()

    if blocks == 'all':
        parts = [(matrix, data)]
    else:
        n_d = geometry.n_detectors
        parts = [
            (matrix[a * n_d:(a + 1) * n_d], data[a * n_d:(a + 1) * n_d])
            for a in range(geometry.n_angles)
        ]
    weights = [(_clamped(block.sum(axis=1)), _clamped(block.sum(axis=0))) for block, _ in parts]

    for sweep in range(iterations):
        for (block, f), (row_sums, col_sums) in zip(parts, weights):
            x = x + relax * (block.T @ ((f - block @ x) / row_sums)) / col_sums
        if nonneg:
            np.maximum(x, 0.0, out=x)
        if callback is not None:
            callback(sweep, x.reshape(geometry.image_size))
        logger.debug("SART sweep %d residual %.6e", sweep, np.linalg.norm(matrix @ x - data))
    return x.reshape(geometry.image_size)


def gradient(x):
    """Forward differences along rows and columns, zero at the far edge."""
    return np.stack([
        np.diff(x, axis=0, append=x[-1:, :]),
        np.diff(x, axis=1, append=x[:, -1:]),
    ])


def divergence(p):
    """Negative adjoint of :func:`gradient`."""
    rows, cols = p[0].copy(), p[1].copy()
    rows[-1, :] = 0.0
    cols[:, -1] = 0.0
    return np.diff(rows, axis=0, prepend=0.0) + np.diff(cols, axis=1, prepend=0.0)


def total_variation(x):
    return float(np.sqrt((gradient(x) ** 2).sum(axis=0)).sum())


def _project_l2_ball(p, radius):
    norms = np.sqrt((p ** 2).sum(axis=0))
    return p / np.maximum(1.0, norms / radius) if radius > 0 else np.zeros_like(p)


def tv_objective(x, sinogram, lam):
    residual = system_matrix(sinogram.geometry) @ np.ravel(x) - np.ravel(sinogram.values)
    return 0.5 * float(residual @ residual) + lam * total_variation(x)


@dataclass(frozen=True)
class TvConfig:
    lam: float
    iterations: int = 300
    sigma: Optional[float] = None
    tau: Optional[float] = None
    theta: float = 1.0
    nonneg: bool = False
    preconditioned: bool = True
    restart: bool = True
    restart_check: int = 64
    power_iterations: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be non-negative, got {self.lam}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be at least 1, got {self.iterations}")
        if self.restart_check < 1:
            raise ConfigError(f"restart_check must be at least 1, got {self.restart_check}")


def operator_norm(geometry, iterations=30, seed=0):
    """Power-iteration estimate of ||(A, grad)||."""
    matrix = system_matrix(geometry)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(geometry.image_size)
    norm = 0.0
    for _ in range(iterations):
        x = x / np.linalg.norm(x)
        y = (matrix.T @ (matrix @ x.ravel())).reshape(x.shape) - divergence(gradient(x))
        norm = float(np.linalg.norm(y))
        x = y
    return math.sqrt(norm)


def diagonal_steps(matrix, image_size):
    """Diagonal primal-dual preconditioners for K = (A, grad) with alpha = 1.

    Returns ``(sigma_grad, sigma_rays, tau)``: ``sigma_i = 1 / sum_j |K_ij|``
    and ``tau_j = 1 / sum_i |K_ij|``. Every non-empty gradient row holds one
    +1 and one -1, so the gradient's dual step is the scalar 1/2. Empty rays
    and untouched pixels are decoupled and get a unit step.
    """
    weights = abs(matrix)
    row_sums = np.asarray(weights.sum(axis=1)).ravel()
    col_sums = np.asarray(weights.sum(axis=0)).reshape(image_size)
    height, width = image_size
    rows, cols = np.arange(height), np.arange(width)
    # Number of forward differences each pixel takes part in.
    stencil = (
        ((rows >= 1).astype(float) + (rows <= height - 2))[:, None]
        + ((cols >= 1).astype(float) + (cols <= width - 2))[None, :]
    )
    column_total = col_sums + stencil
    sigma_rays = np.where(row_sums > WEIGHT_FLOOR, 1.0 / np.maximum(row_sums, WEIGHT_FLOOR), 1.0)
    tau = np.where(column_total > WEIGHT_FLOOR, 1.0 / np.maximum(column_total, WEIGHT_FLOOR), 1.0)
    return 0.5, sigma_rays, tau


# Restart rules on the fixed-point residual: sufficient decay, necessary decay
# while stalling, and the longest epoch as a fraction of all iterations so far.
RESTART_SUFFICIENT = 0.2
RESTART_NECESSARY = 0.8
RESTART_ARTIFICIAL = 0.36


class PrimalDualProblem:
    """Step sizes and the Chambolle-Pock update map for one TV problem."""

    def __init__(self, sinogram, cfg):
        geometry = sinogram.geometry
        self.shape = geometry.image_size
        self.matrix = system_matrix(geometry)
        self.data = np.asarray(sinogram.values, dtype=float).ravel()
        self.lam, self.theta, self.nonneg = cfg.lam, cfg.theta, cfg.nonneg
        if cfg.sigma is not None and cfg.tau is not None:
            self.sigma_grad = self.sigma_rays = cfg.sigma
            self.tau = cfg.tau
        elif cfg.preconditioned:
            self.sigma_grad, self.sigma_rays, self.tau = diagonal_steps(self.matrix, self.shape)
        else:
            # 5% margin over the power-iteration estimate keeps sigma * tau * L^2 <= 1.
            norm = 1.05 * operator_norm(geometry, cfg.power_iterations, cfg.seed)
            self.sigma_grad = self.sigma_rays = self.tau = 1.0 / norm

    def step(self, x, x_bar, p, q):
        """One iteration; returns ``(x, x_bar, p, q)``."""
        p = _project_l2_ball(p + self.sigma_grad * gradient(x_bar), self.lam)
        q = (q + self.sigma_rays * (self.matrix @ x_bar.ravel() - self.data)) / (1.0 + self.sigma_rays)
        x_new = x - self.tau * ((self.matrix.T @ q).reshape(self.shape) - divergence(p))
        if self.nonneg:
            np.maximum(x_new, 0.0, out=x_new)
        return x_new, x_new + self.theta * (x_new - x), p, q

    def residual(self, x, p, q):
        """Distance moved by one step from ``(x, p, q)``, in the step-size metric."""
        x_new, _, p_new, q_new = self.step(x, x, p, q)
        return math.sqrt(
            float(np.sum((x_new - x) ** 2 / self.tau))
            + float(np.sum((p_new - p) ** 2 / self.sigma_grad))
            + float(np.sum((q_new - q) ** 2 / self.sigma_rays))
        )

    def best_of(self, *candidates):
        """The ``(x, p, q)`` candidate with the smallest residual, and that residual."""
        scored = [(self.residual(*candidate), index) for index, candidate in enumerate(candidates)]
        residual, index = min(scored)
        return candidates[index], residual


def tv_reconstruct(sinogram, cfg, x0=None):
    """Primal-dual (Chambolle-Pock) solution of 1/2 ||Ax - f||^2 + lam * TV(x).

    Steps come from :func:`diagonal_steps`; with ``preconditioned=False`` they
    are the scalar ``1 / (1.05 L)`` of the power-iteration norm, and explicit
    ``sigma``/``tau`` override both. With ``restart`` the iteration is
    restarted every ``restart_check`` iterations, from the running average or
    the current iterate (whichever moves less under one more step), whenever
    that residual has decayed enough since the previous restart. Averaging
    cancels the slowly damped rotation between image and gradient duals that
    otherwise dominates for large ``lam``.
    """
    problem = PrimalDualProblem(sinogram, cfg)
    if x0 is None:
        x = np.zeros(problem.shape)
    else:
        if np.shape(x0) != problem.shape:
            raise ShapeError(f"x0 has shape {np.shape(x0)}, expected {problem.shape}")
        x = np.array(x0, dtype=float)
    x_bar = x.copy()
    p = np.zeros((2,) + problem.shape)
    q = np.zeros_like(problem.data)

    totals, count = [np.zeros_like(v) for v in (x, p, q)], 0
    last_residual = problem.residual(x, p, q) if cfg.restart else 0.0
    previous = math.inf
    for k in range(1, cfg.iterations + 1):
        x, x_bar, p, q = problem.step(x, x_bar, p, q)
        if cfg.restart:
            for total, value in zip(totals, (x, p, q)):
                total += value
            count += 1
            if k % cfg.restart_check == 0 and k < cfg.iterations:
                average = tuple(total / count for total in totals)
                candidate, residual = problem.best_of((x, p, q), average)
                if (residual <= RESTART_SUFFICIENT * last_residual
                        or RESTART_NECESSARY * last_residual >= residual > previous
                        or count >= RESTART_ARTIFICIAL * k):
                    x, p, q = (value.copy() for value in candidate)
                    x_bar = x.copy()
                    totals, count = [np.zeros_like(v) for v in (x, p, q)], 0
                    last_residual, previous = residual, math.inf
                    logger.debug("TV restart at iteration %d, residual %.3e", k, residual)
                else:
                    previous = residual
        if k % 50 == 0:
            logger.debug("TV iteration %d objective %.6e", k, tv_objective(x, sinogram, cfg.lam))
    if cfg.restart and count:
        x = problem.best_of((x, p, q), tuple(total / count for total in totals))[0][0]
    return x


def psnr(x, reference, peak=1.0):
    """Peak signal-to-noise ratio in dB; identical images give ``math.inf``."""
    x, reference = np.asarray(x, dtype=float), np.asarray(reference, dtype=float)
    if x.shape != reference.shape:
        raise ShapeError(f"image sizes differ: {x.shape} vs {reference.shape}")
    if peak <= 0:
        raise ConfigError(f"peak must be positive, got {peak}")
    mse = float(np.mean((x - reference) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def select_tv_lambda(sinogram, reference, cfg, grid=TV_LAMBDA_GRID):
    """Pick the TV weight with the best PSNR against ``reference``.

    Returns ``(best_lambda, best_image, {lambda: psnr})``.
    """
    scores, best = {}, None
    for lam in grid:
        image = tv_reconstruct(sinogram, TvConfig(**{**cfg.__dict__, 'lam': lam}))
        scores[lam] = psnr(image, reference)
        if best is None or scores[lam] > scores[best[0]]:
            best = (lam, image)
        logger.info("TV lambda %.3g PSNR %.2f dB", lam, scores[lam])
    return best[0], best[1], scores

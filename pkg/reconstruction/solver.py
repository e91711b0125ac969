"""Accelerated proximal gradient with Lipschitz backtracking for E = D + R.

The regularizer is handled by gradient steps and the Gaussian data term by
its proximal operator, computed with a fixed number of conjugate-gradient
iterations on the normal equations.
"""
from dataclasses import dataclass
import logging
import math
from typing import Optional

import numpy as np

from .exceptions import ConfigError, DivergenceError, ShapeError
from .tomography import Geometry, Sinogram, back_project, fbp, forward_project, system_matrix

logger = logging.getLogger(__name__)

DATA_TERM_KINDS = ('tomographic', 'identity', 'none')
MAP_KINDS = ('tomographic', 'identity')


@dataclass(frozen=True, eq=False)
class DataTerm:
    """D(x, f) = ||Ax - f||^2 / (2 sigma2); kind ``none`` is D = 0."""

    kind: str
    observation: Optional[np.ndarray]
    sigma2: float = 1.0
    geometry: Optional[Geometry] = None
    image_size: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in DATA_TERM_KINDS:
            raise ConfigError(f"data term kind must be one of {DATA_TERM_KINDS}, got {self.kind!r}")
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")
        if self.kind == 'tomographic':
            if self.geometry is None or np.shape(self.observation) != self.geometry.shape:
                raise ShapeError("tomographic data term needs a geometry matching the observation")
            object.__setattr__(self, 'image_size', self.geometry.image_size)
        elif self.kind == 'identity':
            object.__setattr__(self, 'image_size', tuple(np.shape(self.observation)))
        elif self.image_size is None:
            raise ConfigError("data term of kind 'none' needs an image_size")

    @classmethod
    def tomographic(cls, sinogram, sigma2=1.0):
        return cls('tomographic', np.asarray(sinogram.values, dtype=float), sigma2, sinogram.geometry)

    @classmethod
    def identity(cls, image, sigma2=1.0):
        return cls('identity', np.asarray(image, dtype=float), sigma2)

    @classmethod
    def none(cls, image_size):
        return cls('none', None, image_size=tuple(image_size))

    def _residual(self, x):
        if self.kind == 'tomographic':
            return forward_project(x, self.geometry).values - self.observation
        return x - self.observation

    def value(self, x):
        if self.kind == 'none':
            return 0.0
        residual = self._residual(x)
        return float(np.vdot(residual, residual)) / (2.0 * self.sigma2)

    def gradient(self, x):
        if self.kind == 'none':
            return np.zeros_like(x)
        residual = self._residual(x)
        if self.kind == 'tomographic':
            residual = back_project(Sinogram(self.geometry, residual))
        return residual / self.sigma2


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 1000
    alpha0: float = 1e-2
    gamma1: float = 0.5
    gamma2: float = 1.0 / 1.5
    cg_iters: int = 10
    alpha_min: float = 1e-12
    alpha_max: float = 1e10
    log_every: int = 50

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError(f"iterations must be non-negative, got {self.iterations}")
        if not self.alpha0 > 0:
            raise ConfigError(f"alpha0 must be positive, got {self.alpha0}")
        for name in ('gamma1', 'gamma2'):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if self.cg_iters < 1:
            raise ConfigError(f"cg_iters must be at least 1, got {self.cg_iters}")


@dataclass(frozen=True)
class IterateRecord:
    t: int
    energy: float
    regularizer: float
    data: float
    alpha: float
    backtracks: int
    # Q - R(x^{t+1}) at acceptance; never negative.
    margin: float


def conjugate_gradient(apply, rhs, x0, iterations):
    """``iterations`` CG steps for the SPD system ``apply(x) = rhs``.

    Returns ``(x, breakdown)`` where ``breakdown`` signals a non-positive
    curvature direction; the current iterate is returned in that case.
    """
    x = x0.copy()
    r = rhs - apply(x)
    p = r.copy()
    rs_old = float(np.vdot(r, r))
    for _ in range(iterations):
        if rs_old == 0.0:
            break
        ap = apply(p)
        curvature = float(np.vdot(p, ap))
        if not curvature > 0:
            return x, True
        step = rs_old / curvature
        x = x + step * p
        r = r - step * ap
        rs_new = float(np.vdot(r, r))
        p = r + (rs_new / rs_old) * p
        rs_old = rs_new
    return x, False


def prox_data(y, alpha, term, cg_iters=10, return_flag=False):
    """argmin_x alpha * D(x, f) + 1/2 ||x - y||^2."""
    if alpha < 0:
        raise ConfigError(f"alpha must be non-negative, got {alpha}")
    y = np.asarray(y, dtype=float)
    breakdown = False
    if alpha == 0 or term.kind == 'none':
        x = y.copy()
    elif term.kind == 'identity':
        c = alpha / term.sigma2
        x = y + (c / (1.0 + c)) * (term.observation - y)
    else:
        c = alpha / term.sigma2
        matrix = system_matrix(term.geometry)

        def normal_operator(v):
            return v + c * (matrix.T @ (matrix @ v))

        rhs = y.ravel() + c * (matrix.T @ term.observation.ravel())
        x, breakdown = conjugate_gradient(normal_operator, rhs, y.ravel(), cg_iters)
        x = x.reshape(y.shape)
        if breakdown:
            logger.warning("CG breakdown in data prox (alpha=%.3e); returning current iterate", alpha)
    return (x, breakdown) if return_flag else x


def apgd(term, regularizer, x0, cfg, accelerated=True, callback=None):
    """Minimize D(x, f) + R(x); returns ``(x, records)``.

    ``regularizer`` provides ``energy(x)`` and ``energy_and_grad_input(x)``.
    ``accelerated=False`` drops the momentum term.
    """
    x = np.array(x0, dtype=float)
    if term.image_size is not None and x.shape != tuple(term.image_size):
        raise ShapeError(f"x0 has shape {x.shape}, expected {tuple(term.image_size)}")
    x_prev = x.copy()
    alpha = cfg.alpha0
    records = []
    for t in range(1, cfg.iterations + 1):
        x_bar = x + (t / (t + 3.0)) * (x - x_prev) if accelerated else x
        r_bar, g = regularizer.energy_and_grad_input(x_bar)
        if not math.isfinite(r_bar) or not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite regularizer at extrapolated point", step=t, partial=x)
        backtracks = 0
        while True:
            candidate = prox_data(x_bar - alpha * g, alpha, term, cfg.cg_iters)
            diff = candidate - x_bar
            bound = r_bar + float(np.vdot(g, diff)) + float(np.vdot(diff, diff)) / (2.0 * alpha)
            r_candidate = regularizer.energy(candidate)
            if not math.isfinite(r_candidate):
                raise DivergenceError("non-finite regularizer at candidate", step=t, partial=x)
            if r_candidate <= bound:
                used_alpha = alpha
                alpha = min(alpha / cfg.gamma1, cfg.alpha_max)
                break
            alpha *= cfg.gamma2
            backtracks += 1
            if alpha < cfg.alpha_min:
                raise DivergenceError(
                    f"step size fell below {cfg.alpha_min:g}; regularizer is not smooth enough here",
                    step=t, partial=x,
                )
        x_prev, x = x, candidate
        data_value = term.value(x)
        records.append(IterateRecord(
            t, r_candidate + data_value, r_candidate, data_value, used_alpha, backtracks,
            bound - r_candidate,
        ))
        if callback is not None:
            callback(t, x)
        if t % cfg.log_every == 0:
            logger.debug("apgd t=%d E=%.6e alpha=%.3e", t, r_candidate + data_value, used_alpha)
    return x, records


def initial_estimate(term):
    """FBP for tomographic data, the observation itself for identity data."""
    if term.kind == 'tomographic':
        return fbp(Sinogram(term.geometry, term.observation))
    if term.kind == 'identity':
        return term.observation.copy()
    raise ConfigError("kind 'none' has no observation to start from; pass x0 explicitly")


def map_reconstruct(observation, kind, regularizer, cfg, sigma2=1.0, x0=None):
    """MAP estimate for a sinogram (``tomographic``) or a noisy image (``identity``)."""
    if kind not in MAP_KINDS:
        raise ConfigError(f"kind must be one of {MAP_KINDS}, got {kind!r}")
    if kind == 'tomographic':
        term = DataTerm.tomographic(observation, sigma2)
    else:
        term = DataTerm.identity(observation, sigma2)
    if x0 is None:
        x0 = initial_estimate(term)
    return apgd(term, regularizer, x0, cfg)


def objective(term, regularizer, x):
    return term.value(x) + regularizer.energy(x)

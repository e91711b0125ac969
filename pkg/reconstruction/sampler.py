"""Unadjusted Langevin dynamics and the persistent replay buffer."""
from collections import Counter
from dataclasses import dataclass
import logging
import math
import threading
from typing import Optional, Tuple

import numpy as np

from .exceptions import ConfigError, DivergenceError, UsageError

logger = logging.getLogger(__name__)

# Per-step value clamp used as a divergence guard when enabled.
GUARD_RANGE = (-0.1, 1.1)


@dataclass(frozen=True)
class SamplerConfig:
    epsilon: float = 1.0
    beta: float = 7.5e-3
    steps: int = 500
    clamp: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        # beta = 0 is accepted as the noiseless limit.
        if self.beta < 0:
            raise ConfigError(f"beta must be non-negative, got {self.beta}")
        if self.steps < 0:
            raise ConfigError(f"steps must be non-negative, got {self.steps}")

    @property
    def noise_scale(self):
        return math.sqrt(self.beta * self.epsilon)


def chain_rng(seed, index):
    """Generator of chain ``index`` under the global ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def chain_rngs(seed, count, offset=0):
    return [chain_rng(seed, offset + i) for i in range(count)]


def standard_normal(rng, shape):
    """Noise of ``shape``; a list of generators draws one leading-axis slice each."""
    if isinstance(rng, (list, tuple)):
        if len(rng) != shape[0]:
            raise ConfigError(f"{len(rng)} generators for a batch of {shape[0]} chains")
        return np.stack([g.standard_normal(shape[1:]) for g in rng])
    return rng.standard_normal(shape)


def ula_step(x, grad_energy, cfg, rng):
    """One step ``x - (eps/2) grad R(x) + sqrt(beta eps) xi``."""
    grad = grad_energy(x)
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("energy gradient is not finite")
    noise = standard_normal(rng, np.shape(x))
    out = x - 0.5 * cfg.epsilon * grad + cfg.noise_scale * noise
    if cfg.clamp is not None:
        np.clip(out, cfg.clamp[0], cfg.clamp[1], out=out)
    return out


def ula_run(x0, grad_energy, cfg, rng, tap=None, tap_stride=1):
    """Compose ``cfg.steps`` ULA steps; ``tap(step, x)`` sees every ``tap_stride``-th state."""
    x = np.array(x0, copy=True)
    for step in range(1, cfg.steps + 1):
        try:
            x = ula_step(x, grad_energy, cfg, rng)
        except DivergenceError as exc:
            raise DivergenceError("Langevin chain diverged", step=step, partial=x) from exc
        if tap is not None and step % tap_stride == 0:
            tap(step, x)
    return x


@dataclass(frozen=True, eq=False)
class Draw:
    indices: np.ndarray
    images: np.ndarray


class ReplayBuffer:
    """Persistent pool of chain states.

    ``draw`` hands out a batch of distinct slots; ``refill`` closes the
    transaction by writing the chain results (or re-initializations) back into
    those slots. Slots of an open draw are not handed out again.
    """

    def __init__(self, entries, p_reinit, rng):
        if not 0 <= p_reinit <= 1:
            raise ConfigError(f"p_reinit must lie in [0, 1], got {p_reinit}")
        self.entries = entries
        self.p_reinit = p_reinit
        self.rng = rng
        self.refills = Counter()
        self._pending = {}
        self._lock = threading.Lock()

    @property
    def capacity(self):
        return len(self.entries)

    @property
    def image_size(self):
        return self.entries.shape[1:]

    def __len__(self):
        return len(self.entries)

    def draw(self, batch_size):
        with self._lock:
            busy = set().union(*self._pending.values()) if self._pending else set()
            free = np.setdiff1d(np.arange(self.capacity), np.fromiter(busy, dtype=int))
            if batch_size > len(free):
                raise UsageError(f"cannot draw {batch_size} slots, only {len(free)} are free")
            indices = self.rng.choice(free, size=batch_size, replace=False)
            draw = Draw(indices, self.entries[indices].copy())
            self._pending[id(draw)] = set(indices.tolist())
            return draw

    def refill(self, draw, x_minus, data_sampler):
        """Write ``x_minus`` back, re-initializing each slot with probability ``p_reinit``.

        Re-initialized slots receive uniform noise or ``data_sampler()`` with
        equal chance.
        """
        with self._lock:
            if self._pending.pop(id(draw), None) is None:
                raise UsageError("refill called without a matching open draw")
            for slot, chain in zip(draw.indices, x_minus):
                if self.rng.random() >= self.p_reinit:
                    self.entries[slot] = chain
                    self.refills['chain'] += 1
                elif self.rng.random() > 0.5:
                    self.entries[slot] = data_sampler()
                    self.refills['data'] += 1
                else:
                    self.entries[slot] = self.rng.uniform(0.0, 1.0, size=self.image_size)
                    self.refills['noise'] += 1


def buffer_init(capacity, image_size, rng, p_reinit=0.01, dtype=np.float64):
    if capacity < 1:
        raise ConfigError(f"buffer capacity must be positive, got {capacity}")
    entries = rng.uniform(0.0, 1.0, size=(capacity,) + tuple(image_size)).astype(dtype)
    logger.debug("Initialized replay buffer with %d entries of %s", capacity, tuple(image_size))
    return ReplayBuffer(entries, p_reinit, rng)

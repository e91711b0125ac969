"""Maximum-likelihood training of an energy model with persistent Langevin chains."""
from dataclasses import dataclass, field
import logging
import time
from typing import List, Optional

import numpy as np

from .exceptions import ConfigError, DivergenceError, ShapeError
from .sampler import SamplerConfig, buffer_init, chain_rngs, ula_run

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 25
    n_steps: int = 0
    sigma_data: float = 1.5e-2
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    buffer_size: int = 8000
    p_reinit: float = 0.01
    seed: int = 0
    grad_clip: Optional[float] = 100.0
    checkpoint_every: int = 0
    log_every: int = 10

    def __post_init__(self):
        for name in ('learning_rate', 'adam_eps', 'batch_size', 'buffer_size'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ('beta1', 'beta2'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if self.n_steps < 0 or self.sigma_data < 0 or self.checkpoint_every < 0:
            raise ConfigError("n_steps, sigma_data and checkpoint_every must be non-negative")
        if self.batch_size > self.buffer_size:
            raise ConfigError("batch_size cannot exceed buffer_size")


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n_parameters):
        return cls(np.zeros(n_parameters), np.zeros(n_parameters), 0)


@dataclass(frozen=True)
class TrainingRecord:
    step: int
    energy_plus: float
    energy_minus: float
    grad_norm: float
    wall_time: float
    clipped: bool = False


def adam_update(params, state, grad, lr, beta1, beta2, eps):
    """Bias-corrected Adam step; returns ``(new_params, new_state)``."""
    step = state.step + 1
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite parameter gradient", step=step)
    first = beta1 * state.first_moment + (1.0 - beta1) * grad
    second = beta2 * state.second_moment + (1.0 - beta2) * grad ** 2
    first_hat = first / (1.0 - beta1 ** step)
    second_hat = second / (1.0 - beta2 ** step)
    new_params = params - lr * first_hat / (np.sqrt(second_hat) + eps)
    return new_params, AdamState(first, second, step)


def smooth_data_sample(dataset, sigma_data, rng):
    """A dataset image with i.i.d. N(0, sigma_data^2) pixel noise added."""
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")
    image = np.array(dataset[rng.integers(len(dataset))], dtype=float)
    if sigma_data > 0:
        image += sigma_data * rng.standard_normal(image.shape)
    return image


def smooth_data_batch(dataset, sigma_data, rng, batch_size):
    return np.stack([smooth_data_sample(dataset, sigma_data, rng) for _ in range(batch_size)])


def nll_grad_estimate(x_plus, x_minus, model):
    """Positive-phase minus negative-phase mean parameter gradient."""
    if len(x_plus) == 0 or len(x_minus) == 0:
        raise ConfigError("positive and negative batches must be non-empty")
    if np.shape(x_plus)[1:] != np.shape(x_minus)[1:]:
        raise ShapeError(
            f"batches hold different image sizes: {np.shape(x_plus)[1:]} vs {np.shape(x_minus)[1:]}"
        )
    return model.grad_params(x_plus) - model.grad_params(x_minus)


def energy_gap(model, dataset, rng, n_noise=100):
    """Mean energy over ``dataset`` and over uniform-noise images of the same size."""
    data = np.asarray(dataset, dtype=float)
    noise = rng.uniform(0.0, 1.0, size=(n_noise,) + data.shape[1:])
    return float(np.mean(model.energy(data))), float(np.mean(model.energy(noise)))


def train(dataset, cfg, model, checkpoint=None):
    """Run ``cfg.n_steps`` parameter updates; returns ``(model, records)``.

    ``checkpoint(model, step)`` is called every ``cfg.checkpoint_every`` steps,
    after the last step, on divergence (with the last good model) and on
    keyboard interrupt.
    """
    dataset = np.asarray(dataset)
    if cfg.n_steps == 0:
        return model, []
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")

    rng = np.random.default_rng(cfg.seed)
    buffer = buffer_init(cfg.buffer_size, dataset.shape[1:], rng, cfg.p_reinit)
    state = AdamState.zeros(model.flat_parameters().size)
    records: List[TrainingRecord] = []
    started = time.monotonic()
    logger.info(
        "Training for %d steps, batch %d, K=%d, buffer %d",
        cfg.n_steps, cfg.batch_size, cfg.sampler.steps, cfg.buffer_size,
    )
    if cfg.sampler.clamp is not None:
        logger.info("Langevin value clamp %s enabled", cfg.sampler.clamp)

    step = 0
    try:
        for step in range(1, cfg.n_steps + 1):
            x_plus = smooth_data_batch(dataset, cfg.sigma_data, rng, cfg.batch_size)
            draw = buffer.draw(cfg.batch_size)
            rngs = chain_rngs(cfg.seed, cfg.batch_size, offset=step * cfg.batch_size)
            try:
                x_minus = ula_run(draw.images, model.grad_input, cfg.sampler, rngs)
            except DivergenceError as exc:
                raise DivergenceError(f"negative chains diverged: {exc}", step=step) from exc
            buffer.refill(draw, x_minus, lambda: smooth_data_sample(dataset, cfg.sigma_data, rng))

            energy_plus = float(np.mean(model.energy(x_plus)))
            energy_minus = float(np.mean(model.energy(x_minus)))
            if not (np.isfinite(energy_plus) and np.isfinite(energy_minus)):
                raise DivergenceError("non-finite energy", step=step)

            grad = nll_grad_estimate(x_plus, x_minus, model)
            grad_norm = float(np.linalg.norm(grad))
            clipped = cfg.grad_clip is not None and grad_norm > cfg.grad_clip
            if clipped:
                grad = grad * (cfg.grad_clip / grad_norm)
                logger.info("Step %d: gradient norm %.3e clipped to %.3e", step, grad_norm, cfg.grad_clip)
            params, state = adam_update(
                model.flat_parameters(), state, grad,
                cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps,
            )
            model = model.with_flat_parameters(params)

            records.append(TrainingRecord(
                step, energy_plus, energy_minus, grad_norm, time.monotonic() - started, clipped,
            ))
            if step % cfg.log_every == 0:
                logger.info(
                    "Step %d: E+ %.4f E- %.4f |grad| %.3e", step, energy_plus, energy_minus, grad_norm,
                )
            if checkpoint is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                checkpoint(model, step)
    except DivergenceError as exc:
        logger.error("Training diverged: %s", exc)
        if checkpoint is not None:
            checkpoint(model, step - 1)
        exc.partial = model
        raise
    except KeyboardInterrupt:
        logger.warning("Training interrupted at step %d, writing checkpoint", step)
        if checkpoint is not None:
            checkpoint(model, step)
        raise

    if checkpoint is not None:
        checkpoint(model, cfg.n_steps)
    logger.info("Training finished after %d steps (%.1fs)", cfg.n_steps, time.monotonic() - started)
    return model, records

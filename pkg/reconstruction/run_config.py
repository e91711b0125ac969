"""Flat ``key = value`` run configuration shared by every command."""
import logging
import math
from pathlib import Path

from django.conf import settings

from .classical import TvConfig
from .exceptions import ConfigError
from .sampler import GUARD_RANGE, SamplerConfig
from .serializers import RunConfigSerializer
from .solver import SolverConfig
from .tomography import Geometry
from .trainer import TrainConfig

logger = logging.getLogger(__name__)

# (start, stop, n_angles at 128x128) per acquisition problem; counts scale with size.
PROBLEM_ANGLES = {
    'few-view': (0.0, math.pi, 20),
    'limited-angle': (0.0, math.pi / 2, 270),
    'full': (0.0, math.pi, 180),
}
REFERENCE_SIZE = 128


def parse_lines(text):
    """Split config text into a ``{key: raw string}`` mapping.

    Blank lines and ``#`` comments are skipped; a repeated key is an error.
    """
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {number}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"line {number}: duplicate key {key!r}")
        values[key] = value
    return values


def _format_errors(errors):
    parts = []
    for key, messages in errors.items():
        if isinstance(messages, dict):
            messages = [str(m) for m in messages.values()]
        parts.append(f"{key}: {' '.join(str(m) for m in messages)}")
    return '; '.join(parts)


class RunConfig:
    """Validated configuration; every value has been type- and range-checked."""

    def __init__(self, values, explicit=()):
        self.values = dict(values)
        self.explicit = frozenset(explicit)

    @classmethod
    def from_mapping(cls, raw):
        serializer = RunConfigSerializer(data=dict(raw))
        if not serializer.is_valid():
            raise ConfigError(f"invalid run config: {_format_errors(serializer.errors)}")
        return cls(serializer.validated_data, explicit=raw)

    def is_set(self, key):
        """True when ``key`` came from the config file or an override, not a default."""
        return key in self.explicit

    @classmethod
    def parse(cls, text, overrides=None):
        raw = parse_lines(text)
        raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(raw)

    @classmethod
    def load(cls, path=None, overrides=None):
        text = Path(path).read_text(encoding='utf-8') if path else ''
        return cls.parse(text, overrides)

    def __getattr__(self, name):
        try:
            return self.__dict__['values'][name]
        except KeyError:
            raise AttributeError(name) from None

    def get(self, key, default=None):
        return self.values.get(key, default)

    def echo(self):
        """JSON-safe copy of every validated value, for manifests."""
        return {key: value for key, value in sorted(self.values.items())}

    @property
    def output_root(self):
        return Path(self.values.get('output_dir') or settings.TOMO_EBM_OUTPUT_DIR)

    @property
    def image_size(self):
        return (self.size, self.size)

    def geometry(self):
        start, stop, count = PROBLEM_ANGLES[self.problem]
        if 'n_angles' in self.values:
            count = self.n_angles
        elif self.problem != 'few-view':
            count = max(1, round(count * self.size / REFERENCE_SIZE))
        start = self.values.get('angle_start', start)
        stop = self.values.get('angle_stop', stop)
        return Geometry.parallel(
            self.image_size, count, start, stop,
            self.values.get('n_detectors'), self.det_spacing,
        )

    def sampler(self):
        return SamplerConfig(
            epsilon=self.epsilon, beta=self.beta, steps=self.steps,
            clamp=GUARD_RANGE if self.clamp else None,
        )

    def trainer(self):
        return TrainConfig(
            learning_rate=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
            adam_eps=self.adam_eps, batch_size=self.batch_size, n_steps=self.n_steps,
            sigma_data=self.sigma_data, sampler=self.sampler(), buffer_size=self.buffer_size,
            p_reinit=self.p_reinit, seed=self.seed,
            grad_clip=self.grad_clip or None, checkpoint_every=self.checkpoint_every,
            log_every=self.log_every,
        )

    def solver(self):
        return SolverConfig(
            iterations=self.iterations, alpha0=self.alpha0, gamma1=self.gamma1,
            gamma2=self.gamma2, cg_iters=self.cg_iters, alpha_min=self.alpha_min,
            alpha_max=self.alpha_max,
        )

    def tv(self, lam=None):
        lam = lam if lam is not None else self.values.get('tv_lambda')
        if lam is None:
            raise ConfigError("tv_lambda is not set")
        return TvConfig(lam=lam, iterations=self.tv_iterations, nonneg=self.tv_nonneg,
                        seed=self.seed)

    @property
    def posterior_burn_in(self):
        # Twice the training chain length unless set.
        return self.values.get('burn_in', 2 * self.steps)

    def noise_variance(self, peak):
        """sigma^2 of the data term: ``sigma2`` if set, else from ``noise_level * peak``."""
        if 'sigma2' in self.values:
            return self.sigma2
        return max(self.noise_level * float(peak), 1e-6) ** 2

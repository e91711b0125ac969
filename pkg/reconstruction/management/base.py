"""Shared plumbing for the toolkit's management commands.

Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
numerical failures (divergence, aborted iterations).
"""
import logging
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ..exceptions import ConfigError, DivergenceError, FormatError, ShapeError, UsageError
from ..formats import read_checkpoint, read_image, read_sinogram
from ..run_config import RunConfig
from ..runs import RunContext
from ..tensor_core import runtime_dtype

logger = logging.getLogger(__name__)

USAGE_EXIT = 1
NUMERIC_EXIT = 2


def parse_assignments(items):
    """``['key=value', ...]`` from repeated ``--set`` flags."""
    values = {}
    for item in items:
        key, sep, value = item.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        values[key.strip()] = value.strip()
    return values


def require(options, name, what=None):
    value = options.get(name)
    if not value:
        flag = '--' + name.replace('_', '-')
        raise UsageError(f"{what or name.replace('_', ' ')} required ({flag})")
    return value


class ReconstructionCommand(BaseCommand):
    """Base class: loads the run config, opens a run directory and maps errors to exit codes.

    Subclasses implement ``add_command_arguments`` and ``run(context, config, options)``;
    ``config_flags`` maps command-line options onto run config keys.
    """

    config_flags = {}

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Path to a key=value run config file')
        parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                            help='Override a single run config value (repeatable)')
        parser.add_argument('--out', help='Run directory (default: under TOMO_EBM_OUTPUT_DIR)')
        parser.add_argument('--seed', type=int, help='Global random seed')
        parser.add_argument('--size', type=int, help='Image extent in pixels')
        parser.add_argument('--threads', type=int, help='Worker threads for angles and chains')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def overrides(self, options):
        values = {key: options.get(key) for key in ('seed', 'size', 'threads')}
        for flag, key in self.config_flags.items():
            values[key] = options.get(flag)
        values.update(parse_assignments(options.get('set') or []))
        return values

    def handle(self, *args, **options):
        command = self.__module__.rsplit('.', 1)[-1]
        try:
            config = RunConfig.load(options.get('config'), self.overrides(options))
        except (ConfigError, OSError) as exc:
            raise CommandError(str(exc), returncode=USAGE_EXIT)
        if config.get('threads'):
            settings.TOMO_EBM_THREADS = config.threads

        context = RunContext(command, config, options.get('out')).start()
        try:
            self.run(context, config, options)
        except (UsageError, ConfigError, ShapeError, FormatError, OSError) as exc:
            context.finish('FAILED', USAGE_EXIT, str(exc))
            raise CommandError(str(exc), returncode=USAGE_EXIT)
        except DivergenceError as exc:
            status = 'PARTIAL' if exc.partial is not None else 'FAILED'
            context.finish(status, NUMERIC_EXIT, str(exc))
            raise CommandError(f"numerical failure: {exc}", returncode=NUMERIC_EXIT)
        except KeyboardInterrupt:
            context.finish('FAILED', USAGE_EXIT, 'interrupted')
            raise CommandError('interrupted', returncode=USAGE_EXIT)
        except Exception as exc:
            # Unexpected failures still leave a manifest and a closed run record.
            logger.exception("Command %s failed unexpectedly", command)
            context.finish('FAILED', USAGE_EXIT, f"{type(exc).__name__}: {exc}")
            raise
        context.finish('SUCCEEDED', 0)
        self.stdout.write(self.style.SUCCESS(f"{command}: artifacts in {context.output_dir}"))

    def run(self, context, config, options):
        raise NotImplementedError

    # Input helpers

    def load_image(self, path):
        return read_image(path)

    def load_sinogram(self, path, config):
        return read_sinogram(path, config.image_size, config.det_spacing)

    def load_model(self, options, config):
        path = require(options, 'checkpoint', 'checkpoint')
        model = read_checkpoint(path, runtime_dtype())
        if model.input_size != config.image_size:
            raise UsageError(
                f"checkpoint expects {model.input_size[0]}x{model.input_size[1]} images, "
                f"config size is {config.size}"
            )
        return model

    def load_dataset(self, path):
        """A single TIMG file or a directory of them, stacked in name order."""
        path = Path(path)
        files = sorted(path.glob('*.timg')) if path.is_dir() else [path]
        if not files:
            raise UsageError(f"no .timg images in {path}")
        return np.stack([read_image(f) for f in files])

    def report(self, message):
        self.stdout.write(message)
        logger.info(message)

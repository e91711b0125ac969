"""Run bookkeeping: output directories, manifests and database records."""
import hashlib
from importlib import metadata
import json
import logging
import math
from pathlib import Path
import platform

from django.conf import settings
from django.db import DatabaseError, transaction
from django.utils import timezone

from .formats import atomic_write
from .models import ReconstructionMetric, RunRecord, generate_id

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ('numpy', 'scipy', 'scikit-image', 'Django', 'djangorestframework')
MANIFEST_NAME = 'manifest.json'


def package_versions():
    versions = {'python': platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def file_digest(path):
    digest = hashlib.sha256()
    with Path(path).open('rb') as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


class RunContext:
    """One command invocation: where its artifacts go and how it is recorded.

    The manifest is written on every exit path; the database row is optional
    (``TOMO_EBM_RECORD_RUNS``) and failures to write it only log a warning.
    """

    def __init__(self, command, config, output_dir=None):
        self.id = generate_id()
        self.command = command
        self.config = config
        self.output_dir = Path(output_dir) if output_dir else (
            config.output_root / f"{command}_{self.id[:8]}"
        )
        self.artifacts = []
        self.metrics = []
        self.extra = {}
        self.record = None

    def start(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        if settings.TOMO_EBM_RECORD_RUNS:
            try:
                self.record = RunRecord.objects.create(
                    id=self.id, command=self.command, config=_json_safe(self.config.echo()),
                    seed=self.config.seed, output_dir=str(self.output_dir),
                )
            except DatabaseError as exc:
                logger.warning("Could not record run %s in the database: %s", self.id, exc)
        logger.info("Run %s (%s) writing to %s", self.id, self.command, self.output_dir)
        return self

    def path(self, name):
        """Path of an artifact inside the run directory; registers it for the manifest."""
        target = self.output_dir / name
        if target not in self.artifacts:
            self.artifacts.append(target)
        return target

    def add_metric(self, method, problem, image, psnr):
        self.metrics.append({'method': method, 'problem': problem, 'image': str(image),
                             'psnr': psnr})

    def manifest(self, status, exit_code, message=''):
        return _json_safe({
            'run_id': self.id,
            'command': self.command,
            'status': status,
            'exit_code': exit_code,
            'message': message,
            'seed': self.config.seed,
            'deterministic': settings.TOMO_EBM_DETERMINISTIC,
            'dtype': settings.TOMO_EBM_DTYPE,
            'config': self.config.echo(),
            'versions': package_versions(),
            'artifacts': {
                path.name: file_digest(path) for path in self.artifacts if path.exists()
            },
            'metrics': self.metrics,
            **self.extra,
        })

    def finish(self, status, exit_code, message=''):
        manifest = self.manifest(status, exit_code, message)
        atomic_write(self.output_dir / MANIFEST_NAME,
                     json.dumps(manifest, indent=2, sort_keys=True).encode('utf-8'))
        if self.record is not None:
            try:
                with transaction.atomic():
                    self.record.status = status
                    self.record.exit_code = exit_code
                    self.record.message = message
                    self.record.manifest = manifest
                    self.record.finished_at = timezone.now()
                    self.record.save()
                    ReconstructionMetric.objects.bulk_create([
                        ReconstructionMetric(
                            run=self.record, method=m['method'], problem=m['problem'],
                            image=m['image'],
                            psnr=m['psnr'] if m['psnr'] is not None and math.isfinite(m['psnr'])
                            else None,
                        )
                        for m in self.metrics
                    ])
            except DatabaseError as exc:
                logger.warning("Could not update run record %s: %s", self.id, exc)
        logger.info("Run %s finished with status %s", self.id, status)
        return manifest

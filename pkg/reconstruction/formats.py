"""Binary artifacts (images, sinograms, model checkpoints) and CSV/PGM exports.

All binary formats are little-endian:

* TIMG: magic, u32 height, u32 width, height*width float32 pixels.
* TSIN: magic, u32 n_angles, u32 n_detectors, n_angles float64 angles,
  n_angles*n_detectors float32 values.
* TEBM: magic, u8 version, u32 n_f, u32 height, u32 width, f64 leak,
  f64 temperature, then every layer's kernel and bias as float32 in the
  layer-major order of ``ModelParams.flat_parameters``.
"""
import csv
import dataclasses
import logging
import os
from pathlib import Path
import struct
import tempfile

import numpy as np
from skimage import io, util

from .energy_model import ModelParams, layer_specs
from .exceptions import FormatError
from .tensor_core import ConvLayer
from .tomography import Geometry, Sinogram

logger = logging.getLogger(__name__)

IMAGE_MAGIC = b'TIMG'
SINOGRAM_MAGIC = b'TSIN'
CHECKPOINT_MAGIC = b'TEBM'
CHECKPOINT_VERSION = 1

_DIMS = struct.Struct('<II')
_CHECKPOINT_HEADER = struct.Struct('<BIIIdd')


def atomic_write(path, payload):
    """Write ``payload`` to a sibling temp file, fsync it, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(fd, 'wb') as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("Wrote %s (%d bytes)", path, len(payload))


class _Reader:
    """Cursor over a byte string that reports the offset of every failure."""

    def __init__(self, payload):
        self.payload = payload
        self.offset = 0

    def magic(self, expected):
        found = self.take(len(expected))
        if found != expected:
            raise FormatError(f"bad magic {found!r}, expected {expected!r}", 0)

    def take(self, count):
        end = self.offset + count
        if end > len(self.payload):
            raise FormatError(
                f"truncated file: need {count} bytes, {len(self.payload) - self.offset} left",
                self.offset,
            )
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, layout):
        return layout.unpack(self.take(layout.size))

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).astype(np.float64)

    def finish(self):
        if self.offset != len(self.payload):
            raise FormatError(f"{len(self.payload) - self.offset} trailing bytes", self.offset)


def _float32(values):
    return np.ascontiguousarray(values, dtype='<f4').tobytes()


def encode_image(image):
    image = np.asarray(image)
    if image.ndim != 2:
        raise FormatError(f"images are 2-D, got shape {image.shape}", 0)
    return IMAGE_MAGIC + _DIMS.pack(*image.shape) + _float32(image)


def decode_image(payload):
    reader = _Reader(payload)
    reader.magic(IMAGE_MAGIC)
    height, width = reader.unpack(_DIMS)
    image = reader.array('<f4', height * width).reshape(height, width)
    reader.finish()
    return image


def write_image(path, image):
    atomic_write(path, encode_image(image))


def read_image(path):
    return decode_image(Path(path).read_bytes())


def encode_sinogram(sinogram):
    geometry = sinogram.geometry
    return (
        SINOGRAM_MAGIC
        + _DIMS.pack(geometry.n_angles, geometry.n_detectors)
        + np.asarray(geometry.angles, dtype='<f8').tobytes()
        + _float32(sinogram.values)
    )


def decode_sinogram(payload, image_size, det_spacing=1.0):
    """Parse a TSIN payload; the image size is not stored and must be supplied."""
    reader = _Reader(payload)
    reader.magic(SINOGRAM_MAGIC)
    n_angles, n_detectors = reader.unpack(_DIMS)
    angles = reader.array('<f8', n_angles)
    values = reader.array('<f4', n_angles * n_detectors).reshape(n_angles, n_detectors)
    reader.finish()
    geometry = Geometry(tuple(angles), n_detectors, tuple(image_size), det_spacing)
    return Sinogram(geometry, values)


def write_sinogram(path, sinogram):
    atomic_write(path, encode_sinogram(sinogram))


def read_sinogram(path, image_size, det_spacing=1.0):
    return decode_sinogram(Path(path).read_bytes(), image_size, det_spacing)


def sinogram_file_size(n_angles, n_detectors):
    return len(SINOGRAM_MAGIC) + _DIMS.size + 8 * n_angles + 4 * n_angles * n_detectors


def encode_checkpoint(model):
    height, width = model.input_size
    header = _CHECKPOINT_HEADER.pack(
        CHECKPOINT_VERSION, model.n_f, height, width, model.leak, model.temperature,
    )
    return CHECKPOINT_MAGIC + header + _float32(model.flat_parameters())


def decode_checkpoint(payload, dtype=np.float64):
    reader = _Reader(payload)
    reader.magic(CHECKPOINT_MAGIC)
    version_offset = reader.offset
    version, n_f, height, width, leak, temperature = reader.unpack(_CHECKPOINT_HEADER)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", version_offset)
    layers = []
    for c_in, c_out, k, stride, padding in layer_specs(n_f, (height, width)):
        kernel = reader.array('<f4', c_out * c_in * k * k).reshape(c_out, c_in, k, k)
        bias = reader.array('<f4', c_out)
        layers.append(ConvLayer(kernel.astype(dtype), bias.astype(dtype), stride, padding))
    reader.finish()
    return ModelParams(tuple(layers), n_f, (height, width), leak, temperature)


def write_checkpoint(path, model):
    atomic_write(path, encode_checkpoint(model))
    logger.info("Saved checkpoint %s (%d parameters)", path, model.n_parameters)


def read_checkpoint(path, dtype=np.float64):
    return decode_checkpoint(Path(path).read_bytes(), dtype)


def export_pgm(path, image, low=0.0, high=1.0):
    """8-bit grayscale PGM of ``image`` windowed to ``[low, high]``."""
    scaled = np.clip((np.asarray(image, dtype=float) - low) / (high - low), 0.0, 1.0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    io.imsave(str(path), util.img_as_ubyte(scaled), check_contrast=False)


def write_csv(path, rows, fieldnames=None):
    """Write dataclass instances or dicts as CSV with a header row."""
    rows = [dataclasses.asdict(row) if dataclasses.is_dataclass(row) else dict(row) for row in rows]
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, extrasaction='ignore',
                                lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, '') for key in fieldnames})
    return path


def read_csv(path):
    with Path(path).open(encoding='utf-8', newline='') as handle:
        return list(csv.DictReader(handle))

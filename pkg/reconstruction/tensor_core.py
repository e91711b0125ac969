"""Dense 2-D convolution and leaky ReLU with exact reverse-mode derivatives.

Arrays follow the ``(channels, height, width)`` layout, optionally with a
leading batch axis ``(batch, channels, height, width)``. Convolution is a
cross-correlation (no kernel flip) with zero padding.
"""
from dataclasses import dataclass
import logging

import numpy as np

from .exceptions import ConfigError, ShapeError

logger = logging.getLogger(__name__)

SUPPORTED_STRIDES = (1, 2)


def runtime_dtype():
    """Floating point type selected by the ``TOMO_EBM_DTYPE`` setting."""
    from django.conf import settings

    name = getattr(settings, 'TOMO_EBM_DTYPE', 'float64')
    if name not in ('float32', 'float64'):
        raise ConfigError(f"TOMO_EBM_DTYPE must be float32 or float64, got {name!r}")
    return np.dtype(name)


def output_extent(extent, size, stride, padding):
    return (extent + 2 * padding - size) // stride + 1


@dataclass(frozen=True, eq=False)
class ConvLayer:
    kernel: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kernel.ndim != 4 or self.kernel.shape[2] != self.kernel.shape[3]:
            raise ShapeError(
                f"kernel must have shape (out_ch, in_ch, k, k), got {self.kernel.shape}"
            )
        if self.kernel.shape[2] < 1:
            raise ShapeError("kernel size must be at least 1")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(
                f"bias must have shape ({self.kernel.shape[0]},), got {self.bias.shape}"
            )
        if self.stride not in SUPPORTED_STRIDES:
            raise ShapeError(f"stride must be one of {SUPPORTED_STRIDES}, got {self.stride}")
        if self.padding < 0:
            raise ShapeError(f"padding must be non-negative, got {self.padding}")

    @property
    def out_channels(self):
        return self.kernel.shape[0]

    @property
    def in_channels(self):
        return self.kernel.shape[1]

    @property
    def size(self):
        return self.kernel.shape[2]

    @property
    def n_parameters(self):
        return self.kernel.size + self.bias.size

    def output_shape(self, height, width):
        out_h = output_extent(height, self.size, self.stride, self.padding)
        out_w = output_extent(width, self.size, self.stride, self.padding)
        if out_h < 1 or out_w < 1:
            raise ShapeError(
                f"input extent {height}x{width} is too small for a {self.size}x{self.size} "
                f"kernel with stride {self.stride} and padding {self.padding}"
            )
        return out_h, out_w


def _as_batch(array):
    if array.ndim == 3:
        return array[np.newaxis], True
    if array.ndim == 4:
        return array, False
    raise ShapeError(f"expected (C, H, W) or (N, C, H, W) array, got shape {array.shape}")


def _check_input(x, layer):
    if x.shape[1] != layer.in_channels:
        raise ShapeError(
            f"input has {x.shape[1]} channels but the layer expects {layer.in_channels}"
        )
    return layer.output_shape(x.shape[2], x.shape[3])


def _windows(layer, out_h, out_w):
    """Yield ``(ky, kx, row_slice, col_slice)`` over kernel offsets on the padded input."""
    s = layer.stride
    for ky in range(layer.size):
        rows = slice(ky, ky + s * out_h, s)
        for kx in range(layer.size):
            yield ky, kx, rows, slice(kx, kx + s * out_w, s)


def _pad(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def conv2d_forward(x, layer):
    """Cross-correlate ``x`` with ``layer.kernel`` and add the per-channel bias."""
    batch, squeeze = _as_batch(np.asarray(x))
    out_h, out_w = _check_input(batch, layer)
    padded = _pad(batch, layer.padding)
    dtype = np.result_type(batch, layer.kernel)
    out = np.zeros((batch.shape[0], layer.out_channels, out_h, out_w), dtype=dtype)
    for ky, kx, rows, cols in _windows(layer, out_h, out_w):
        patch = padded[:, :, rows, cols]
        out += np.einsum('nchw,oc->nohw', patch, layer.kernel[:, :, ky, kx], optimize=True)
    out += layer.bias[np.newaxis, :, np.newaxis, np.newaxis]
    return out[0] if squeeze else out


def conv2d_backward(x, layer, grad_out):
    """Adjoint of the linearization of :func:`conv2d_forward`.

    Returns ``(grad_input, grad_kernel, grad_bias)``; kernel and bias
    gradients are summed over the batch axis.
    """
    batch, squeeze = _as_batch(np.asarray(x))
    out_h, out_w = _check_input(batch, layer)
    grad, _ = _as_batch(np.asarray(grad_out))
    expected = (batch.shape[0], layer.out_channels, out_h, out_w)
    if grad.shape != expected:
        raise ShapeError(f"grad_out has shape {grad.shape}, expected {expected}")

    p = layer.padding
    padded = _pad(batch, p)
    dtype = np.result_type(batch, layer.kernel, grad)
    grad_padded = np.zeros(padded.shape, dtype=dtype)
    grad_kernel = np.zeros(layer.kernel.shape, dtype=dtype)
    for ky, kx, rows, cols in _windows(layer, out_h, out_w):
        patch = padded[:, :, rows, cols]
        grad_kernel[:, :, ky, kx] = np.einsum('nchw,nohw->oc', patch, grad, optimize=True)
        grad_padded[:, :, rows, cols] += np.einsum(
            'nohw,oc->nchw', grad, layer.kernel[:, :, ky, kx], optimize=True
        )
    grad_bias = grad.sum(axis=(0, 2, 3))
    height, width = batch.shape[2], batch.shape[3]
    grad_input = grad_padded[:, :, p:p + height, p:p + width]
    if squeeze:
        grad_input = grad_input[0]
    return grad_input, grad_kernel, grad_bias


def leaky_relu(x, leak):
    if not 0 <= leak < 1:
        raise ConfigError(f"leak must lie in [0, 1), got {leak}")
    return np.where(x >= 0, x, leak * x)


def leaky_relu_derivative(x, leak):
    """Slope of :func:`leaky_relu`; the slope at exactly zero is 1."""
    if not 0 <= leak < 1:
        raise ConfigError(f"leak must lie in [0, 1), got {leak}")
    x = np.asarray(x)
    dtype = x.dtype if np.issubdtype(x.dtype, np.floating) else np.float64
    return np.where(x >= 0, 1.0, leak).astype(dtype, copy=False)

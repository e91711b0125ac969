"""Convolutional energy R(x, phi) and the other regularizers sharing its interface.

Every energy accepts a single image ``(H, W)`` or a batch ``(N, H, W)``:

* ``energy(x)`` returns a float for one image and a length-N vector for a batch;
* ``grad_input(x)`` returns the gradient of each image's energy, shaped like ``x``;
* ``grad_params(x)`` returns the flat parameter gradient, averaged over the batch;
* ``flat_parameters()`` / ``with_flat_parameters(v)`` expose the parameter vector.

Flat parameter vectors are layer-major: for each layer the kernel in
``(out_ch, in_ch, k, k)`` row-major order, followed by its bias.
"""
from dataclasses import dataclass, replace
import logging
import math
from typing import Protocol, Tuple

import numpy as np

from .exceptions import ConfigError, ShapeError
from .tensor_core import (
    ConvLayer,
    conv2d_backward,
    conv2d_forward,
    leaky_relu,
    leaky_relu_derivative,
)

logger = logging.getLogger(__name__)

# Channel multipliers of n_f after the first layer and each stride-2 stage.
WIDTH_FACTORS = (1, 2, 4, 8, 12, 16)
MAX_STAGES = len(WIDTH_FACTORS) - 1
FINAL_EXTENT = 4
DEFAULT_LEAK = 0.05


class EnergyFunction(Protocol):
    def energy(self, x): ...

    def grad_input(self, x): ...

    def grad_params(self, x): ...

    def flat_parameters(self): ...

    def with_flat_parameters(self, flat): ...


def _as_images(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[np.newaxis], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"expected an image (H, W) or a batch (N, H, W), got shape {x.shape}")


def downsampling_stages(input_size):
    """Number of stride-2 stages that bring ``input_size`` down to a 4x4 map."""
    height, width = input_size
    for stages in range(1, MAX_STAGES + 1):
        extent = FINAL_EXTENT * 2 ** stages
        if height == extent and width == extent:
            return stages
    supported = ', '.join(str(FINAL_EXTENT * 2 ** s) for s in range(1, MAX_STAGES + 1))
    raise ConfigError(
        f"unsupported input size {height}x{width}: both extents must equal 4*2^s "
        f"for 1 <= s <= {MAX_STAGES} ({supported}), so the stride-2 stages end on a 4x4 map"
    )


def layer_specs(n_f, input_size):
    """``(in_ch, out_ch, k, stride, padding)`` for every layer of the encoder.

    Inputs smaller than 128x128 drop trailing stride-2 stages until the
    pre-final map is 4x4.
    """
    if n_f < 1:
        raise ConfigError(f"n_f must be a positive integer, got {n_f}")
    stages = downsampling_stages(input_size)
    widths = [factor * n_f for factor in WIDTH_FACTORS]
    specs = [(1, widths[0], 3, 1, 1)]
    specs += [(widths[i - 1], widths[i], 4, 2, 1) for i in range(1, stages + 1)]
    specs.append((widths[stages], 1, 4, 1, 0))
    return specs


def count_parameters(n_f, input_size):
    return sum(c_out * c_in * k * k + c_out for c_in, c_out, k, _, _ in layer_specs(n_f, input_size))


@dataclass(frozen=True, eq=False)
class ModelParams:
    layers: Tuple[ConvLayer, ...]
    n_f: int
    input_size: Tuple[int, int]
    leak: float = DEFAULT_LEAK
    temperature: float = 1.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not 0 <= self.leak < 1:
            raise ConfigError(f"leak must lie in [0, 1), got {self.leak}")

    @property
    def n_parameters(self):
        return sum(layer.n_parameters for layer in self.layers)

    @property
    def dtype(self):
        return self.layers[0].kernel.dtype

    def _check(self, images):
        if images.shape[1:] != tuple(self.input_size):
            raise ShapeError(
                f"image size {images.shape[1:]} does not match the model input size "
                f"{tuple(self.input_size)}"
            )

    def _forward(self, images):
        activation = images[:, np.newaxis]
        inputs, pre_activations = [], []
        last = len(self.layers) - 1
        for index, layer in enumerate(self.layers):
            inputs.append(activation)
            z = conv2d_forward(activation, layer)
            pre_activations.append(z)
            activation = leaky_relu(z, self.leak) if index < last else z
        return activation.reshape(len(images)), inputs, pre_activations

    def _backward(self, inputs, pre_activations, upstream):
        grad = (upstream / self.temperature).reshape(-1, 1, 1, 1)
        last = len(self.layers) - 1
        param_grads = [None] * len(self.layers)
        for index in range(last, -1, -1):
            if index < last:
                grad = grad * leaky_relu_derivative(pre_activations[index], self.leak)
            grad, grad_kernel, grad_bias = conv2d_backward(inputs[index], self.layers[index], grad)
            param_grads[index] = (grad_kernel, grad_bias)
        return grad[:, 0], param_grads

    def energy(self, x):
        images, single = _as_images(x)
        self._check(images)
        out, _, _ = self._forward(images)
        values = out / self.temperature
        return float(values[0]) if single else values

    def energy_and_grad_input(self, x):
        images, single = _as_images(x)
        self._check(images)
        out, inputs, pre = self._forward(images)
        grad, _ = self._backward(inputs, pre, np.ones(len(images), dtype=out.dtype))
        values = out / self.temperature
        if single:
            return float(values[0]), grad[0]
        return values, grad

    def grad_input(self, x):
        return self.energy_and_grad_input(x)[1]

    def grad_params(self, x):
        images, _ = _as_images(x)
        self._check(images)
        _, inputs, pre = self._forward(images)
        upstream = np.full(len(images), 1.0 / len(images), dtype=images.dtype)
        _, param_grads = self._backward(inputs, pre, upstream)
        return np.concatenate([np.concatenate([gk.ravel(), gb]) for gk, gb in param_grads])

    def flat_parameters(self):
        return np.concatenate(
            [np.concatenate([layer.kernel.ravel(), layer.bias]) for layer in self.layers]
        )

    def with_flat_parameters(self, flat):
        flat = np.asarray(flat)
        if flat.shape != (self.n_parameters,):
            raise ShapeError(
                f"parameter vector has shape {flat.shape}, expected ({self.n_parameters},)"
            )
        layers, offset = [], 0
        for layer in self.layers:
            n_kernel = layer.kernel.size
            kernel = flat[offset:offset + n_kernel].reshape(layer.kernel.shape).copy()
            offset += n_kernel
            bias = flat[offset:offset + layer.out_channels].copy()
            offset += layer.out_channels
            layers.append(replace(layer, kernel=kernel, bias=bias))
        return replace(self, layers=tuple(layers))

    def with_temperature(self, temperature):
        return replace(self, temperature=temperature)


def build_model(n_f, input_size, seed, leak=DEFAULT_LEAK, temperature=1.0, dtype=np.float64):
    """Build the encoder with kernels drawn from N(0, 1/(in_ch*k^2)) and zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for c_in, c_out, k, stride, padding in layer_specs(n_f, tuple(input_size)):
        scale = 1.0 / math.sqrt(c_in * k * k)
        kernel = rng.normal(0.0, scale, size=(c_out, c_in, k, k)).astype(dtype)
        layers.append(ConvLayer(kernel, np.zeros(c_out, dtype=dtype), stride, padding))
    model = ModelParams(tuple(layers), n_f, tuple(input_size), leak, temperature)
    logger.debug(
        "Built energy model n_f=%d input=%s with %d parameters",
        n_f, tuple(input_size), model.n_parameters,
    )
    return model


def zero_model(model):
    return model.with_flat_parameters(np.zeros(model.n_parameters, dtype=model.dtype))


def energy(x, params):
    return params.energy(x)


def grad_input(x, params):
    return params.grad_input(x)


def grad_params(x, params):
    return params.grad_params(x)


@dataclass(frozen=True)
class QuadraticEnergy:
    """R(x) = ||x - center||^2 / (2 variance), parametrized by the variance."""

    variance: float
    center: object = 0.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigError(f"variance must be positive, got {self.variance}")

    def _squared_norms(self, images):
        diff = images - self.center
        return (diff ** 2).reshape(len(images), -1).sum(axis=1)

    def energy(self, x):
        images, single = _as_images(x)
        values = self._squared_norms(images) / (2.0 * self.variance)
        return float(values[0]) if single else values

    def energy_and_grad_input(self, x):
        return self.energy(x), self.grad_input(x)

    def grad_input(self, x):
        return (np.asarray(x) - self.center) / self.variance

    def grad_params(self, x):
        images, _ = _as_images(x)
        mean_sq = self._squared_norms(images).mean()
        return np.array([-mean_sq / (2.0 * self.variance ** 2)])

    def flat_parameters(self):
        return np.array([self.variance], dtype=float)

    def with_flat_parameters(self, flat):
        return replace(self, variance=float(np.asarray(flat).reshape(-1)[0]))


@dataclass(frozen=True)
class ZeroEnergy:
    """R(x) = 0."""

    def energy(self, x):
        images, single = _as_images(x)
        return 0.0 if single else np.zeros(len(images))

    def energy_and_grad_input(self, x):
        return self.energy(x), self.grad_input(x)

    def grad_input(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def grad_params(self, x):
        return np.zeros(0)

    def flat_parameters(self):
        return np.zeros(0)

    def with_flat_parameters(self, flat):
        return self

import numpy as np


def central_difference(func, x, step=1e-4):
    """Central finite-difference gradient of a scalar ``func`` at array ``x``."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + step
        plus = func(x)
        x[index] = original - step
        minus = func(x)
        x[index] = original
        grad[index] = (plus - minus) / (2 * step)
    return grad


def relative_error(actual, expected):
    actual, expected = np.asarray(actual, dtype=float), np.asarray(expected, dtype=float)
    scale = max(np.linalg.norm(expected), 1e-30)
    return float(np.linalg.norm(actual - expected) / scale)


def dense_matrix(linear, shape):
    """Materialize a linear map on arrays of ``shape`` by applying it to unit vectors."""
    size = int(np.prod(shape))
    columns = []
    for i in range(size):
        unit = np.zeros(size)
        unit[i] = 1.0
        columns.append(np.ravel(linear(unit.reshape(shape))))
    return np.stack(columns, axis=1)

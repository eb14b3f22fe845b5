import numpy as np


def central_difference_gradient(value_fn, theta, h=1e-5):
    """Independent gradient oracle: central differences, coordinate by coordinate."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (value_fn(up) - value_fn(down)) / (2.0 * h)
    return grad


def relative_error(got, expected):
    got = np.asarray(got, dtype=float)
    expected = np.asarray(expected, dtype=float)
    denom = max(float(np.linalg.norm(expected)), 1e-300)
    return float(np.linalg.norm(got - expected)) / denom

"""Central finite-difference gradients for checking the autodiff engine."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from danet.autodiff.tensor import Tensor, backward


def numeric_gradient(fn: Callable[..., float], arrays: Sequence[np.ndarray], step: float = 1e-5):
    """Gradients of scalar ``fn(*arrays)`` by central differences, one array per input."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn(*arrays)
            flat[i] = orig - step
            lo = fn(*arrays)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * step)
        grads.append(g)
    return grads


def autodiff_gradient(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray]):
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    return backward(fn(*leaves), leaves)


def relative_error(a, b) -> float:
    """``max|a - b| / max(max|a|, max|b|)``; 0 when both are identically zero."""
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0))
    if scale == 0:
        return 0.0
    return float(np.abs(a - b).max() / scale)


def check_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], step: float = 1e-5) -> float:
    """Worst relative error between autodiff and finite-difference gradients over all inputs."""
    analytic = autodiff_gradient(fn, arrays)
    numeric = numeric_gradient(lambda *xs: fn(*(Tensor(x) for x in xs)).item(), arrays, step)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))

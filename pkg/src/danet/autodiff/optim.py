"""Parameter storage, Adam, the stepped learning-rate schedule and initialisation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from danet.autodiff.tensor import Tensor
from danet.errors import ContractError


class ParameterStore:
    """Ordered mapping from path-like names to trainable tensors plus Adam state.

    Iteration order is insertion order and defines the order of gradient
    lists passed to :func:`adam_step`.
    """

    def __init__(self, params: Mapping[str, np.ndarray] | None = None):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0
        for name, value in (params or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros(t.shape)
        self._v[name] = np.zeros(t.shape)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def moments(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return self._m[name], self._v[name]

    def parameter_count(self) -> int:
        return int(sum(t.size for t in self._params.values()))

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy of the current parameter values, keyed by name."""
        return {name: t.data.copy() for name, t in self._params.items()}

    def load(self, values: Mapping[str, np.ndarray]) -> None:
        if set(values) != set(self._params):
            raise ContractError("parameter names do not match the store")
        for name, t in self._params.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != t.shape:
                raise ContractError(f"{name}: shape {arr.shape} != {t.shape}")
            t.data = arr.copy()


def adam_step(store: ParameterStore, grads: Sequence[np.ndarray], rate: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParameterStore:
    """Apply one bias-corrected Adam update in place and return ``store``."""
    if rate <= 0:
        raise ContractError(f"learning rate must be positive, got {rate}")
    names = store.names()
    if len(grads) != len(names):
        raise ContractError(f"got {len(grads)} gradients for {len(names)} parameters")
    for name, g in zip(names, grads):
        if np.shape(g) != store[name].shape:
            raise ContractError(f"gradient for {name!r} has shape {np.shape(g)}, expected {store[name].shape}")
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, g in zip(names, grads):
        m, v = store.moments(name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p = store[name]
        p.data = p.data - rate * (m / c1) / (np.sqrt(v / c2) + eps)
    return store


@dataclass(frozen=True)
class LrSchedule:
    """Piecewise-constant rate: divided by ``decay_divisor`` every ``step_epochs``."""

    initial_rate: float = 1e-3
    decay_divisor: float = 10.0
    step_epochs: int = 600

    def __post_init__(self):
        if self.initial_rate <= 0 or self.decay_divisor <= 0 or self.step_epochs < 1:
            raise ContractError(f"invalid schedule {self}")

    def rate(self, epoch: int) -> float:
        return self.initial_rate / self.decay_divisor ** (epoch // self.step_epochs)


def truncated_normal_init(shape, sd: float = 1.0, seed=None, mean: float = 0.0,
                          bound: float = 2.0) -> np.ndarray:
    """Draw from N(mean, sd^2), redrawing values farther than ``bound * sd`` from the mean.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if not (sd > 0 and math.isfinite(sd)):
        raise ContractError(f"sd must be positive and finite, got {sd}")
    if bound <= 0:
        raise ContractError(f"bound must be positive, got {bound}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = rng.normal(0.0, 1.0, size=shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, 1.0, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return mean + sd * out

"""Input-gradient norm versus depth for stacks joined by each combine rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from danet.autodiff import Tensor, absolute, backward, concat, mean, truncated_normal_init
from danet.errors import ContractError
from danet.layers.blocks import CombineRule, combine, dense_layer


@dataclass(frozen=True)
class GrowthRow:
    rule: str
    depth: int
    grad_norm: float
    param_count: int


def _layer_params(layer: int, fan_in: int, width: int, seed: int, sd: float):
    # keyed by (seed, layer): every depth shares its leading layers, and
    # additive/average stacks share all of them
    rng = np.random.default_rng([seed, layer])
    weight = truncated_normal_init((fan_in, width), sd=sd, seed=rng)
    bias = truncated_normal_init((width,), sd=sd, seed=rng)
    return Tensor(weight), Tensor(bias)


def stack_forward(x0: Tensor, depth: int, rule, width: int, seed: int, sd: float):
    """Run ``depth`` ReLU layers joined by ``rule`` across the whole stack.

    Returns the output and the number of parameters used.
    """
    rule = CombineRule(rule)
    history = [x0]
    x = x0
    count = 0
    for layer in range(1, depth + 1):
        fan_in = layer * width if rule is CombineRule.CONCAT else width
        weight, bias = _layer_params(layer, fan_in, width, seed, sd)
        count += weight.size + bias.size
        if rule is CombineRule.CONCAT:
            x = dense_layer(concat(history, axis=-1), weight, bias)
        else:
            x = combine(rule, history, dense_layer(x, weight, bias))
        history.append(x)
    return x, count


def gradient_growth_study(rule, depths: Sequence[int], seed: int = 0, width: int = 128,
                          sd: float | None = None, batch: int = 16) -> list[GrowthRow]:
    """Measure ``||dL/dx0||_2`` for an MAE loss at the top of stacks of each depth.

    The input is a fixed standard-normal batch and the MAE target is zero.
    ``sd`` defaults to ``sqrt(2 / width)`` so a single ReLU layer roughly
    preserves scale and any growth comes from the combine rule.
    """
    depths = [int(d) for d in depths]
    if not depths or min(depths) < 1 or depths != sorted(depths):
        raise ContractError(f"depths must be positive and ascending, got {depths}")
    sd = float(np.sqrt(2.0 / width)) if sd is None else sd
    x_data = np.random.default_rng([seed, 0]).normal(size=(batch, width))
    rows = []
    for depth in depths:
        x0 = Tensor(x_data, requires_grad=True)
        out, count = stack_forward(x0, depth, rule, width, seed, sd)
        loss = mean(absolute(out))
        (g,) = backward(loss, [x0])
        rows.append(GrowthRow(CombineRule(rule).value, depth, float(np.linalg.norm(g)), count))
    return rows

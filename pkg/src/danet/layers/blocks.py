"""Layer-combination rules and the building blocks of the network."""

from __future__ import annotations

from enum import Enum
from typing import Sequence

from danet.autodiff import Tensor, affine, concat, mean, mul, relu, reshape, scale, sigmoid
from danet.errors import ContractError, ShapeError


class CombineRule(str, Enum):
    """How a layer's transform output is merged with the outputs before it."""

    CONCAT = "concat"
    ADDITIVE = "additive"
    AVERAGE = "average"


def combine(rule, history: Sequence[Tensor], new: Tensor) -> Tensor:
    """Merge ``new`` with the earlier outputs in ``history``.

    ``average`` returns ``(new + sum(history)) / (len(history) + 1)``,
    ``additive`` the same without the division, and ``concat`` joins the last
    axis in history order followed by ``new``.
    """
    rule = CombineRule(rule)
    if not history:
        raise ContractError("combine needs a non-empty history")
    if rule is CombineRule.CONCAT:
        return concat(list(history) + [new], axis=-1)
    for h in history:
        if h.shape != new.shape:
            raise ShapeError(f"combine({rule.value}): shapes {h.shape} and {new.shape} differ")
    total = new
    for h in history:
        total = total + h
    if rule is CombineRule.AVERAGE:
        total = scale(total, 1.0 / (len(history) + 1))
    return total


def dense_layer(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Fully connected layer with ReLU."""
    return relu(affine(x, weight, bias))


def dense_average_block_forward(x0: Tensor, layers: Sequence[tuple[Tensor, Tensor]],
                                rule="average") -> Tensor:
    """Run one block of fully connected layers joined by ``rule``.

    ``layers`` holds one ``(weight, bias)`` pair per layer.  The block input is
    the first history entry; history starts fresh on every call.  Under the
    concat rule each layer consumes the concatenation of all earlier outputs
    and the block returns the last layer's output.
    """
    rule = CombineRule(rule)
    width = layers[0][0].shape[1]
    if x0.shape[-1] != width:
        raise ShapeError(f"block input width {x0.shape[-1]} does not match block width {width}")
    history = [x0]
    x = x0
    for weight, bias in layers:
        if rule is CombineRule.CONCAT:
            x = dense_layer(concat(history, axis=-1), weight, bias)
        else:
            x = combine(rule, history, dense_layer(x, weight, bias))
        history.append(x)
    return x


def plain_chain_forward(x: Tensor, layers: Sequence[tuple[Tensor, Tensor]]) -> Tensor:
    """The same layers applied as an ordinary feed-forward chain."""
    for weight, bias in layers:
        x = dense_layer(x, weight, bias)
    return x


def se_hidden_width(channels: int, ratio: int) -> int:
    return max(1, channels // ratio)


def se_block_forward(features: Tensor, squeeze_w: Tensor, squeeze_b: Tensor,
                     excite_w: Tensor, excite_b: Tensor) -> Tensor:
    """Squeeze-and-excitation recalibration of ``(H, W, C)`` or ``(N, H, W, C)`` maps.

    Channels are averaged over the spatial extent, passed through a ReLU and a
    sigmoid layer, and the resulting per-channel weights rescale the input.
    """
    if features.ndim == 3:
        out = se_block_forward(reshape(features, (1,) + features.shape),
                               squeeze_w, squeeze_b, excite_w, excite_b)
        return reshape(out, features.shape)
    if features.ndim != 4:
        raise ShapeError(f"se block expects HWC or NHWC features, got {features.shape}")
    channels = features.shape[-1]
    if squeeze_w.shape[0] != channels or excite_w.shape[1] != channels:
        raise ShapeError(f"se block: {channels} channels do not match weights "
                         f"{squeeze_w.shape} and {excite_w.shape}")
    pooled = mean(features, axis=(1, 2))
    weights = sigmoid(affine(relu(affine(pooled, squeeze_w, squeeze_b)), excite_w, excite_b))
    return mul(features, reshape(weights, (features.shape[0], 1, 1, channels)))


def se_pooled_forward(pooled: Tensor, squeeze_w: Tensor, squeeze_b: Tensor,
                      excite_w: Tensor, excite_b: Tensor) -> Tensor:
    """SE recalibration followed by global average pooling, given the pooled maps.

    Pooling commutes with a per-channel scale, so
    ``global_average_pool(se_block_forward(maps, ...))`` equals this function
    applied to ``global_average_pool(maps)``.  ``pooled`` is ``(N, C)``.
    """
    if pooled.ndim != 2:
        raise ShapeError(f"expected pooled (N, C) features, got {pooled.shape}")
    weights = sigmoid(affine(relu(affine(pooled, squeeze_w, squeeze_b)), excite_w, excite_b))
    return mul(pooled, weights)


def global_average_pool(features: Tensor) -> Tensor:
    """Average ``(N, H, W, C)`` over H and W."""
    return mean(features, axis=(1, 2))

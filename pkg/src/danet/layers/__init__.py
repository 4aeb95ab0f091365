"""Combine rules, blocks and the full forecasting networks."""

from danet.layers.blocks import (
    CombineRule,
    combine,
    dense_average_block_forward,
    dense_layer,
    global_average_pool,
    plain_chain_forward,
    se_block_forward,
    se_hidden_width,
    se_pooled_forward,
)
from danet.layers.growth import GrowthRow, gradient_growth_study, stack_forward
from danet.layers.network import (
    ModelSpec,
    ann_forward,
    danet_forward,
    init_params,
    network_forward,
    parameter_count,
    parameter_shapes,
)

__all__ = [
    "CombineRule",
    "GrowthRow",
    "ModelSpec",
    "ann_forward",
    "combine",
    "danet_forward",
    "dense_average_block_forward",
    "dense_layer",
    "global_average_pool",
    "gradient_growth_study",
    "init_params",
    "network_forward",
    "parameter_count",
    "parameter_shapes",
    "plain_chain_forward",
    "se_block_forward",
    "se_hidden_width",
    "se_pooled_forward",
    "stack_forward",
]

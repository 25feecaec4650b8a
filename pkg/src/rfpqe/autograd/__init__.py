from .gradcheck import gradcheck, numerical_grad
from .ops import (
    add,
    channel_attention,
    concat_channels,
    conv2d,
    global_avg_pool,
    l1_loss,
    l2_loss,
    mean,
    mul,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    scale_by_learnable,
    sigmoid,
    slice_channels,
    sub,
)
from .ops import sum as tsum
from .optim import Adam, AdamState, LrSchedule, adam_step, lr_at
from .tensor import ComputationGraph, Node, Tensor, as_tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "Adam",
    "AdamState",
    "ComputationGraph",
    "LrSchedule",
    "Node",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "channel_attention",
    "concat_channels",
    "conv2d",
    "global_avg_pool",
    "gradcheck",
    "is_grad_enabled",
    "l1_loss",
    "l2_loss",
    "lr_at",
    "mean",
    "mul",
    "no_grad",
    "numerical_grad",
    "pixel_shuffle",
    "pixel_unshuffle",
    "relu",
    "scale_by_learnable",
    "sigmoid",
    "slice_channels",
    "sub",
    "tsum",
]

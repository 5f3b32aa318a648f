"""Minimal differentiable tensor core."""

from .checkpoint import load_checkpoint, save_checkpoint, write_npz
from .gradcheck import GradCheckReport, grad_check, numeric_gradient
from .layers import (
    RunningStats,
    batch_norm_features,
    conv1d_pointwise,
    lstm_layer,
    multi_head_attention,
)
from .optim import AdamState, adam_step
from .tensor import (
    Tensor,
    add,
    as_tensor,
    clip,
    concat,
    concat_lastdim,
    elementwise_max_over_set,
    exp,
    global_average_pool_time,
    grad_enabled,
    index,
    linear,
    log,
    log_softmax_lastdim,
    matmul,
    max_over_axis,
    mean,
    mul,
    no_grad,
    one_hot,
    reciprocal,
    relu,
    repeat_axis,
    reshape,
    sigmoid,
    softmax_lastdim,
    square,
    stack,
    sub,
    swapaxes,
    tanh,
    transpose,
    tsum,
)

__all__ = [name for name in dir() if not name.startswith("_")]

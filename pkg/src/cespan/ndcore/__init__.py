from .tensor import (
    NdError,
    Tensor,
    add,
    backward,
    concat_features,
    cross_entropy,
    dropout,
    flip_rows,
    log_softmax_values,
    lstm_direction,
    matmul,
    neighbor_mean,
    relu,
    sigmoid,
    softmax,
    tanh,
    zero_grads,
)
from .optim import AdamState, LrSchedule, adam_step
from .gradcheck import finite_diff_check

__all__ = [
    "AdamState",
    "LrSchedule",
    "NdError",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "concat_features",
    "cross_entropy",
    "dropout",
    "finite_diff_check",
    "flip_rows",
    "log_softmax_values",
    "lstm_direction",
    "matmul",
    "neighbor_mean",
    "relu",
    "sigmoid",
    "softmax",
    "tanh",
    "zero_grads",
]

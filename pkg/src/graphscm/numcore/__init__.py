from .tensor import (
    Tape,
    Tensor,
    add,
    clamp_min,
    frobenius_sq,
    index_scalar,
    log,
    matmul,
    mul,
    relu,
    row_mean,
    scale,
    sigmoid,
    softmax,
    square,
    sub,
    sum_all,
)
from .expm import expm, expm_trace
from .gradcheck import finite_diff_check
from .layers import Linear, Mlp, activate, kaiming_uniform
from .optim import AdamW, AdamWState, adamw_step

__all__ = [
    "AdamW",
    "AdamWState",
    "Linear",
    "Mlp",
    "Tape",
    "Tensor",
    "activate",
    "adamw_step",
    "add",
    "clamp_min",
    "expm",
    "expm_trace",
    "finite_diff_check",
    "frobenius_sq",
    "index_scalar",
    "kaiming_uniform",
    "log",
    "matmul",
    "mul",
    "relu",
    "row_mean",
    "scale",
    "sigmoid",
    "softmax",
    "square",
    "sub",
    "sum_all",
]

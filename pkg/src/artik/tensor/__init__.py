from .autodiff import (
    Value,
    add,
    add_bias,
    backward,
    clip,
    concat,
    constant,
    cos,
    matmul,
    mean_abs,
    mul,
    parameter,
    relu,
    reshape,
    scale,
    sin,
    softmax_cross_entropy,
    sub,
    sum_sq,
    zero_grad,
)
from .checkpoint import checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint
from .optim import Adam, AdamState, adam_step


def kaiming_uniform(rng, fan_in, fan_out):
    """U(-b, b) with b = sqrt(6 / fan_in), the ReLU gain variant."""
    bound = (6.0 / fan_in) ** 0.5
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


__all__ = [
    "Value",
    "add",
    "add_bias",
    "backward",
    "clip",
    "concat",
    "constant",
    "cos",
    "matmul",
    "mean_abs",
    "mul",
    "parameter",
    "relu",
    "reshape",
    "scale",
    "sin",
    "softmax_cross_entropy",
    "sub",
    "sum_sq",
    "zero_grad",
    "checkpoint_bytes",
    "load_checkpoint",
    "parse_checkpoint",
    "save_checkpoint",
    "Adam",
    "AdamState",
    "adam_step",
    "kaiming_uniform",
]

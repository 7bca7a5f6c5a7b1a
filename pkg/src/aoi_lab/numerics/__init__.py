"""Minimal float64 tensor core: reverse-mode differentiation, Adam, checkpoint I/O."""
from .gradcheck import max_relative_error, numeric_gradient
from .io import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step
from .tensor import (Tensor, add, as_tensor, backward, gradients, batch_norm_tokens, concat, index_rows, is_grad_enabled,
                     layer_norm, log, masked_fill, matmul, mul, no_grad, relu, reshape, scale, softmax,
                     softmax_rows, sub, take, tanh, transpose)
from .tensor import sum as tsum

__all__ = [
    "Tensor", "AdamState", "adam_step", "add", "as_tensor", "backward", "batch_norm_tokens", "concat",
    "decode_checkpoint", "encode_checkpoint", "gradients", "index_rows", "is_grad_enabled", "layer_norm", "load_checkpoint",
    "log", "masked_fill", "max_relative_error", "numeric_gradient", "matmul", "mul", "no_grad", "relu", "reshape", "save_checkpoint", "scale", "softmax",
    "softmax_rows", "sub", "take", "tanh", "transpose", "tsum",
]

"""
Stochastic gradient descent with momentum and weight decay.

For every tensor w with gradient g and momentum buffer b:

    b <- momentum * b + (g + weight_decay * w)
    w <- w - lr * b

Bias tensors are exempt from weight decay. Updates never modify their inputs: `sgd_step`
returns fresh parameters and a fresh state.
"""

from dataclasses import dataclass, field
import logging
import numpy as np
from src.toynet.network import NetParams
from src.lib.exceptions import NonFiniteGradientError, InvalidArchitectureError

DEFAULT_LEARNING_RATE = 0.0001
DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 0.0005

log = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """
    Momentum buffers and hyperparameters.

    Attributes:
        lr (float): Learning rate.
        momentum (float): Momentum coefficient.
        weight_decay (float): L2 coefficient applied to weights, not biases.
        buffers (dict[str, np.ndarray]): One buffer per parameter tensor; empty until
            the first step or `for_params`.
    """
    lr: float = DEFAULT_LEARNING_RATE
    momentum: float = DEFAULT_MOMENTUM
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    buffers: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, lr=DEFAULT_LEARNING_RATE, momentum=DEFAULT_MOMENTUM,
                   weight_decay=DEFAULT_WEIGHT_DECAY):
        """A state with zero buffers shaped like `params`."""
        buffers = {name: np.zeros_like(t) for name, t in params.tensors.items()}
        return cls(lr, momentum, weight_decay, buffers)

    def hyperparameters(self):
        return {"lr": self.lr, "momentum": self.momentum, "weight_decay": self.weight_decay}


def is_bias(name):
    return name.endswith(".bias")


def momentum_update(param, grad, buffer, lr, momentum, weight_decay):
    """
    One update of a single tensor.

    Returns:
        tuple[np.ndarray, np.ndarray]: The new parameter and the new buffer.
    """
    buffer = momentum * buffer + (grad + weight_decay * param)
    return param - lr * buffer, buffer


def sgd_step(params, grads, opt):
    """
    Applies one momentum SGD step.

    Args:
        params (NetParams): Current parameters.
        grads (dict[str, np.ndarray]): Gradient per tensor, from `backward`.
        opt (OptimizerState): Hyperparameters and buffers.

    Returns:
        tuple[NetParams, OptimizerState]: Updated parameters and state.

    Raises:
        NonFiniteGradientError: If any gradient entry is NaN or infinite; the message
            names the tensor.
        InvalidArchitectureError: If gradient or buffer shapes do not mirror the parameters.
    """
    for name in params.names():
        if name not in grads:
            raise InvalidArchitectureError(f"No gradient for tensor '{name}'")
        if np.shape(grads[name]) != params.tensors[name].shape:
            raise InvalidArchitectureError(
                f"Gradient of '{name}' has shape {np.shape(grads[name])}, "
                f"expected {params.tensors[name].shape}")
        if not np.all(np.isfinite(grads[name])):
            log.error("Non-finite gradient in %s", name)
            raise NonFiniteGradientError(f"Non-finite gradient in layer tensor '{name}'")

    dtype = params.arch.dtype
    tensors, buffers = {}, {}
    for name, param in params.tensors.items():
        buffer = opt.buffers.get(name)
        if buffer is None:
            buffer = np.zeros_like(param)
        elif buffer.shape != param.shape:
            raise InvalidArchitectureError(
                f"Momentum buffer of '{name}' has shape {buffer.shape}, expected {param.shape}")
        decay = 0.0 if is_bias(name) else opt.weight_decay
        new_param, new_buffer = momentum_update(
            param, np.asarray(grads[name], dtype=dtype), buffer, opt.lr, opt.momentum, decay)
        tensors[name] = new_param.astype(dtype)
        buffers[name] = new_buffer.astype(dtype)
    return NetParams(params.arch, tensors), OptimizerState(opt.lr, opt.momentum, opt.weight_decay, buffers)

"""Momentum SGD with decoupled-from-nothing classic weight decay.

Update per parameter: v <- momentum*v + (grad + weight_decay*w);
w <- w - lr*v. Gradients are consumed (cleared) by the step.
"""

import numpy as np

from ..errors import InvalidInputError


class MomentumSGD:
    def __init__(self, named_params, momentum: float = 0.9, weight_decay: float = 5e-4):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.rows = [(name, p, np.zeros_like(p.data)) for name, p in named_params]
        if not self.rows:
            raise InvalidInputError("optimizer needs at least one parameter")

    def step(self, lr: float) -> None:
        for name, p, buf in self.rows:
            if p.grad is None:
                raise InvalidInputError(f"parameter {name} has no gradient; run backward first")
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            buf *= self.momentum
            buf += g
            p.data -= lr * buf
            p.grad = None

    def named_buffers(self):
        for name, _, buf in self.rows:
            yield f"{name}.m", buf


def sgd_step(named_params_with_buffers, lr: float, momentum: float = 0.9, weight_decay: float = 5e-4) -> None:
    """One update over (name, param, buffer) rows; see module docstring."""
    for name, p, buf in named_params_with_buffers:
        if p.grad is None:
            raise InvalidInputError(f"parameter {name} has no gradient; run backward first")
        g = p.grad
        if weight_decay:
            g = g + weight_decay * p.data
        buf *= momentum
        buf += g
        p.data -= lr * buf
        p.grad = None

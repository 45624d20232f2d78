"""Minimal layer/module system: named parameters, buffers, train/eval state.

Assigning a Param, Module, or list of Modules to an attribute registers it;
`named_parameters` walks the tree in registration order, which fixes the
checkpoint layout and the optimizer update order.
"""

import numpy as np

from ..errors import InvalidInputError
from . import functional as F
from .tensor import Tensor


class Param(Tensor):
    """Trainable tensor; distinguishes parameters from activations."""

    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)


class Module:
    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Param):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
            for i, v in enumerate(value):
                self._modules[f"{name}.{i}"] = v
        object.__setattr__(self, name, value)

    def register_buffer(self, name, array: np.ndarray):
        self._buffers[name] = array
        object.__setattr__(self, name, array)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def named_buffers(self, prefix: str = ""):
        for name, buf in self._buffers.items():
            yield prefix + name, buf
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def modules(self):
        yield self
        for m in self._modules.values():
            yield from m.modules()

    def train(self, flag: bool = True):
        for m in self.modules():
            object.__setattr__(m, "training", flag)
        return self

    def eval(self):
        return self.train(False)

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def fan_in_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(dtype)


class Conv2d(Module):
    def __init__(self, cin, cout, kernel, rng, stride=1, padding=0, dilation=1, bias=True, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        self.weight = Param(fan_in_normal(rng, (cout, cin, kernel, kernel), cin * kernel * kernel, dtype))
        self.bias = Param(np.zeros(cout, dtype=dtype)) if bias else None

    def __call__(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.dilation)


class BatchNorm2d(Module):
    def __init__(self, channels, dtype=np.float32, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = Param(np.ones(channels, dtype=dtype))
        self.beta = Param(np.zeros(channels, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))

    def __call__(self, x):
        return F.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var, self.training, self.momentum, self.eps
        )


class Linear(Module):
    def __init__(self, cin, cout, rng, bias=True, dtype=np.float32):
        super().__init__()
        self.weight = Param(fan_in_normal(rng, (cin, cout), cin, dtype))
        self.bias = Param(np.zeros(cout, dtype=dtype)) if bias else None

    def __call__(self, x):
        return F.linear(x, self.weight, self.bias)


class ConvBlock(Module):
    """3x3 (by default) conv + batch norm + ReLU, spatial size preserved."""

    def __init__(self, cin, cout, rng, kernel=3, stride=1, dilation=1, dtype=np.float32):
        super().__init__()
        if kernel % 2 == 0:
            raise InvalidInputError("ConvBlock expects an odd kernel size")
        padding = dilation * (kernel - 1) // 2
        self.conv = Conv2d(cin, cout, kernel, rng, stride=stride, padding=padding, dilation=dilation, dtype=dtype)
        self.norm = BatchNorm2d(cout, dtype=dtype)

    def __call__(self, x):
        from .tensor import relu

        return relu(self.norm(self.conv(x)))

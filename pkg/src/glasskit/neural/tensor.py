"""Dense-tensor substrate with reverse-mode differentiation.

Tensors wrap numpy arrays (float32 for training, float64 for gradient
checking). Every operation that runs while gradients are enabled records its
parents and a backward closure on the output; `backward` on a scalar loss
replays the tape in reverse topological order. Gradient accumulation is
sequential and ordered, so repeated runs are bit-identical.
"""

import contextlib

import numpy as np

from ..errors import InvalidInputError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / optimizer math)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    # -- conveniences -------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _as_tensor(value, dtype) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))


def _coerce_pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, _as_tensor(b, a.dtype)
    if isinstance(b, Tensor):
        return _as_tensor(a, b.dtype), b
    a = Tensor(a)
    return a, _as_tensor(b, a.dtype)


def _make(data: np.ndarray, parents, backward_fn) -> Tensor:
    """Wrap an op result, recording the tape edge when gradients are on."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _sum_to_shape(grad: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    data = a.data + b.data

    def backward(g):
        return _sum_to_shape(g, a.shape), _sum_to_shape(g, b.shape)

    return _make(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    data = a.data - b.data

    def backward(g):
        return _sum_to_shape(g, a.shape), _sum_to_shape(-g, b.shape)

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    data = a.data * b.data

    def backward(g):
        return _sum_to_shape(g * b.data, a.shape), _sum_to_shape(g * a.data, b.shape)

    return _make(data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    data = a.data / b.data

    def backward(g):
        ga = _sum_to_shape(g / b.data, a.shape)
        gb = _sum_to_shape(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _make(data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    data = np.where(mask, x.data, 0)

    def backward(g):
        return (np.where(mask, g, 0),)

    return _make(data, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    data = np.empty_like(d)
    pos = d >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    data[~pos] = e / (1.0 + e)

    def backward(g):
        return (g * data * (1.0 - data),)

    return _make(data, (x,), backward)


def concat_channels(tensors) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise InvalidInputError("concat_channels needs at least one tensor")
    ref = tensors[0]
    for t in tensors[1:]:
        if t.ndim != ref.ndim or t.shape[0] != ref.shape[0] or t.shape[2:] != ref.shape[2:]:
            raise InvalidInputError(f"concat_channels shape mismatch: {t.shape} vs {ref.shape}")
    data = np.concatenate([t.data for t in tensors], axis=1)
    widths = [t.shape[1] for t in tensors]

    def backward(g):
        grads = []
        start = 0
        for w in widths:
            grads.append(g[:, start : start + w])
            start += w
        return tuple(grads)

    return _make(data, tuple(tensors), backward)


# -- reductions / shape -----------------------------------------------------


def tsum(x: Tensor, axes=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if axes is None:
            return (np.broadcast_to(g, x.shape).astype(x.dtype, copy=True),)
        g_exp = g if keepdims else np.expand_dims(g, axes)
        return (np.broadcast_to(g_exp, x.shape).astype(x.dtype, copy=True),)

    return _make(data, (x,), backward)


def tmean(x: Tensor) -> Tensor:
    scale = 1.0 / x.data.size
    return mul(tsum(x), scale)


def reshape(x: Tensor, shape) -> Tensor:
    data = x.data.reshape(shape)

    def backward(g):
        return (g.reshape(x.shape),)

    return _make(data, (x,), backward)


# -- backward pass ----------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate `.grad` on every requires_grad leaf reachable from `loss`."""
    if loss.data.size != 1:
        raise InvalidInputError(f"backward needs a scalar loss, got shape {loss.shape}")

    # iterative topological sort, children before parents in the reversed walk
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward_fn is not None:
            parent_grads = node._backward_fn(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                pg = pg.astype(parent.dtype, copy=False)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        elif node.requires_grad:
            node.grad = g if node.grad is None else node.grad + g

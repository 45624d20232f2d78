"""Central finite-difference gradient verification.

`check_gradients` evaluates a closure twice per probed entry (x+h, x-h) and
compares the numeric slope against the recorded analytic gradient. Meant to
run on float64 tensors; float32 would drown in roundoff.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, backward


@dataclass
class GradMismatch:
    label: str
    index: tuple
    analytic: float
    numeric: float

    def __str__(self):
        return f"{self.label}{list(self.index)}: analytic {self.analytic:.6e} vs numeric {self.numeric:.6e}"


def check_gradients(
    loss_fn,
    wrt,
    rng: np.random.Generator,
    samples_per_tensor: int = 4,
    step: float = 1e-5,
    rtol: float = 1e-4,
    atol: float = 1e-8,
) -> list[GradMismatch]:
    """Compare analytic and central-difference gradients on sampled entries.

    loss_fn: zero-argument closure returning a scalar Tensor, re-evaluating
    the graph from the current values of the probed tensors.
    wrt: list of (label, Tensor) pairs with requires_grad set.
    """
    for _, t in wrt:
        t.grad = None
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise AssertionError("loss is not finite")
    backward(loss)
    analytic = {}
    for label, t in wrt:
        if t.grad is None:
            raise AssertionError(f"no gradient reached {label}")
        analytic[label] = t.grad.copy()

    failures: list[GradMismatch] = []
    for label, t in wrt:
        flat = t.data.reshape(-1)
        n = flat.size
        count = min(samples_per_tensor, n)
        picks = rng.choice(n, size=count, replace=False) if n > count else np.arange(n)
        for idx in picks:
            saved = flat[idx]
            flat[idx] = saved + step
            hi = float(loss_fn().data)
            flat[idx] = saved - step
            lo = float(loss_fn().data)
            flat[idx] = saved
            numeric = (hi - lo) / (2.0 * step)
            a = float(analytic[label].reshape(-1)[idx])
            if abs(a - numeric) > atol + rtol * max(abs(a), abs(numeric)):
                failures.append(GradMismatch(label, np.unravel_index(idx, t.data.shape), a, numeric))
    for _, t in wrt:
        t.grad = None
    return failures


def tensor64(rng: np.random.Generator, shape, scale: float = 1.0, requires_grad: bool = True) -> Tensor:
    """Float64 tensor of standard normal values, for gradient checks."""
    return Tensor((rng.standard_normal(shape) * scale).astype(np.float64), requires_grad=requires_grad)

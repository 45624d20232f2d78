"""Differentiable layer kernels on top of the tensor tape.

Convolution runs as im2col + GEMM; the patch matrix is kept alive for the
backward pass (cheap at desk resolutions). All gathers/scatters use plain
numpy indexing so results are deterministic.
"""

import numpy as np

from ..errors import InvalidInputError
from .tensor import Tensor, _make


def _pair(v, name):
    if isinstance(v, (tuple, list)):
        a, b = v
    else:
        a = b = v
    if int(a) != a or int(b) != b:
        raise InvalidInputError(f"{name} must be integral, got {v}")
    return int(a), int(b)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride=1, padding=0, dilation=1) -> Tensor:
    """Cross-correlation of NCHW input with OIHW weights."""
    sh, sw = _pair(stride, "stride")
    ph, pw = _pair(padding, "padding")
    dh, dw = _pair(dilation, "dilation")
    if sh < 1 or sw < 1:
        raise InvalidInputError(f"stride must be positive, got {stride}")
    if dh < 1 or dw < 1:
        raise InvalidInputError(f"dilation must be positive, got {dilation}")
    if x.ndim != 4 or weight.ndim != 4:
        raise InvalidInputError(f"conv2d expects 4-D input and weight, got {x.shape} / {weight.shape}")
    b, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise InvalidInputError(f"conv2d channel mismatch: input {cin}, weight {cin_w}")
    oh = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    ow = (w + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    if oh < 1 or ow < 1 or h + 2 * ph < dh * (kh - 1) + 1 or w + 2 * pw < dw * (kw - 1) + 1:
        raise InvalidInputError(f"kernel {kh}x{kw} (dilation {dh},{dw}) does not fit input {h}x{w} with padding {ph},{pw}")

    if ph or pw:
        xp = np.zeros((b, cin, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
        xp[:, :, ph : ph + h, pw : pw + w] = x.data
    else:
        xp = x.data
    cols = np.empty((b, cin, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i * dh : i * dh + sh * oh : sh, j * dw : j * dw + sw * ow : sw]
    cols_mat = cols.reshape(b, cin * kh * kw, oh * ow)
    w_mat = weight.data.reshape(cout, cin * kh * kw)
    out = np.matmul(w_mat, cols_mat).reshape(b, cout, oh, ow)
    if bias is not None:
        out += bias.data.reshape(1, cout, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        g_mat = g.reshape(b, cout, oh * ow)
        grad_w = np.matmul(g_mat, cols_mat.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        if x.requires_grad:
            grad_cols = np.matmul(w_mat.T, g_mat).reshape(b, cin, kh, kw, oh, ow)
            gxp = np.zeros((b, cin, h + 2 * ph, w + 2 * pw), dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i * dh : i * dh + sh * oh : sh, j * dw : j * dw + sw * ow : sw] += grad_cols[
                        :, :, i, j
                    ]
            grad_x = gxp[:, :, ph : ph + h, pw : pw + w] if (ph or pw) else gxp
        else:
            grad_x = None
        if bias is None:
            return grad_x, grad_w
        return grad_x, grad_w, g.sum(axis=(0, 2, 3))

    return _make(out, parents, backward)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel standardization with affine; updates running stats in train mode."""
    if x.ndim != 4:
        raise InvalidInputError(f"batch_norm expects NCHW input, got shape {x.shape}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise InvalidInputError(f"batch_norm affine shape mismatch for {c} channels: {gamma.shape}, {beta.shape}")
    axes = (0, 2, 3)
    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean += momentum * (mean - running_mean)
        running_var += momentum * (var - running_var)
    else:
        mean = running_mean.astype(x.dtype, copy=False)
        var = running_var.astype(x.dtype, copy=False)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.reshape(1, c, 1, 1)) * inv_std.reshape(1, c, 1, 1)
    out = gamma.data.reshape(1, c, 1, 1) * xhat + beta.data.reshape(1, c, 1, 1)

    def backward(g):
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        scale = (gamma.data * inv_std).reshape(1, c, 1, 1)
        if training:
            m = g.shape[0] * g.shape[2] * g.shape[3]
            gx = scale * (g - gbeta.reshape(1, c, 1, 1) / m - xhat * ggamma.reshape(1, c, 1, 1) / m)
        else:
            gx = scale * g
        return gx, ggamma, gbeta

    return _make(out, (x, gamma, beta), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map of [B, C] features with a [C, C'] weight."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise InvalidInputError(f"linear shape mismatch: {x.shape} @ {weight.shape}")
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gx = g @ weight.data.T
        gw = x.data.T @ g
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=0)

    return _make(out, parents, backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean, kept as [B, C, 1, 1]."""
    if x.ndim != 4:
        raise InvalidInputError(f"global_avg_pool expects NCHW input, got shape {x.shape}")
    h, w = x.shape[2], x.shape[3]
    out = x.data.mean(axis=(2, 3), keepdims=True)

    def backward(g):
        return (np.broadcast_to(g / (h * w), x.shape).astype(x.dtype, copy=True),)

    return _make(out, (x,), backward)


_resize_matrix_cache: dict[tuple, np.ndarray] = {}


def _resize_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Dense [n_out, n_in] interpolation matrix: half-pixel centers, clamped."""
    key = (n_in, n_out, np.dtype(dtype).str)
    cached = _resize_matrix_cache.get(key)
    if cached is not None:
        return cached
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    coords = np.clip(coords, 0.0, n_in - 1.0)
    lo = np.minimum(np.floor(coords).astype(np.int64), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    t = coords - lo
    m = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - t)
    np.add.at(m, (rows, hi), t)
    m = m.astype(dtype)
    _resize_matrix_cache[key] = m
    return m


def bilinear_resize(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear interpolation with half-pixel centers, edges clamped.

    Separable: out = Wr @ x @ Wc^T with dense per-axis weight matrices, so
    forward and backward are plain GEMMs.
    """
    if x.ndim != 4:
        raise InvalidInputError(f"bilinear_resize expects NCHW input, got shape {x.shape}")
    if out_h < 1 or out_w < 1:
        raise InvalidInputError(f"output extents must be >= 1, got {out_h}x{out_w}")
    b, c, h, w = x.shape
    if (out_h, out_w) == (h, w):
        def backward_id(g):
            return (g,)

        return _make(x.data, (x,), backward_id)
    wr = _resize_matrix(h, out_h, x.dtype)
    wc_t = _resize_matrix(w, out_w, x.dtype).T
    out = np.matmul(np.matmul(wr, x.data), wc_t)

    def backward(g):
        return (np.matmul(np.matmul(wr.T, g), wc_t.T),)

    return _make(out, (x,), backward)


def binary_cross_entropy_with_logits(logits: Tensor, target) -> Tensor:
    """Mean BCE computed in the fused, overflow-safe form; target may be soft."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise InvalidInputError(f"bce target shape {t.shape} != logits shape {logits.shape}")
    z = logits.data
    per_pixel = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    out = np.asarray(per_pixel.mean(), dtype=logits.dtype)
    n = z.size

    def backward(g):
        p = np.empty_like(z)
        pos = z >= 0
        p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        e = np.exp(z[~pos])
        p[~pos] = e / (1.0 + e)
        return ((p - t) * (g / n),)

    return _make(out, (logits,), backward)

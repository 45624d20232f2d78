"""Supervision losses: pixel BCE, soft-IoU, and the four-stream combination.

BCE consumes logits (fused stable form, soft targets allowed); the IoU term
consumes probabilities. The combined objective is the plain unweighted sum of
interior, boundary, glass-branch, and final-map terms; the reported breakdown
total is accumulated in the same order as the terms, so it matches their sum
bit for bit.

BCE reduction: per-pixel mean scaled by sqrt(H*W). A plain mean shrinks
per-pixel gradients as 1/(H*W), which starves the fixed 1e-4 SGD schedule at
any resolution; a plain pixel sum overshoots it. The square-root scale keeps
the aggregate gradient magnitude of a map roughly resolution-independent, and
reduces to the ordinary value on a single pixel. The IoU term is a pure
ratio in [0,1] and is left unscaled.
"""

from dataclasses import dataclass, field

import numpy as np

from . import neural as nn
from .errors import InvalidInputError


@dataclass
class SupervisionSet:
    """Targets at prediction resolution, all [B,1,H,W] float arrays in [0,1]."""

    glass: np.ndarray
    inner: np.ndarray
    boundary: np.ndarray


@dataclass
class LossBreakdown:
    l_inner: float
    l_boundary: float
    l_glass: float
    l_final: float
    total: float
    graph_total: nn.Tensor = field(repr=False, default=None)


def _spatial_scale(shape) -> float:
    spatial = 1
    for extent in shape[2:]:
        spatial *= extent
    return float(np.sqrt(spatial))


def bce_loss(pred_logits: nn.Tensor, target) -> nn.Tensor:
    """Binary cross entropy from logits, mean scaled by sqrt(H*W).

    Targets may be soft. On a single pixel this is the ordinary BCE value.
    """
    if pred_logits.ndim < 2:
        raise InvalidInputError("bce_loss expects batched maps, at least 2-D")
    per_pixel_mean = nn.binary_cross_entropy_with_logits(pred_logits, target)
    return nn.mul(per_pixel_mean, _spatial_scale(pred_logits.shape))


def iou_loss(pred_probs: nn.Tensor, target) -> nn.Tensor:
    """1 - soft intersection / soft union, averaged over the batch.

    An image where prediction and target are identically zero contributes 0.
    """
    t = target.data if isinstance(target, nn.Tensor) else np.asarray(target, dtype=pred_probs.dtype)
    if t.shape != pred_probs.shape:
        raise InvalidInputError(f"iou target shape {t.shape} != prediction shape {pred_probs.shape}")
    if pred_probs.ndim < 2:
        raise InvalidInputError("iou_loss expects batched maps, at least 2-D")
    p = pred_probs
    if p.data.min() < 0 or p.data.max() > 1 or t.min() < 0 or t.max() > 1:
        raise InvalidInputError("iou_loss inputs must lie in [0,1]")
    axes = tuple(range(1, p.ndim))
    t_tensor = nn.Tensor(t.astype(p.dtype, copy=False))
    inter = nn.tsum(nn.mul(p, t_tensor), axes=axes)
    union = nn.tsum(nn.sub(nn.add(p, t_tensor), nn.mul(p, t_tensor)), axes=axes)
    # images with an empty union get ratio (0+1)/(0+1) = 1, i.e. zero loss
    pad = nn.Tensor((union.data == 0).astype(p.dtype))
    ratio = nn.div(nn.add(inter, pad), nn.add(union, pad))
    return nn.tmean(nn.sub(1.0, ratio))


def _branch_term(logits: nn.Tensor, target: np.ndarray, use_iou: bool) -> nn.Tensor:
    term = bce_loss(logits, target)
    if use_iou:
        term = nn.add(term, iou_loss(nn.sigmoid(logits), target))
    return term


def total_loss(bundle, sup: SupervisionSet, n_g: int = 3, n_b: int = 5, use_iou: bool = True) -> LossBreakdown:
    """Combined objective over a prediction bundle.

    bundle carries `glass_logits` (n_g maps), `boundary_logits` (n_b maps),
    optional `interior_logits`, and `final_logits`; disabled streams (None or
    empty lists) contribute zero. Branch counts are enforced when present.
    """
    glass_maps = list(bundle.glass_logits)
    boundary_maps = list(bundle.boundary_logits)
    if glass_maps and len(glass_maps) != n_g:
        raise InvalidInputError(f"expected {n_g} glass branch maps, got {len(glass_maps)}")
    if boundary_maps and len(boundary_maps) != n_b:
        raise InvalidInputError(f"expected {n_b} boundary branch maps, got {len(boundary_maps)}")

    dtype = bundle.final_logits.dtype
    zero = nn.Tensor(np.zeros((), dtype=dtype))

    inner_t = _branch_term(bundle.interior_logits, sup.inner, use_iou) if bundle.interior_logits is not None else zero

    boundary_t = zero
    for logits in boundary_maps:
        boundary_t = nn.add(boundary_t, bce_loss(logits, sup.boundary))

    glass_t = zero
    for logits in glass_maps:
        glass_t = nn.add(glass_t, _branch_term(logits, sup.glass, use_iou))

    final_t = _branch_term(bundle.final_logits, sup.glass, use_iou)

    graph_total = nn.add(nn.add(nn.add(inner_t, boundary_t), glass_t), final_t)
    l_inner = inner_t.item()
    l_boundary = boundary_t.item()
    l_glass = glass_t.item()
    l_final = final_t.item()
    total = l_inner + l_boundary + l_glass + l_final
    return LossBreakdown(
        l_inner=l_inner,
        l_boundary=l_boundary,
        l_glass=l_glass,
        l_final=l_final,
        total=total,
        graph_total=graph_total,
    )


def log_line(iteration: int, lr: float, breakdown: LossBreakdown) -> str:
    """One-line progress record per training iteration."""
    return (
        f"iter {iteration} lr {lr:.6e} "
        f"l_inner {breakdown.l_inner:.6f} l_boundary {breakdown.l_boundary:.6f} "
        f"l_glass {breakdown.l_glass:.6f} l_final {breakdown.l_final:.6f} "
        f"total {breakdown.total:.6f}"
    )

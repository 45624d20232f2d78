"""Segmentation quality metrics: accuracy, IoU, max-F, MAE, and balanced error.

Conventions used throughout (the usual ones in the saliency-evaluation code
this mirrors):

* a pixel is classified foreground iff predicted probability >= threshold;
* acc / IoU / BER binarize at 0.5 and are averaged per image over a dataset;
* max-F sweeps the 256 thresholds k/255; over a dataset, per-image precision
  and recall are averaged per threshold first and F is maximized on the
  averaged curves;
* degenerate denominators: IoU of an empty ground truth with an empty
  prediction is 1, a BER class ratio with no pixels of that class counts as
  perfect, and a threshold with undefined precision or recall contributes
  F = 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

BETA_SQ = 0.3
N_THRESHOLDS = 256


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def n_pos(self) -> int:
        return self.tp + self.fn

    @property
    def n_neg(self) -> int:
        return self.tn + self.fp

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass
class MetricsReport:
    acc: float
    iou: float
    f_beta: float
    mae: float
    ber: float
    image_count: int
    per_image: list[dict] | None = field(default=None, repr=False)

    def as_flat_dict(self) -> dict[str, float | int]:
        return {
            "acc": self.acc,
            "iou": self.iou,
            "fbeta": self.f_beta,
            "mae": self.mae,
            "ber": self.ber,
            "n_images": self.image_count,
        }


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"prediction shape {pred.shape} != ground truth shape {gt.shape}")
    if pred.size == 0:
        raise InvalidInputError("empty prediction/ground-truth pair")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise InvalidInputError("prediction values must lie in [0,1]")
    return pred, gt.astype(np.uint8)


def confusion_counts(pred: np.ndarray, gt: np.ndarray, threshold: float) -> ConfusionCounts:
    """Exact pixel confusion counts at `threshold` (foreground iff p >= t)."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError(f"threshold must be in [0,1], got {threshold}")
    pred, gt = _check_pair(pred, gt)
    fg = pred >= threshold
    pos = gt == 1
    tp = int(np.count_nonzero(fg & pos))
    fp = int(np.count_nonzero(fg & ~pos))
    fn = int(np.count_nonzero(~fg & pos))
    tn = int(np.count_nonzero(~fg & ~pos))
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def pixel_accuracy(c: ConfusionCounts) -> float:
    return (c.tp + c.tn) / c.total


def iou(c: ConfusionCounts) -> float:
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return c.tp / denom


def ber(c: ConfusionCounts) -> float:
    pos_term = c.tp / c.n_pos if c.n_pos > 0 else 1.0
    neg_term = c.tn / c.n_neg if c.n_neg > 0 else 1.0
    return 100.0 * (1.0 - 0.5 * (pos_term + neg_term))


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute error between probabilities and the {0,1} ground truth."""
    pred, gt = _check_pair(pred, gt)
    return float(np.abs(pred - gt.astype(np.float64)).mean())


def _pr_curves(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Precision/recall at each of the 256 thresholds k/255 (0 when undefined)."""
    pred, gt = _check_pair(pred, gt)
    pos = (gt == 1).ravel()
    p = pred.ravel()
    n_pos = int(pos.sum())
    precision = np.zeros(N_THRESHOLDS)
    recall = np.zeros(N_THRESHOLDS)
    thresholds = np.arange(N_THRESHOLDS, dtype=np.float64) / 255.0
    # chunk the (threshold, pixel) comparison table to bound memory
    chunk = 64
    for k0 in range(0, N_THRESHOLDS, chunk):
        k1 = min(k0 + chunk, N_THRESHOLDS)
        fg = p[None, :] >= thresholds[k0:k1, None]
        tp = (fg & pos[None, :]).sum(axis=1)
        predicted = fg.sum(axis=1)
        with np.errstate(invalid="ignore"):
            precision[k0:k1] = np.where(predicted > 0, tp / np.maximum(predicted, 1), 0.0)
            recall[k0:k1] = tp / n_pos if n_pos > 0 else 0.0
    return precision, recall


def _f_from_pr(precision: np.ndarray, recall: np.ndarray, beta_sq: float) -> np.ndarray:
    denom = beta_sq * precision + recall
    out = np.zeros_like(precision)
    ok = denom > 0
    out[ok] = (1.0 + beta_sq) * precision[ok] * recall[ok] / denom[ok]
    return out


def f_measure_max(pred: np.ndarray, gt: np.ndarray, beta_sq: float = BETA_SQ) -> float:
    """Maximum F_beta over the 256-threshold sweep on a single image."""
    precision, recall = _pr_curves(pred, gt)
    return float(_f_from_pr(precision, recall, beta_sq).max())


def evaluate_dataset(pairs, keep_per_image: bool = True) -> MetricsReport:
    """Aggregate metrics over (prediction, ground truth) pairs.

    acc/IoU/BER are computed per image at threshold 0.5 and averaged, MAE is
    averaged per image, and F_beta is maximized on the dataset-averaged
    precision/recall curves.
    """
    accs: list[float] = []
    ious: list[float] = []
    maes: list[float] = []
    bers: list[float] = []
    precision_sum = np.zeros(N_THRESHOLDS)
    recall_sum = np.zeros(N_THRESHOLDS)
    rows: list[dict] = []
    n = 0
    for pred, gt in pairs:
        c = confusion_counts(pred, gt, 0.5)
        accs.append(pixel_accuracy(c))
        ious.append(iou(c))
        bers.append(ber(c))
        maes.append(mae(pred, gt))
        precision, recall = _pr_curves(pred, gt)
        precision_sum += precision
        recall_sum += recall
        rows.append({"acc": accs[-1], "iou": ious[-1], "mae": maes[-1], "ber": bers[-1]})
        n += 1
    if n == 0:
        raise InvalidInputError("evaluate_dataset needs at least one pair")
    f_beta = float(_f_from_pr(precision_sum / n, recall_sum / n, BETA_SQ).max())
    return MetricsReport(
        acc=float(np.mean(accs)),
        iou=float(np.mean(ious)),
        f_beta=f_beta,
        mae=float(np.mean(maes)),
        ber=float(np.mean(bers)),
        image_count=n,
        per_image=rows if keep_per_image else None,
    )


def report_lines(report: MetricsReport) -> list[str]:
    """Flat machine-readable `key: value` lines."""
    return [f"{key}: {value}" for key, value in report.as_flat_dict().items()]


def report_table(report: MetricsReport) -> str:
    """Human-readable summary table."""
    header = f"{'metric':<8}{'value':>10}"
    rows = [
        ("acc", f"{report.acc:.3f}"),
        ("iou", f"{report.iou:.3f}"),
        ("fbeta", f"{report.f_beta:.3f}"),
        ("mae", f"{report.mae:.3f}"),
        ("ber", f"{report.ber:.2f}"),
        ("images", str(report.image_count)),
    ]
    body = "\n".join(f"{name:<8}{value:>10}" for name, value in rows)
    return header + "\n" + body

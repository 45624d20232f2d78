"""Training loop: momentum SGD under a poly-decayed learning rate, periodic
validation, best-by-IoU checkpointing, and a deterministic data order.

Iterations are 1-based in logs; the learning rate for iteration k is the
schedule evaluated at k-1, so the very first step uses the base rate exactly
and the rate approaches zero at the end of the run.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as datamod
from . import losses
from . import metrics
from . import neural as nn
from .errors import InvalidInputError, TrainingDivergedError
from .network import NetworkConfig, ThreeStreamNet
from .rng import named_rng


@dataclass
class TrainConfig:
    base_lr: float = 1e-4
    momentum: float = 0.9
    weight_decay: float = 5e-4
    poly_power: float = 0.9
    batch_size: int = 4
    max_iters: int = 2000
    eval_every: int = 200
    seed: int = 0
    precision: str = "f32"
    val_count: int = 32
    use_iou_loss: bool = True

    def __post_init__(self):
        positive = ("base_lr", "momentum", "weight_decay", "poly_power", "batch_size", "max_iters", "eval_every")
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.poly_power <= 1:
            raise InvalidInputError(f"poly_power must be in (0,1], got {self.poly_power}")
        if self.precision not in ("f32", "f64"):
            raise InvalidInputError(f"precision must be f32 or f64, got {self.precision!r}")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64


def poly_lr(iteration: int, cfg: TrainConfig) -> float:
    """base_lr * (1 - iteration/max_iters) ** poly_power."""
    if not 0 <= iteration <= cfg.max_iters:
        raise InvalidInputError(f"iteration {iteration} outside [0, {cfg.max_iters}]")
    return cfg.base_lr * (1.0 - iteration / cfg.max_iters) ** cfg.poly_power


@dataclass
class TrainResult:
    loss_history: list = field(default_factory=list)
    eval_history: list = field(default_factory=list)
    best_iou: float = float("-inf")
    best_path: Path | None = None
    final_path: Path | None = None


def evaluate_network(net, manifest: datamod.DatasetManifest, size: int, batch_size: int = 4) -> metrics.MetricsReport:
    """Eval-mode inference over a manifest, metrics at threshold 0.5."""
    was_training = net.training
    net.eval()
    pairs = []
    rng = named_rng(0, "eval-order")  # unused: no shuffle, no augmentation
    with nn.no_grad():
        for images, masks, _, _ in datamod.epoch_batches(
            manifest, batch_size, rng, size=size, augment=False, shuffle=False
        ):
            bundle = net(nn.Tensor(images.astype(net.dtype, copy=False)))
            probs = nn.sigmoid(bundle.final_logits).data
            for b in range(probs.shape[0]):
                pairs.append((probs[b, 0].astype(np.float64), masks[b, 0].astype(np.uint8)))
    if was_training:
        net.train()
    return metrics.evaluate_dataset(pairs)


def history_line(iteration: int, report: metrics.MetricsReport) -> str:
    flat = report.as_flat_dict()
    return (
        f"iter {iteration} acc {flat['acc']:.6f} iou {flat['iou']:.6f} "
        f"fbeta {flat['fbeta']:.6f} mae {flat['mae']:.6f} ber {flat['ber']:.4f} n {flat['n_images']}"
    )


def train(
    net: ThreeStreamNet,
    train_manifest: datamod.DatasetManifest,
    val_manifest: datamod.DatasetManifest | None,
    cfg: TrainConfig,
    out_dir,
    progress=None,
) -> TrainResult:
    """Run the full schedule; writes best.ckpt/final.ckpt/history.txt under out_dir."""
    if len(train_manifest) == 0:
        raise InvalidInputError("training manifest is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    history_path = out_dir / "history.txt"

    optimizer = nn.MomentumSGD(list(net.named_parameters()), momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    loader_rng = named_rng(cfg.seed, "loader")
    size = net.cfg.input_size
    result = TrainResult()
    n_g = net.cfg.n_glass_branches
    n_b = net.cfg.n_boundary_branches

    def batches_forever():
        while True:
            yield from datamod.epoch_batches(train_manifest, cfg.batch_size, loader_rng, size=size, augment=True)

    stream = batches_forever()
    for step in range(cfg.max_iters):
        iteration = step + 1
        images, masks, inner, boundary = next(stream)
        sup = losses.SupervisionSet(
            glass=masks.astype(cfg.dtype, copy=False),
            inner=inner.astype(cfg.dtype, copy=False),
            boundary=boundary.astype(cfg.dtype, copy=False),
        )
        bundle = net(nn.Tensor(images.astype(cfg.dtype, copy=False)))
        breakdown = losses.total_loss(bundle, sup, n_g=n_g, n_b=n_b, use_iou=cfg.use_iou_loss)
        if not math.isfinite(breakdown.total):
            raise TrainingDivergedError(
                iteration,
                {
                    "l_inner": breakdown.l_inner,
                    "l_boundary": breakdown.l_boundary,
                    "l_glass": breakdown.l_glass,
                    "l_final": breakdown.l_final,
                    "total": breakdown.total,
                },
            )
        nn.backward(breakdown.graph_total)
        lr = poly_lr(step, cfg)
        optimizer.step(lr)
        breakdown.graph_total = None  # drop the graph; history keeps scalars only
        result.loss_history.append(breakdown)
        if progress is not None:
            progress(losses.log_line(iteration, lr, breakdown))

        if val_manifest is not None and (iteration % cfg.eval_every == 0 or iteration == cfg.max_iters):
            report = evaluate_network(net, val_manifest, size=size, batch_size=cfg.batch_size)
            result.eval_history.append((iteration, report))
            with open(history_path, "a") as f:
                f.write(history_line(iteration, report) + "\n")
            if report.iou > result.best_iou:
                result.best_iou = report.iou
                result.best_path = out_dir / "best.ckpt"
                nn.save_checkpoint(result.best_path, net, optimizer)

    result.final_path = out_dir / "final.ckpt"
    nn.save_checkpoint(result.final_path, net, optimizer)
    return result


def load_network(ckpt_path, net_cfg: NetworkConfig, dtype=np.float32) -> ThreeStreamNet:
    """Fresh network with checkpointed parameters, in eval mode."""
    net = ThreeStreamNet(net_cfg, named_rng(0, "init"), dtype=dtype)
    nn.load_checkpoint(ckpt_path, net)
    net.eval()
    return net


def evaluate_checkpoint(
    ckpt_path, manifest: datamod.DatasetManifest, net_cfg: NetworkConfig, batch_size: int = 4
) -> metrics.MetricsReport:
    net = load_network(ckpt_path, net_cfg)
    return evaluate_network(net, manifest, size=net_cfg.input_size, batch_size=batch_size)

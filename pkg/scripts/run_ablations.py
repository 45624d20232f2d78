#!/usr/bin/env python3
"""Ablation sweep on the synthetic benchmark.

Trains the full model and each single-switch variant (boundary stream,
interior stream, both, context blocks, attention fusion, IoU loss term)
under identical budgets and prints a compact comparison table.

Usage: python3 scripts/run_ablations.py [--iters N] [--seeds K] [--size S]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from glasskit import data, trainer
from glasskit.network import NetworkConfig, ThreeStreamNet
from glasskit.rng import named_rng

VARIANTS = [
    ("full", {}, True),
    ("w/o interior+boundary", dict(enable_boundary_stream=False, enable_interior_stream=False), True),
    ("w/o boundary", dict(enable_boundary_stream=False), True),
    ("w/o interior", dict(enable_interior_stream=False), True),
    ("w/ only BCE loss", {}, False),
    ("w/o MID", dict(enable_mid=False), True),
    ("w/o BFM", dict(enable_bfm=False), True),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/ablations")
    parser.add_argument("--iters", type=int, default=400)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--count", type=int, default=80, help="total images (last 16 become val)")
    args = parser.parse_args()

    out = Path(args.out)
    # faint tint + distractor frames: the regime where the auxiliary streams
    # and the attention fusion actually earn their keep
    scene_cfg = data.SceneConfig(
        size=args.size,
        seed=500,
        tint_alpha_range=(0.05, 0.18),
        highlight_probability=0.7,
        distractor_count_range=(1, 2),
    )
    manifest = data.generate_dataset(out / "dataset", args.count, scene_cfg)
    train_m, val_m = data.split_manifest(manifest, 16)

    print(f"{args.seeds} seeds x {len(VARIANTS)} variants, {args.iters} iterations each\n")
    rows = []
    for name, flags, use_iou in VARIANTS:
        start = time.perf_counter()
        scores = []
        for seed in range(args.seeds):
            net_cfg = NetworkConfig(input_size=args.size, **flags)
            train_cfg = trainer.TrainConfig(
                max_iters=args.iters, eval_every=args.iters, seed=seed, use_iou_loss=use_iou, val_count=16
            )
            net = ThreeStreamNet(net_cfg, named_rng(seed, "init"))
            tag = name.replace("/", "").replace(" ", "_")
            result = trainer.train(net, train_m, val_m, train_cfg, out / f"{tag}-s{seed}")
            _, report = result.eval_history[-1]
            scores.append((report.iou, report.acc, report.ber))
        ious, accs, bers = zip(*scores)
        rows.append((name, np.median(ious), np.median(accs), np.median(bers)))
        print(f"  {name:<24} done in {(time.perf_counter() - start) / 60:.1f} min")

    print(f"\n{'variant':<24}{'IoU':>8}{'acc':>8}{'BER':>8}   (medians over seeds)")
    for name, iou, acc, ber in rows:
        print(f"{name:<24}{iou:>8.3f}{acc:>8.3f}{ber:>8.2f}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""End-to-end experiment: synthesize a dataset, train, and report.

Equivalent to the CLI sequence `glasskit synth` + `glasskit train`, driven
through the library so the pieces are easy to tweak inline.

Usage: python3 scripts/train_synthetic.py [--out DIR] [--iters N] [--size S]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from glasskit import data, trainer
from glasskit.configfile import write_config_file
from glasskit.network import NetworkConfig, ThreeStreamNet
from glasskit.rng import named_rng


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/synthetic", help="experiment directory")
    parser.add_argument("--iters", type=int, default=2000)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--count", type=int, default=160, help="total images (last 32 become val)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = Path(args.out)
    scene_cfg = data.SceneConfig(size=args.size, seed=args.seed)
    print(f"synthesizing {args.count} scenes at {args.size}px ...")
    manifest = data.generate_dataset(out / "dataset", args.count, scene_cfg)
    train_m, val_m = data.split_manifest(manifest, 32)

    net_cfg = NetworkConfig(input_size=args.size)
    train_cfg = trainer.TrainConfig(max_iters=args.iters, seed=args.seed)
    run_dir = out / "run"
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config_file(run_dir / "config.txt", net_cfg, train_cfg, scene_cfg)

    net = ThreeStreamNet(net_cfg, named_rng(args.seed, "init"))
    print(f"training {net.parameter_count():,} parameters for {args.iters} iterations ...")

    def every_100(line):
        iteration = int(line.split()[1])
        if iteration == 1 or iteration % 100 == 0:
            print(line)

    start = time.perf_counter()
    result = trainer.train(net, train_m, val_m, train_cfg, run_dir, progress=every_100)
    minutes = (time.perf_counter() - start) / 60
    print(f"done in {minutes:.1f} min; best val IoU {result.best_iou:.4f}")
    for it, report in result.eval_history:
        print(trainer.history_line(it, report))
    print(f"checkpoints under {run_dir}")


if __name__ == "__main__":
    main()

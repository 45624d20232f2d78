"""Command-line entry point.

Subcommands: synth (write a synthetic dataset), decouple (masks -> interior/
boundary label maps), train, eval (score prediction PNGs against masks),
predict (single-image inference from a checkpoint), gradcheck (run the
finite-difference suite).

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation or check
failure; every failure prints a one-line diagnostic on stderr.

Set GLASSKIT_THREADS to cap BLAS worker threads; it must take effect before
numpy loads, which is why the heavy imports happen inside the handlers.
"""

import argparse
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CHECK = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _apply_thread_cap():
    cap = os.environ.get("GLASSKIT_THREADS", "").strip()
    if cap.isdigit() and int(cap) > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glasskit", description="glass-region segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="write a synthetic dataset", add_help=True)
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--count", required=True, type=int, help="number of image/mask pairs")
    p.add_argument("--size", type=int, default=64, help="square image size in pixels")
    p.add_argument("--seed", type=int, default=0, help="generation seed")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("decouple", help="split masks into interior/boundary label maps")
    p.add_argument("--gt", required=True, help="directory of ground-truth mask PNGs")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_decouple)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True, help="dataset root (with manifest.txt)")
    p.add_argument("--config", required=True, help="plain-text config file")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="score prediction PNGs against ground-truth masks")
    p.add_argument("--pred", required=True, help="directory of prediction PNGs")
    p.add_argument("--gt", required=True, help="directory of ground-truth mask PNGs")
    p.add_argument("--report", default=None, help="write a report file (.json for JSON)")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("predict", help="run a checkpoint on one image")
    p.add_argument("--ckpt", required=True, help="checkpoint file (config.txt expected next to it)")
    p.add_argument("--image", required=True, help="input RGB PNG")
    p.add_argument("--out", required=True, help="output probability-map PNG")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0, help="suite seed")
    p.set_defaults(handler=cmd_gradcheck)

    return parser


def cmd_synth(args) -> int:
    from .data import SceneConfig, generate_dataset

    cfg = SceneConfig(size=args.size, seed=args.seed)
    manifest = generate_dataset(args.out, args.count, cfg)
    print(f"wrote {len(manifest)} pairs under {args.out}")
    return EXIT_OK


def cmd_decouple(args) -> int:
    from . import labelkit
    from .data import load_mask, save_gray_map
    from .errors import InvalidInputError

    gt_dir = Path(args.gt)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"mask directory {gt_dir} does not exist")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = sorted(p.name for p in gt_dir.glob("*.png"))
    if not names:
        raise InvalidInputError(f"no PNG masks under {gt_dir}")
    for name in names:
        mask = load_mask(gt_dir / name)
        labels = labelkit.decouple(mask)
        stem = Path(name).stem
        save_gray_map(out_dir / f"{stem}_bl.png", labels.interior)
        save_gray_map(out_dir / f"{stem}_dl.png", labels.boundary)
        labelkit.write_float_map(out_dir / f"{stem}_bl.gldt", labels.interior)
        labelkit.write_float_map(out_dir / f"{stem}_dl.gldt", labels.boundary)
    print(f"decoupled {len(names)} masks into {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    import numpy as np

    from . import trainer
    from .configfile import read_config_file, write_config_file
    from .data import read_manifest, split_manifest, validate_manifest
    from .network import ThreeStreamNet
    from .rng import named_rng

    net_cfg, train_cfg, scene_cfg = read_config_file(args.config)
    manifest = read_manifest(args.data)
    validate_manifest(manifest)
    train_m, val_m = split_manifest(manifest, train_cfg.val_count)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config_file(out_dir / "config.txt", net_cfg, train_cfg, scene_cfg)

    dtype = np.float32 if train_cfg.precision == "f32" else np.float64
    net = ThreeStreamNet(net_cfg, named_rng(train_cfg.seed, "init"), dtype=dtype)
    result = trainer.train(net, train_m, val_m, train_cfg, out_dir, progress=print)
    last_iter, last_report = result.eval_history[-1]
    print(f"final eval at iter {last_iter}: iou {last_report.iou:.4f} (best {result.best_iou:.4f})")
    print(f"checkpoints: {result.best_path} {result.final_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    import json

    from .data import load_gray_map, load_mask
    from .errors import InvalidInputError
    from .metrics import evaluate_dataset, report_lines, report_table

    pred_dir = Path(args.pred)
    gt_dir = Path(args.gt)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"directory {d} does not exist")
    names = sorted(p.name for p in gt_dir.glob("*.png"))
    if not names:
        raise InvalidInputError(f"no PNG masks under {gt_dir}")
    missing = [n for n in names if not (pred_dir / n).exists()]
    if missing:
        raise InvalidInputError(f"missing predictions for {len(missing)} masks, first: {missing[0]}")
    pairs = [(load_gray_map(pred_dir / n), load_mask(gt_dir / n)) for n in names]
    report = evaluate_dataset(pairs)
    print(report_table(report))
    if args.report:
        path = Path(args.report)
        if path.suffix == ".json":
            path.write_text(json.dumps(report.as_flat_dict(), indent=2) + "\n")
        else:
            path.write_text("\n".join(report_lines(report)) + "\n")
        print(f"report written to {path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    import numpy as np

    from . import neural as nn
    from .configfile import read_config_file
    from .data import _resize_channel, load_image, save_gray_map
    from .trainer import load_network

    ckpt = Path(args.ckpt)
    config_path = ckpt.parent / "config.txt"
    if not config_path.exists():
        raise FileNotFoundError(f"expected {config_path} next to the checkpoint")
    net_cfg, _, _ = read_config_file(config_path)
    net = load_network(ckpt, net_cfg)

    image = load_image(args.image)
    h, w = image.shape[:2]
    size = net_cfg.input_size
    resized = np.stack([_resize_channel(image[:, :, c], size, size) for c in range(3)], axis=-1)
    batch = np.ascontiguousarray(resized.transpose(2, 0, 1), dtype=np.float32)[None]
    with nn.no_grad():
        bundle = net(nn.Tensor(batch))
        prob = nn.sigmoid(bundle.final_logits).data[0, 0].astype(np.float64)
    prob_full = np.clip(_resize_channel(prob, h, w), 0.0, 1.0)
    save_gray_map(args.out, prob_full)
    print(f"probability map written to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .checks import run_gradient_suite

    results = run_gradient_suite(args.seed)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        suffix = f" ({r.detail})" if r.detail else ""
        print(f"{status} {r.name}{suffix}")
        if not r.passed:
            failed += 1
    if failed:
        print(f"{failed} of {len(results)} checks failed", file=sys.stderr)
        return EXIT_CHECK
    print(f"all {len(results)} gradient checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    from .errors import CheckpointError, ConfigError, FileFormatError, GlasskitError, InvalidInputError

    try:
        return args.handler(args)
    except (FileFormatError, CheckpointError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"glasskit: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidInputError, GlasskitError) as exc:
        print(f"glasskit: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except OSError as exc:
        print(f"glasskit: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

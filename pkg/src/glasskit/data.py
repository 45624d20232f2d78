"""Synthetic glass scenes, image/mask I/O, manifests, and the batch pipeline.

Scenes are procedural: a smooth noisy background with a few solid shapes,
plus one or more framed glass panes. A pane's interior re-renders the
background behind it with a color tint, a mild blur, and an optional
specular streak; the frame is painted opaque. The mask marks pane interiors
only (frames excluded), so the learnable cues are exactly tint, blur,
highlights, and frame borders.

Images are 8-bit RGB PNGs, masks single-channel PNGs (>=128 reads as glass).
Decoupled supervision maps are cached next to the dataset as float sidecars.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import labelkit
from .errors import FileFormatError, InvalidInputError
from .neural.functional import _resize_matrix
from .rng import named_rng


@dataclass
class SceneConfig:
    size: int = 64
    glass_count_range: tuple[int, int] = (1, 2)
    frame_width_range: tuple[int, int] = (1, 3)
    tint_alpha_range: tuple[float, float] = (0.3, 0.6)
    blur_radius_range: tuple[int, int] = (0, 2)
    highlight_probability: float = 0.6
    distractor_count_range: tuple[int, int] = (0, 1)
    seed: int = 0

    def __post_init__(self):
        ranges = (
            "glass_count_range",
            "frame_width_range",
            "tint_alpha_range",
            "blur_radius_range",
            "distractor_count_range",
        )
        for name in ranges:
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidInputError(f"{name} is not well-ordered: {lo} > {hi}")
        if not 0.0 <= self.highlight_probability <= 1.0:
            raise InvalidInputError(f"highlight_probability must be in [0,1], got {self.highlight_probability}")
        if self.size < 8:
            raise InvalidInputError(f"scene size must be at least 8, got {self.size}")


def _resize_channel(plane: np.ndarray, oh: int, ow: int) -> np.ndarray:
    h, w = plane.shape
    if (h, w) == (oh, ow):
        return plane.copy()
    wr = _resize_matrix(h, oh, np.float64)
    wc_t = _resize_matrix(w, ow, np.float64).T
    return wr @ plane.astype(np.float64) @ wc_t


def _smooth_noise(rng, size, cells, amplitude):
    coarse = rng.random((cells, cells, 3))
    return np.stack([_resize_channel(coarse[:, :, c], size, size) for c in range(3)], axis=-1) * amplitude


def _box_blur(img: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return img
    k = 2 * radius + 1
    out = img
    for axis in (0, 1):
        padded = np.concatenate(
            [np.repeat(out.take([0], axis=axis), radius, axis=axis), out, np.repeat(out.take([-1], axis=axis), radius, axis=axis)],
            axis=axis,
        )
        csum = np.cumsum(padded, axis=axis, dtype=np.float64)
        lead = csum.take(range(k - 1, padded.shape[axis]), axis=axis)
        lag = csum.take(range(0, padded.shape[axis] - k + 1), axis=axis)
        head = csum.take([k - 1], axis=axis)
        out = np.concatenate([head, lead.take(range(1, lead.shape[axis]), axis=axis) - lag.take(range(0, lag.shape[axis] - 1), axis=axis)], axis=axis) / k
    return out


def _paint_background(rng, size):
    img = np.full((size, size, 3), rng.uniform(0.25, 0.75, size=3))
    img += _smooth_noise(rng, size, 4, rng.uniform(0.15, 0.4))
    img += _smooth_noise(rng, size, 9, rng.uniform(0.05, 0.2))
    ys, xs = np.mgrid[0:size, 0:size]
    for _ in range(rng.integers(2, 6)):
        color = rng.random(3)
        cx, cy = rng.uniform(0, size, size=2)
        if rng.random() < 0.5:
            rx, ry = rng.uniform(size * 0.08, size * 0.3, size=2)
            region = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
        else:
            rx, ry = rng.uniform(size * 0.08, size * 0.35, size=2)
            region = (np.abs(xs - cx) <= rx) & (np.abs(ys - cy) <= ry)
        alpha = rng.uniform(0.5, 1.0)
        img[region] = (1 - alpha) * img[region] + alpha * color
    return np.clip(img, 0.0, 1.0)


def _pane_regions(rng, cfg: SceneConfig, occupied: np.ndarray):
    """Sample a pane that does not overlap previously painted panes."""
    size = cfg.size
    ys, xs = np.mgrid[0:size, 0:size]
    for _ in range(24):
        fw = int(rng.integers(cfg.frame_width_range[0], cfg.frame_width_range[1] + 1))
        half_w = rng.uniform(0.14, 0.30) * size
        half_h = rng.uniform(0.14, 0.30) * size
        half_w = max(half_w, fw + 2)
        half_h = max(half_h, fw + 2)
        cx = rng.uniform(half_w + 1, size - half_w - 1)
        cy = rng.uniform(half_h + 1, size - half_h - 1)
        angle = rng.uniform(-0.2, 0.2) if rng.random() < 0.4 else 0.0
        ca, sa = np.cos(angle), np.sin(angle)
        ux = (xs - cx) * ca + (ys - cy) * sa
        uy = -(xs - cx) * sa + (ys - cy) * ca
        outer = (np.abs(ux) <= half_w) & (np.abs(uy) <= half_h)
        inner = (np.abs(ux) <= half_w - fw) & (np.abs(uy) <= half_h - fw)
        if inner.sum() < 9:
            continue
        if not (outer & occupied).any():
            return outer, inner, (ux, uy)
    return None


def synth_scene(cfg: SceneConfig, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic (image, mask) pair for `index` under `cfg`.

    image: [H,W,3] float64 in [0,1]; mask: [H,W] uint8 in {0,1}.
    """
    rng = named_rng(cfg.seed, f"scene-{index}")
    size = cfg.size
    img = _paint_background(rng, size)
    mask = np.zeros((size, size), dtype=np.uint8)
    occupied = np.zeros((size, size), dtype=bool)

    count = int(rng.integers(cfg.glass_count_range[0], cfg.glass_count_range[1] + 1))
    for _ in range(count):
        pane = _pane_regions(rng, cfg, occupied)
        if pane is None:
            continue
        outer, inner, (ux, uy) = pane
        alpha = rng.uniform(*cfg.tint_alpha_range)
        tint = np.array([rng.uniform(0.3, 0.7), rng.uniform(0.5, 0.9), rng.uniform(0.6, 1.0)])
        tinted = (1 - alpha) * img + alpha * tint
        radius = int(rng.integers(cfg.blur_radius_range[0], cfg.blur_radius_range[1] + 1))
        tinted = _box_blur(tinted, radius)
        if rng.random() < cfg.highlight_probability:
            offset = rng.uniform(-0.4, 0.4) * size
            width = rng.uniform(0.02, 0.07) * size
            d = (ux + uy) / np.sqrt(2.0) - offset
            streak = np.exp(-((d / width) ** 2))
            strength = rng.uniform(0.35, 0.75)
            tinted = tinted + (strength * streak)[:, :, None] * (1.0 - tinted)
        img[inner] = tinted[inner]
        frame_color = rng.uniform(0.02, 0.25, size=3)
        img[outer & ~inner] = frame_color
        mask[inner] = 1
        occupied |= outer

    # distractors: framed rectangles with untouched interiors (not glass)
    n_distractors = int(rng.integers(cfg.distractor_count_range[0], cfg.distractor_count_range[1] + 1))
    for _ in range(n_distractors):
        pane = _pane_regions(rng, cfg, occupied)
        if pane is None:
            continue
        outer, inner, _ = pane
        img[outer & ~inner] = rng.uniform(0.02, 0.25, size=3)
        occupied |= outer

    return np.clip(img, 0.0, 1.0), mask


# -- PNG I/O ------------------------------------------------------------------


def _round_half_up_u8(values: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(path, image: np.ndarray) -> None:
    """[H,W,3] floats in [0,1] (or uint8) to an 8-bit RGB PNG."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidInputError(f"expected [H,W,3] image, got shape {image.shape}")
    data = image if image.dtype == np.uint8 else _round_half_up_u8(image)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def load_image(path) -> np.ndarray:
    """8-bit PNG to [H,W,3] float64 in [0,1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FileFormatError(f"{path}: not a readable image ({exc})") from exc
    return arr.astype(np.float64) / 255.0


def save_mask(path, mask: np.ndarray) -> None:
    mask = labelkit.validate_mask(mask)
    Image.fromarray((mask * 255).astype(np.uint8), mode="L").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    """Single-channel PNG to {0,1}; any value >= 128 counts as glass."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FileFormatError(f"{path}: not a readable mask ({exc})") from exc
    return (arr >= 128).astype(np.uint8)


def save_gray_map(path, values: np.ndarray) -> None:
    """[H,W] floats in [0,1] to 8-bit grayscale, round-half-up."""
    if values.ndim != 2:
        raise InvalidInputError(f"expected 2-D map, got shape {values.shape}")
    Image.fromarray(_round_half_up_u8(values), mode="L").save(path, format="PNG")


def load_gray_map(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FileFormatError(f"{path}: not a readable map ({exc})") from exc
    return arr.astype(np.float64) / 255.0


# -- resizing / augmentation --------------------------------------------------


def resize_pair(image: np.ndarray, mask: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear for the image, nearest-neighbor for the mask (stays binary)."""
    if image.shape[:2] != mask.shape:
        raise InvalidInputError(f"image {image.shape[:2]} and mask {mask.shape} dimensions differ")
    h, w = mask.shape
    if (h, w) == (size, size):
        return image, mask
    resized = np.stack([_resize_channel(image[:, :, c], size, size) for c in range(3)], axis=-1)
    src_y = np.minimum((np.arange(size) + 0.5) * h / size, h - 1).astype(np.int64)
    src_x = np.minimum((np.arange(size) + 0.5) * w / size, w - 1).astype(np.int64)
    mask_resized = mask[src_y[:, None], src_x[None, :]]
    return np.clip(resized, 0.0, 1.0), mask_resized


def flip_horizontal(*arrays):
    return tuple(np.ascontiguousarray(a[..., ::-1]) if a.ndim == 2 else np.ascontiguousarray(a[:, ::-1]) for a in arrays)


def augment_pair(image: np.ndarray, mask: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray, bool]:
    """Horizontal flip with probability 0.5, applied to both or neither."""
    if rng.random() < 0.5:
        flipped_img = np.ascontiguousarray(image[:, ::-1])
        flipped_mask = np.ascontiguousarray(mask[:, ::-1])
        return flipped_img, flipped_mask, True
    return image, mask, False


# -- dataset layout -----------------------------------------------------------


@dataclass
class DatasetManifest:
    root: Path
    entries: list[tuple[str, str]]
    split: str = "train"

    def __len__(self):
        return len(self.entries)

    def image_path(self, i) -> Path:
        return self.root / self.entries[i][0]

    def mask_path(self, i) -> Path:
        return self.root / self.entries[i][1]


def generate_dataset(root, count: int, cfg: SceneConfig) -> DatasetManifest:
    """Write `count` scenes under root/{images,masks} plus manifest.txt."""
    if count < 1:
        raise InvalidInputError(f"dataset count must be >= 1, got {count}")
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        image, mask = synth_scene(cfg, i)
        img_rel = f"images/{i:05d}.png"
        mask_rel = f"masks/{i:05d}.png"
        save_image(root / img_rel, image)
        save_mask(root / mask_rel, mask)
        entries.append((img_rel, mask_rel))
    manifest = DatasetManifest(root=root, entries=entries)
    write_manifest(manifest)
    return manifest


def write_manifest(manifest: DatasetManifest) -> None:
    lines = [f"{img} {msk}" for img, msk in manifest.entries]
    (manifest.root / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_manifest(root, split: str = "train") -> DatasetManifest:
    root = Path(root)
    path = root / "manifest.txt"
    if not path.exists():
        raise InvalidInputError(f"no manifest.txt under {root}")
    entries = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidInputError(f"malformed manifest line: {line!r}")
        entries.append((parts[0], parts[1]))
    if not entries:
        raise InvalidInputError(f"empty manifest under {root}")
    return DatasetManifest(root=root, entries=entries, split=split)


def split_manifest(manifest: DatasetManifest, val_count: int) -> tuple[DatasetManifest, DatasetManifest]:
    if not 0 < val_count < len(manifest.entries):
        raise InvalidInputError(f"val_count {val_count} out of range for {len(manifest.entries)} entries")
    train = DatasetManifest(root=manifest.root, entries=manifest.entries[:-val_count], split="train")
    val = DatasetManifest(root=manifest.root, entries=manifest.entries[-val_count:], split="val")
    return train, val


def validate_manifest(manifest: DatasetManifest) -> None:
    for i in range(len(manifest)):
        img_p, mask_p = manifest.image_path(i), manifest.mask_path(i)
        if not img_p.exists() or not mask_p.exists():
            raise InvalidInputError(f"manifest entry {i} has missing files: {img_p} / {mask_p}")
        with Image.open(img_p) as im, Image.open(mask_p) as mm:
            if im.size != mm.size:
                raise InvalidInputError(f"manifest entry {i}: image {im.size} != mask {mm.size}")


# -- supervision cache + batches ----------------------------------------------


def _load_item(manifest: DatasetManifest, i: int, size: int, cache_dir: Path | None):
    """Image, mask, and decoupled labels at `size`, via the float cache."""
    image = load_image(manifest.image_path(i))
    mask = load_mask(manifest.mask_path(i))
    image, mask = resize_pair(image, mask, size)
    stem = Path(manifest.entries[i][0]).stem
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        inner_p = cache_dir / f"{stem}_{size}.bl.gldt"
        boundary_p = cache_dir / f"{stem}_{size}.dl.gldt"
        if inner_p.exists() and boundary_p.exists():
            inner = labelkit.read_float_map(inner_p)
            boundary = labelkit.read_float_map(boundary_p)
            return image, mask, inner, boundary
    labels = labelkit.decouple(mask)
    inner = labels.interior.astype(np.float32)
    boundary = labels.boundary.astype(np.float32)
    if cache_dir is not None:
        labelkit.write_float_map(inner_p, inner)
        labelkit.write_float_map(boundary_p, boundary)
    return image, mask, inner, boundary


def epoch_batches(
    manifest: DatasetManifest,
    batch_size: int,
    rng,
    size: int,
    augment: bool = True,
    cache: bool = True,
    shuffle: bool = True,
):
    """One epoch of (images, masks, inner, boundary) float32 batches.

    Every manifest entry appears exactly once; the last batch may be short.
    Arrays are NCHW; masks/labels have a single channel.
    """
    if len(manifest) == 0:
        raise InvalidInputError("empty manifest")
    if batch_size < 1:
        raise InvalidInputError(f"batch_size must be >= 1, got {batch_size}")
    order = rng.permutation(len(manifest)) if shuffle else np.arange(len(manifest))
    cache_dir = (manifest.root / "cache") if cache else None
    for start in range(0, len(order), batch_size):
        chunk = order[start : start + batch_size]
        images, masks, inners, boundaries = [], [], [], []
        for i in chunk:
            image, mask, inner, boundary = _load_item(manifest, int(i), size, cache_dir)
            if augment and rng.random() < 0.5:
                image = image[:, ::-1]
                mask = mask[:, ::-1]
                inner = inner[:, ::-1]
                boundary = boundary[:, ::-1]
            images.append(np.ascontiguousarray(image.transpose(2, 0, 1), dtype=np.float32))
            masks.append(mask.astype(np.float32)[None])
            inners.append(np.ascontiguousarray(inner, dtype=np.float32)[None])
            boundaries.append(np.ascontiguousarray(boundary, dtype=np.float32)[None])
        yield (
            np.stack(images),
            np.stack(masks),
            np.stack(inners),
            np.stack(boundaries),
        )

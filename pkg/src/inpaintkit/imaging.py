"""Image I/O, pixel normalization, and the built-in synthetic dataset.

Images are float arrays of shape (3, H, W) with values in [-1, 1]
(8-bit pixels map through x / 127.5 - 1). The synthetic generator makes
smooth gradient backgrounds overlaid with a few anti-aliased shapes so the
toolkit trains and evaluates without any external data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

# Pixel normalization constants; recorded in manifests/checkpoints so
# downstream metric runs can verify consistent preprocessing.
NORM_SCALE = 127.5
NORM_OFFSET = -1.0


def normalize(u8: np.ndarray) -> np.ndarray:
    return u8.astype(np.float32) / NORM_SCALE + NORM_OFFSET


def denormalize(img: np.ndarray) -> np.ndarray:
    """Back to uint8, clamped to [0, 255]."""
    return np.clip(np.rint((img - NORM_OFFSET) * NORM_SCALE), 0, 255).astype(np.uint8)


def load_png(path) -> np.ndarray:
    """Load an 8-bit RGB PNG as a (3, H, W) float image in [-1, 1]."""
    with PILImage.open(path) as im:
        if im.format != "PNG":
            raise ValueError(f"{path}: expected a PNG file, got {im.format}")
        if im.mode != "RGB":
            raise ValueError(
                f"{path}: only 8-bit RGB PNGs are supported, got mode {im.mode!r}"
            )
        arr = np.asarray(im)
    return normalize(np.moveaxis(arr, -1, 0))


def save_png(image: np.ndarray, path) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"image must be (3, H, W), got shape {image.shape}")
    u8 = denormalize(image)
    PILImage.fromarray(np.moveaxis(u8, 0, -1), mode="RGB").save(path, format="PNG")


@dataclass
class Dataset:
    """Ordered train/validation images; iteration order is fixed by the seed."""

    train: list[np.ndarray] = field(repr=False)
    val: list[np.ndarray] = field(repr=False)
    seed: int = 0
    size: int = 0

    def split(self, name: str) -> list[np.ndarray]:
        if name not in ("train", "val"):
            raise ValueError(f"unknown split {name!r}")
        return self.train if name == "train" else self.val


def _soft_rect(yy, xx, top, left, bh, bw):
    # 1-pixel soft edge on each side; alpha in [0, 1]
    a = np.clip(yy - top + 0.5, 0.0, 1.0)
    b = np.clip(top + bh - yy - 0.5, 0.0, 1.0)
    c = np.clip(xx - left + 0.5, 0.0, 1.0)
    d = np.clip(left + bw - xx - 0.5, 0.0, 1.0)
    return a * b * c * d


def _soft_ellipse(yy, xx, cy, cx, ry, rx):
    r = np.sqrt(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
    return np.clip((1.0 - r) * min(ry, rx) + 0.5, 0.0, 1.0)


def _synth_image(size: int, rng: np.random.Generator, with_meta: bool = False):
    yy, xx = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64), indexing="ij")
    u = xx / max(size - 1, 1)
    v = yy / max(size - 1, 1)
    img = np.empty((3, size, size), dtype=np.float64)
    for c in range(3):
        c00, c01, c10, c11 = rng.uniform(-0.85, 0.85, size=4)
        img[c] = (c00 * (1 - u) * (1 - v) + c01 * u * (1 - v)
                  + c10 * (1 - u) * v + c11 * u * v)

    # First shape is pinned near the center and sized to reach beyond a
    # central-quarter mask, so its color and extent stay visible in the
    # context and the inpainting task is learnable; the rest land anywhere.
    n_shapes = int(rng.integers(1, 5))
    q = size / 4.0
    boxes = []
    for s in range(n_shapes):
        color = rng.uniform(-0.9, 0.9, size=3)
        kind = rng.choice(("rect", "ellipse"))
        if s == 0:
            cy = rng.uniform(1.5 * q, 2.5 * q)
            cx = rng.uniform(1.5 * q, 2.5 * q)
            ry = rng.uniform(size / 3, size / 2)
            rx = rng.uniform(size / 3, size / 2)
        else:
            cy = rng.uniform(0, size)
            cx = rng.uniform(0, size)
            ry = rng.uniform(size / 8, size / 3)
            rx = rng.uniform(size / 8, size / 3)
        if kind == "rect":
            alpha = _soft_rect(yy, xx, cy - ry, cx - rx, 2 * ry, 2 * rx)
        else:
            alpha = _soft_ellipse(yy, xx, cy, cx, ry, rx)
        img = alpha[None] * color[:, None, None] + (1.0 - alpha[None]) * img
        boxes.append((cy - ry, cy + ry, cx - rx, cx + rx))
    out = np.clip(img, -1.0, 1.0).astype(np.float32)
    return (out, boxes) if with_meta else out


def synth_dataset(count: int, size: int, seed: int, val_count: int = 0) -> Dataset:
    """Deterministic synthetic dataset of `count` images (last `val_count` are val)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if size % 2 != 0:
        raise ValueError(f"size must be even for cascade use, got {size}")
    if not 0 <= val_count < count:
        raise ValueError(f"val_count must be in [0, count), got {val_count}")
    rng = np.random.default_rng(seed)
    items = [_synth_image(size, rng) for _ in range(count)]
    split_at = count - val_count
    return Dataset(train=items[:split_at], val=items[split_at:], seed=seed, size=size)


def dataset_mean_color(dataset: Dataset) -> np.ndarray:
    """Per-channel mean over all train pixels."""
    if not dataset.train:
        raise ValueError("dataset has no train images")
    total = np.zeros(3, dtype=np.float64)
    count = 0
    for img in dataset.train:
        total += img.reshape(3, -1).sum(axis=1, dtype=np.float64)
        count += img.shape[1] * img.shape[2]
    return total / count


def image_ids(split: str, count: int) -> list[str]:
    return [f"{split}_{i:04d}" for i in range(count)]


def save_dataset(dataset: Dataset, out_dir) -> None:
    """Write train/*.png, val/*.png and a manifest.json index."""
    out = Path(out_dir)
    files = {"train": [], "val": []}
    for split in ("train", "val"):
        (out / split).mkdir(parents=True, exist_ok=True)
        for ident, img in zip(image_ids(split, len(dataset.split(split))), dataset.split(split)):
            name = f"{split}/{ident}.png"
            save_png(img, out / name)
            files[split].append(name)
    manifest = {
        "files": files,
        "seed": dataset.seed,
        "size": dataset.size,
        "normalization": {"scale": NORM_SCALE, "offset": NORM_OFFSET},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def load_dataset(data_dir) -> Dataset:
    """Load a dataset directory in manifest order."""
    base = Path(data_dir)
    manifest = json.loads((base / "manifest.json").read_text(encoding="utf-8"))
    norm = manifest.get("normalization", {})
    if norm.get("scale") != NORM_SCALE or norm.get("offset") != NORM_OFFSET:
        raise ValueError(f"{data_dir}: incompatible normalization constants {norm}")
    splits = {
        split: [load_png(base / name) for name in manifest["files"][split]]
        for split in ("train", "val")
    }
    return Dataset(train=splits["train"], val=splits["val"],
                   seed=manifest["seed"], size=manifest["size"])

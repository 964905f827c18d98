"""Binary region masks: which image content is dropped and which is context.

Convention throughout the package: a mask cell of 1 marks a missing
(dropped) pixel, 0 marks context. Masks are stored at full image
resolution as uint8 grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage


@dataclass(frozen=True)
class Mask:
    """Binary H x W grid; 1 = missing region, 0 = context."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        # copy: freezing a caller's array in place would be a surprise
        bits = np.array(self.bits, dtype=np.uint8, order="C")
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        if bits.size == 0:
            raise ValueError("mask must be non-empty")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("mask cells must be exactly 0 or 1")
        bits.setflags(write=False)  # masks are freely shareable across threads
        object.__setattr__(self, "bits", bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape


def central_mask(height: int, width: int, fraction: float) -> Mask:
    """Mask whose missing region is a centered square covering ~`fraction` of the area.

    The square side is round(min(height, width) * sqrt(fraction)), so a
    fraction of 0.25 on an even-sided image drops exactly the central
    quarter.
    """
    if height < 2 or width < 2:
        raise ValueError(f"image must be at least 2x2, got {height}x{width}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    side = int(round(min(height, width) * np.sqrt(fraction)))
    if side < 1:
        raise ValueError(
            f"fraction {fraction} yields a degenerate zero-side square on {height}x{width}"
        )
    side = min(side, height, width)
    top = (height - side) // 2
    left = (width - side) // 2
    bits = np.zeros((height, width), dtype=np.uint8)
    bits[top : top + side, left : left + side] = 1
    return Mask(bits)


def random_blocks_mask(
    height: int,
    width: int,
    max_coverage: float,
    block_side_range: tuple[int, int],
    rng: np.random.Generator,
) -> Mask:
    """Union of uniformly placed rectangular blocks, kept under a coverage budget.

    Blocks (sides drawn uniformly from ``block_side_range``, inclusive) are
    placed one by one; the first block whose addition would push the union
    coverage above ``max_coverage`` is rejected and generation stops.
    Deterministic for a given generator state.
    """
    if not 0.0 < max_coverage <= 1.0:
        raise ValueError(f"max_coverage must be in (0, 1], got {max_coverage}")
    lo, hi = int(block_side_range[0]), int(block_side_range[1])
    if lo < 1 or hi < lo:
        raise ValueError(f"bad block side range {block_side_range}")
    if hi > height or hi > width:
        raise ValueError(
            f"block side range {block_side_range} exceeds image bounds {height}x{width}"
        )
    bits = np.zeros((height, width), dtype=np.uint8)
    budget = max_coverage * height * width
    while True:
        bh = int(rng.integers(lo, hi + 1))
        bw = int(rng.integers(lo, hi + 1))
        top = int(rng.integers(0, height - bh + 1))
        left = int(rng.integers(0, width - bw + 1))
        candidate = bits.copy()
        candidate[top : top + bh, left : left + bw] = 1
        if int(candidate.sum()) > budget:
            break
        bits = candidate
    return Mask(bits)


def complement(mask: Mask) -> Mask:
    """Bitwise negation; an involution."""
    return Mask(1 - mask.bits)


def coverage(mask: Mask) -> float:
    """Fraction of cells that are missing (value 1)."""
    return float(mask.bits.sum()) / mask.bits.size


def apply_mask(image: np.ndarray, mask: Mask, fill) -> np.ndarray:
    """Replace missing pixels by `fill`; copy context pixels bit-exactly.

    `image` is (C, H, W); `fill` is a scalar or per-channel sequence.
    """
    image = np.asarray(image)
    if image.ndim != 3:
        raise ValueError(f"image must be (C, H, W), got shape {image.shape}")
    if image.shape[1:] != mask.shape:
        raise ValueError(
            f"mask shape {mask.shape} does not match image shape {image.shape[1:]}"
        )
    fill = np.asarray(fill, dtype=image.dtype).reshape(-1)
    if fill.size not in (1, image.shape[0]):
        raise ValueError(f"fill must be scalar or per-channel, got {fill.size} values")
    if fill.size == 1:
        fill = np.repeat(fill, image.shape[0])
    out = image.copy()
    missing = mask.bits == 1
    for c in range(image.shape[0]):
        out[c][missing] = fill[c]
    return out


def make_sampler(
    strategy: str,
    height: int,
    width: int,
    fraction: float = 0.25,
    max_coverage: float = 0.25,
    side_range: tuple[int, int] = (4, 8),
):
    """Mask source for training/evaluation loops: a callable of one generator.

    "central" always yields the same fixed square; "random_blocks" draws a
    fresh mask from the generator on every call.
    """
    if strategy == "central":
        fixed = central_mask(height, width, fraction)
        return lambda rng: fixed
    if strategy == "random_blocks":
        return lambda rng: random_blocks_mask(height, width, max_coverage, side_range, rng)
    raise ValueError(f"unknown mask strategy {strategy!r}")


def save_mask_png(mask: Mask, path) -> None:
    """Serialize to a 1-bit-per-pixel PNG: 0 = context (black), 255 = missing (white)."""
    img = PILImage.fromarray(mask.bits * np.uint8(255), mode="L").convert("1")
    img.save(path, format="PNG")


def load_mask_png(path) -> Mask:
    """Load a mask PNG (1-bit or grayscale; values >= 128 are missing)."""
    with PILImage.open(path) as im:
        if im.mode not in ("1", "L"):
            raise ValueError(f"mask PNG must be 1-bit or grayscale, got mode {im.mode!r}")
        arr = np.asarray(im.convert("L"))
    return Mask((arr >= 128).astype(np.uint8))

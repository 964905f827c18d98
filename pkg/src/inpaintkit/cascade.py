"""Two-stage cascade of context encoders.

A frozen half-resolution encoder-decoder produces a coarse fill for the
dropped region; the full-resolution stage sees the original image with that
coarse fill pasted into the hole and is trained to refine it. Only stage-2
parameters ever receive gradients.
"""

from __future__ import annotations

import json
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .masking import Mask, apply_mask
from .nn import network as N
from .nn.checkpoint import read_checkpoint, write_checkpoint
from .nn.losses import adversarial_losses, masked_rec_loss, masked_rec_loss_batch
from .nn.optim import Adam
from .nn.train import TrainConfig, TrainResult, train_context_encoder

STAGE1_FILE = "stage1.cepk"
STAGE2_FILE = "stage2.cepk"
MANIFEST_FILE = "manifest.json"


def downscale(image: np.ndarray) -> np.ndarray:
    """Halve both spatial dimensions by 2x2 bilinear averaging (range preserving)."""
    image = np.asarray(image)
    h, w = image.shape[-2], image.shape[-1]
    if h % 2 or w % 2:
        raise ValueError(f"downscale needs even dimensions, got {h}x{w}")
    shaped = image.reshape(image.shape[:-2] + (h // 2, 2, w // 2, 2))
    return shaped.mean(axis=(-3, -1))


def _up_axis(x: np.ndarray, axis: int) -> np.ndarray:
    # Doubling with half-pixel-centered bilinear weights (0.25/0.75), edges clamped.
    x = np.moveaxis(x, axis, -1)
    left = np.concatenate([x[..., :1], x[..., :-1]], axis=-1)
    right = np.concatenate([x[..., 1:], x[..., -1:]], axis=-1)
    even = 0.25 * left + 0.75 * x
    odd = 0.75 * x + 0.25 * right
    out = np.stack([even, odd], axis=-1).reshape(x.shape[:-1] + (2 * x.shape[-1],))
    return np.moveaxis(out, -1, axis)


def upscale(image: np.ndarray) -> np.ndarray:
    """Double both spatial dimensions by bilinear interpolation."""
    image = np.asarray(image)
    return _up_axis(_up_axis(image, -2), -1)


def downscale_mask(mask: Mask) -> Mask:
    """Half-resolution mask: bilinear downscale of the bits, thresholded at 0.5."""
    avg = downscale(mask.bits.astype(np.float64))
    return Mask((avg >= 0.5).astype(np.uint8))


@dataclass
class CascadeModel:
    """Frozen half-resolution stage plus the trainable full-resolution stage."""

    stage1_spec: N.NetworkSpec
    stage1_params: list = field(repr=False)
    stage2_spec: N.NetworkSpec
    stage2_params: list = field(repr=False)
    stage1_frozen: bool = True
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        c1, h1, w1 = self.stage1_spec.input_shape
        c2, h2, w2 = self.stage2_spec.input_shape
        if (h1 * 2, w1 * 2) != (h2, w2) or c1 != c2:
            raise ValueError(
                f"stage-1 input {self.stage1_spec.input_shape} is not half of "
                f"stage-2 input {self.stage2_spec.input_shape}"
            )
        if not self.stage1_frozen:
            raise ValueError("stage-1 is always frozen in a cascade")

    @property
    def full_size(self) -> tuple[int, int]:
        return self.stage2_spec.input_shape[1:]


def _fill_batch(stage1_fn, P: np.ndarray, bits: np.ndarray, fill):
    """Batched steps (i)-(iii); stage1_fn maps the downscaled masked batch to
    the coarse prediction batch."""
    fill_arr = np.asarray(fill, dtype=P.dtype).reshape(-1)
    if fill_arr.size == 1:
        fill_arr = np.repeat(fill_arr, P.shape[1])
    m = bits[:, None] == 1
    masked = np.where(m, fill_arr[None, :, None, None], P)
    small = downscale(masked).astype(P.dtype)
    small_pred = stage1_fn(small)
    coarse = upscale(small_pred).astype(P.dtype)
    composite = np.where(m, coarse, P)
    return composite, coarse


def cascade_fill(model: CascadeModel, P: np.ndarray, mask: Mask, fill):
    """Coarse-fill one image: drop the region, downscale, run stage-1, upscale
    its prediction, and paste it into the hole.

    Returns (stage2_input, upscaled_stage1_output). Context pixels of the
    stage-2 input equal P bit-exactly.
    """
    P = np.asarray(P)
    if P.ndim != 3:
        raise ValueError(f"image must be (C, H, W), got shape {P.shape}")
    if P.shape[1:] != model.full_size:
        raise ValueError(f"image {P.shape[1:]} does not match model resolution {model.full_size}")
    if mask.shape != model.full_size:
        raise ValueError(f"mask {mask.shape} does not match model resolution {model.full_size}")

    def stage1_fn(small):
        out, _ = N.forward(model.stage1_spec, model.stage1_params, small)
        return out

    composite, coarse = _fill_batch(stage1_fn, P[None], mask.bits[None], fill)
    return composite[0], coarse[0]


def cascade_rec_loss(model: CascadeModel, P: np.ndarray, mask: Mask, fill):
    """Masked reconstruction loss of stage-2 on the coarse-filled composite.

    Returns (loss, gradients for stage-2 parameters only); stage-1 is never
    touched.
    """
    composite, _ = cascade_fill(model, P, mask, fill)
    out, tape = N.forward(model.stage2_spec, model.stage2_params, composite)
    loss, dF = masked_rec_loss(P, out, mask)
    grads, _ = N.backward(model.stage2_spec, model.stage2_params, tape, dF)
    return loss, grads


@dataclass
class CascadeAdvGrads:
    stage2: list
    disc: list


def cascade_adv_loss(model: CascadeModel, disc_spec: N.NetworkSpec, disc_params: list,
                     P: np.ndarray, mask: Mask, fill):
    """Adversarial pair on the cascade: the discriminator sees the real image
    vs stage-2's output on the coarse-filled composite. Non-saturating
    generator term; gradients reach stage-2 and the discriminator only."""
    composite, _ = cascade_fill(model, P, mask, fill)
    out, tape = N.forward(model.stage2_spec, model.stage2_params, composite)
    adv = adversarial_losses(disc_spec, disc_params, P[None], out[None])
    stage2_grads, _ = N.backward(model.stage2_spec, model.stage2_params, tape, adv.dfake[0])
    return adv.disc_loss, adv.gen_loss, CascadeAdvGrads(stage2=stage2_grads, disc=adv.disc_grads)


def inpaint(model, image: np.ndarray, mask: Mask, fill) -> np.ndarray:
    """Final composite: context pixels straight from the input, predicted
    content inside the mask. `model` is a CascadeModel or a (spec, params)
    pair for a single-stage encoder."""
    image = np.asarray(image)
    if isinstance(model, CascadeModel):
        composite, _ = cascade_fill(model, image, mask, fill)
        pred, _ = N.forward(model.stage2_spec, model.stage2_params, composite)
    else:
        spec, params = model
        if image.shape[1:] != spec.input_shape[1:]:
            raise ValueError(
                f"image {image.shape[1:]} does not match model resolution {spec.input_shape[1:]}"
            )
        if mask.shape != spec.input_shape[1:]:
            raise ValueError(f"mask {mask.shape} does not match model resolution")
        pred, _ = N.forward(spec, params, apply_mask(image, mask, fill))
    return np.where(mask.bits[None] == 1, pred.astype(image.dtype), image)


def train_stage1(
    images: list[np.ndarray],
    cfg: TrainConfig,
    mask_sampler,
    fill,
    channels: tuple[int, ...] = (16, 32, 64),
    disc_channels: tuple[int, ...] = (16, 32, 64),
    log_path=None,
    dtype=np.float32,
) -> TrainResult:
    """Train the half-resolution stage on downscaled images with
    correspondingly downscaled masks (threshold-0.5 rule)."""
    if not images:
        raise ValueError("no training images")
    small_images = [downscale(img).astype(img.dtype) for img in images]
    size = small_images[0].shape[-1]
    spec = N.context_encoder_spec(size, channels=channels)
    disc_spec = N.discriminator_spec(size, channels=disc_channels) if cfg.adversarial_enabled else None

    def small_sampler(rng):
        return downscale_mask(mask_sampler(rng))

    return train_context_encoder(small_images, spec, cfg, small_sampler, fill,
                                 disc_spec=disc_spec, log_path=log_path, dtype=dtype)


def train_stage2(
    stage1_ckpt_path,
    images: list[np.ndarray],
    cfg: TrainConfig,
    mask_sampler,
    fill,
    channels: tuple[int, ...] = (16, 32, 64),
    disc_channels: tuple[int, ...] = (16, 32, 64),
    log_path=None,
    dtype=np.float32,
) -> CascadeModel:
    """Train the full-resolution stage against the frozen stage-1 checkpoint.

    Every batch is coarse-filled by stage-1 first; gradients flow into the
    stage-2 parameters (and the discriminator, if enabled) only.
    """
    cfg.validate()
    if not images:
        raise ValueError("no training images")
    try:
        stage1 = read_checkpoint(stage1_ckpt_path)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot load stage-1 checkpoint: {exc}") from exc
    size = images[0].shape[-1]
    if stage1.spec.input_shape[1] * 2 != size:
        raise ValueError(
            f"stage-1 resolution {stage1.spec.input_shape[1:]} is not half of {size}"
        )
    spec2 = N.context_encoder_spec(size, channels=channels)
    rng = np.random.default_rng(cfg.seed)
    params2 = N.init_params(spec2, rng, dtype)
    opt = Adam(params2, lr=cfg.learning_rate)
    disc_spec = disc_params = disc_opt = None
    if cfg.adversarial_enabled:
        disc_spec = N.discriminator_spec(size, channels=disc_channels)
        disc_params = N.init_params(disc_spec, rng, dtype)
        disc_opt = Adam(disc_params, lr=cfg.learning_rate)
    stage1_params = N.cast_params(stage1.params, dtype)

    def stage1_fn(small):
        out, _ = N.forward(stage1.spec, stage1_params, small)
        return out

    history = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        order = np.arange(len(images))
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            rng.shuffle(order)
            rec_losses, adv_losses = [], []
            for b in range(0, len(images), cfg.batch_size):
                batch = order[b : b + cfg.batch_size]
                masks = [mask_sampler(rng) for _ in batch]
                P = np.stack([images[i] for i in batch]).astype(dtype)
                bits = np.stack([m.bits for m in masks])
                composite, _ = _fill_batch(stage1_fn, P, bits, fill)
                Y, tape = N.forward(spec2, params2, composite)
                rec, dF = masked_rec_loss_batch(P, Y, bits)
                if not np.isfinite(rec):
                    raise FloatingPointError(
                        f"non-finite loss at epoch {epoch} batch {b // cfg.batch_size}"
                    )
                if cfg.adversarial_enabled:
                    adv = adversarial_losses(disc_spec, disc_params, P, Y)
                    disc_opt.step(disc_params, adv.disc_grads)
                    dtotal = cfg.lambda_rec * dF + cfg.lambda_adv * adv.dfake.astype(dF.dtype)
                    adv_losses.append(adv.gen_loss)
                else:
                    dtotal = cfg.lambda_rec * dF
                grads, _ = N.backward(spec2, params2, tape, dtotal)
                opt.step(params2, grads)
                rec_losses.append(rec)
            record = {
                "epoch": epoch,
                "rec_loss": float(np.mean(rec_losses)),
                "adv_loss": float(np.mean(adv_losses)) if adv_losses else 0.0,
                "wall_time_s": time.perf_counter() - t0,
            }
            history.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
    finally:
        if log_fh:
            log_fh.close()

    manifest = {
        "full_resolution": [size, size],
        "half_resolution": [size // 2, size // 2],
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "history": history,
    }
    return CascadeModel(
        stage1_spec=stage1.spec,
        stage1_params=stage1.params,
        stage2_spec=spec2,
        stage2_params=params2,
        manifest=manifest,
    )


def save_cascade_checkpoint(out_dir, stage1_ckpt_path, model: CascadeModel,
                            cfg: TrainConfig | None = None) -> None:
    """Write the cascade container: the stage-1 checkpoint copied byte-for-byte,
    the stage-2 checkpoint, and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(stage1_ckpt_path, out / STAGE1_FILE)
    write_checkpoint(out / STAGE2_FILE, model.stage2_spec, model.stage2_params,
                     config=cfg.to_dict() if cfg else None,
                     seed=cfg.seed if cfg else None)
    (out / MANIFEST_FILE).write_text(
        json.dumps(model.manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_cascade_checkpoint(ckpt_dir) -> CascadeModel:
    base = Path(ckpt_dir)
    stage1 = read_checkpoint(base / STAGE1_FILE)
    stage2 = read_checkpoint(base / STAGE2_FILE)
    manifest = json.loads((base / MANIFEST_FILE).read_text(encoding="utf-8"))
    return CascadeModel(
        stage1_spec=stage1.spec,
        stage1_params=stage1.params,
        stage2_spec=stage2.spec,
        stage2_params=stage2.params,
        manifest=manifest,
    )

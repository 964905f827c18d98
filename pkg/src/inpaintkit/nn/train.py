"""Training loop for a single context encoder.

Reconstruction-only by default; the adversarial branch can be switched on,
in which case the generator objective is the weighted joint loss and the
discriminator is updated alongside from the same batches. Runs are
deterministic for a fixed config seed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict

import numpy as np

from ..masking import apply_mask
from . import network as N
from .losses import adversarial_losses, masked_rec_loss_batch
from .optim import Adam


@dataclass
class TrainConfig:
    lambda_rec: float = 0.999
    lambda_adv: float = 0.0
    learning_rate: float = 2e-3
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    adversarial_enabled: bool = False

    def validate(self) -> None:
        if self.lambda_rec <= 0:
            raise ValueError(f"lambda_rec must be > 0, got {self.lambda_rec}")
        if self.lambda_adv < 0:
            raise ValueError(f"lambda_adv must be >= 0, got {self.lambda_adv}")
        if not self.adversarial_enabled and self.lambda_adv != 0:
            raise ValueError("lambda_adv must be 0 when adversarial training is disabled")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    spec: N.NetworkSpec
    params: list
    history: list
    disc_spec: N.NetworkSpec | None = None
    disc_params: list | None = None


def _batches(count: int, batch_size: int, order: np.ndarray):
    for start in range(0, count, batch_size):
        yield order[start : start + batch_size]


def train_context_encoder(
    images: list[np.ndarray],
    spec: N.NetworkSpec,
    cfg: TrainConfig,
    mask_sampler,
    fill,
    disc_spec: N.NetworkSpec | None = None,
    log_path=None,
    dtype=np.float32,
    params: list | None = None,
) -> TrainResult:
    """Train on masked reconstruction; returns params and the per-epoch history.

    `mask_sampler(rng)` supplies the mask for each image occurrence. Existing
    `params` may be passed to continue training.
    """
    cfg.validate()
    if not images:
        raise ValueError("no training images")
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = N.init_params(spec, rng, dtype)
    opt = Adam(params, lr=cfg.learning_rate)
    disc_params = None
    disc_opt = None
    if cfg.adversarial_enabled:
        if disc_spec is None:
            raise ValueError("adversarial training needs a discriminator spec")
        disc_params = N.init_params(disc_spec, rng, dtype)
        disc_opt = Adam(disc_params, lr=cfg.learning_rate)

    history = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        order = np.arange(len(images))
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            rng.shuffle(order)
            rec_losses = []
            adv_losses = []
            for b, batch in enumerate(_batches(len(images), cfg.batch_size, order)):
                masks = [mask_sampler(rng) for _ in batch]
                P = np.stack([images[i] for i in batch]).astype(dtype)
                X = np.stack(
                    [apply_mask(images[i], m, fill) for i, m in zip(batch, masks)]
                ).astype(dtype)
                bits = np.stack([m.bits for m in masks])
                Y, tape = N.forward(spec, params, X)
                rec, dF = masked_rec_loss_batch(P, Y, bits)
                if not np.isfinite(rec):
                    raise FloatingPointError(f"non-finite loss at epoch {epoch} batch {b}")
                if cfg.adversarial_enabled:
                    adv = adversarial_losses(disc_spec, disc_params, P, Y)
                    disc_opt.step(disc_params, adv.disc_grads)
                    dtotal = cfg.lambda_rec * dF + cfg.lambda_adv * adv.dfake.astype(dF.dtype)
                    adv_losses.append(adv.gen_loss)
                else:
                    dtotal = cfg.lambda_rec * dF
                grads, _ = N.backward(spec, params, tape, dtotal)
                opt.step(params, grads)
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
    return TrainResult(spec=spec, params=params, history=history,
                       disc_spec=disc_spec, disc_params=disc_params)


def evaluate_masked_mse(
    images: list[np.ndarray],
    spec: N.NetworkSpec,
    params: list,
    mask_sampler,
    fill,
    seed: int = 0,
) -> float:
    """Mean masked reconstruction MSE over a held-out set, seeded masks."""
    if not images:
        raise ValueError("no evaluation images")
    rng = np.random.default_rng(seed)
    losses = []
    for img in images:
        mask = mask_sampler(rng)
        x = apply_mask(img, mask, fill)
        y, _ = N.forward(spec, params, x[None].astype(params_dtype(params)))
        rec, _ = masked_rec_loss_batch(img[None].astype(y.dtype), y, mask.bits[None])
        losses.append(rec)
    return float(np.mean(losses))


def params_dtype(params: list):
    for p in params:
        if p is not None:
            return p["w"].dtype
    raise ValueError("no parameter arrays")

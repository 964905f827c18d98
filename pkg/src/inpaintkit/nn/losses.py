"""Training losses: masked reconstruction and the adversarial pair.

The reconstruction loss is the mean squared error restricted to the missing
region; its gradient is identically zero at every context pixel. The
adversarial pair uses the standard discriminator cross-entropy and the
non-saturating generator term, with probabilities clamped away from {0, 1}
before the logs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..masking import Mask
from . import network as N

PROB_EPS = 1e-7


def masked_rec_loss(P: np.ndarray, F_out: np.ndarray, mask: Mask):
    """MSE over missing pixels only; returns (loss, gradient w.r.t. F_out)."""
    P = np.asarray(P)
    F_out = np.asarray(F_out)
    if P.shape != F_out.shape or P.ndim != 3:
        raise ValueError(f"image/output shape mismatch: {P.shape} vs {F_out.shape}")
    if P.shape[1:] != mask.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {P.shape[1:]}")
    m = mask.bits.astype(F_out.dtype)
    count = float(mask.bits.sum())
    if count == 0:
        raise ValueError("mask has no missing pixels; reconstruction loss undefined")
    norm = count * P.shape[0]
    diff = (P - F_out) * m[None]
    loss = float(np.einsum("chw,chw->", diff, diff)) / norm
    grad = (-2.0 / norm) * diff
    return loss, grad


def masked_rec_loss_batch(P: np.ndarray, F_out: np.ndarray, bits: np.ndarray):
    """Batch mean of per-image masked MSE; bits is (N, H, W) of {0, 1}."""
    if P.shape != F_out.shape or P.ndim != 4:
        raise ValueError(f"batch shape mismatch: {P.shape} vs {F_out.shape}")
    n, c = P.shape[:2]
    m = bits.astype(F_out.dtype)[:, None]
    counts = bits.sum(axis=(1, 2)) * c  # masked elements per image
    if (counts == 0).any():
        raise ValueError("a mask in the batch has no missing pixels")
    counts = counts.astype(F_out.dtype)
    diff = (P - F_out) * m
    per_image = np.einsum("nchw,nchw->n", diff, diff) / counts
    loss = float(per_image.mean())
    grad = (-2.0 / n) * diff / counts[:, None, None, None]
    return loss, grad


@dataclass
class AdvResult:
    disc_loss: float
    gen_loss: float
    disc_grads: list      # aligned with the discriminator's params
    dfake: np.ndarray     # d gen_loss / d fake batch, for the generator backward


def _clamped_log_grad(p):
    """log of clamped probabilities and the derivative of that composition."""
    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    clamped = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return clamped, inside.astype(p.dtype)


def _add_grads(a: list, b: list) -> list:
    return [
        None if ga is None else {k: ga[k] + gb[k] for k in ga}
        for ga, gb in zip(a, b)
    ]


def adversarial_losses(disc_spec: N.NetworkSpec, disc_params: list,
                       real: np.ndarray, fake: np.ndarray) -> AdvResult:
    """Discriminator cross-entropy and non-saturating generator loss.

    disc_loss = -mean[log D(real) + log(1 - D(fake))]
    gen_loss  = -mean[log D(fake)]

    Gradients are returned for the discriminator parameters and for the fake
    batch (to be pushed through the generator).
    """
    real = np.asarray(real)
    fake = np.asarray(fake)
    if real.shape != fake.shape or real.ndim != 4:
        raise ValueError(f"real/fake batch shapes differ: {real.shape} vs {fake.shape}")
    n = real.shape[0]

    out_r, tape_r = N.forward(disc_spec, disc_params, real)
    out_f, tape_f = N.forward(disc_spec, disc_params, fake)
    if out_r[0].size != 1:
        raise ValueError(f"discriminator must emit one probability per sample, got {out_r.shape[1:]}")
    p_real = out_r.reshape(n)
    p_fake = out_f.reshape(n)

    cr, in_r = _clamped_log_grad(p_real)
    cf, in_f = _clamped_log_grad(p_fake)
    disc_loss = float(-(np.log(cr) + np.log(1.0 - cf)).mean())
    gen_loss = float(-np.log(cf).mean())

    # d disc_loss / d p: real term -1/(n p), fake term +1/(n (1-p))
    dp_real = (-1.0 / (n * cr)) * in_r
    dp_fake_disc = (1.0 / (n * (1.0 - cf))) * in_f
    dp_fake_gen = (-1.0 / (n * cf)) * in_f

    grads_r, _ = N.backward(disc_spec, disc_params, tape_r, dp_real.reshape(out_r.shape))
    grads_f, _ = N.backward(disc_spec, disc_params, tape_f, dp_fake_disc.reshape(out_f.shape))
    disc_grads = _add_grads(grads_r, grads_f)
    _, dfake = N.backward(disc_spec, disc_params, tape_f, dp_fake_gen.reshape(out_f.shape))
    return AdvResult(disc_loss, gen_loss, disc_grads, dfake)


def joint_loss(rec: float, adv_gen: float, cfg) -> float:
    """lambda_rec * rec + lambda_adv * adv_gen."""
    cfg.validate()
    return cfg.lambda_rec * rec + cfg.lambda_adv * adv_gen

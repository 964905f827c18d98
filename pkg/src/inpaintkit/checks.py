"""Gradient verification suite: every layer type and every loss path.

Each component builds a small double-precision network, computes analytic
gradients, and compares them against central finite differences. Component
names appear in the grad-check CLI report.
"""

from __future__ import annotations

import numpy as np

from .cascade import CascadeModel, _fill_batch, cascade_adv_loss, cascade_rec_loss
from .masking import apply_mask, central_mask
from .nn import network as N
from .nn.gradcheck import check_param_gradients, grad_check
from .nn.losses import PROB_EPS, adversarial_losses, masked_rec_loss, masked_rec_loss_batch
from .nn.train import TrainConfig

DEFAULT_EPS = 1e-5
# Deep composite losses accumulate enough per-evaluation rounding noise that
# the usual step would sit in the noise-dominated regime; a larger step keeps
# the central-difference error well under the reporting threshold.
LOSS_PATH_EPS = 4e-5
DEFAULT_THRESHOLD = 1e-5


def _mse_head(target):
    def loss_fn(y):
        diff = y - target
        loss = float(np.mean(diff * diff))
        return loss, (2.0 / diff.size) * diff

    return loss_fn


# Finite differencing is only valid when no relu/leaky unit sits within the
# perturbation's reach of its kink; configurations are redrawn until every
# kinked activation has at least this much input margin.
KINK_MARGIN = 5e-4


def _kink_margin(spec, params, x) -> float:
    outs = N.layer_outputs(spec, params, x)
    margin = np.inf
    prev = np.asarray(x)
    for layer, out in zip(spec.layers, outs):
        if layer.kind in ("relu", "leaky_relu"):
            margin = min(margin, float(np.abs(prev).min()))
        prev = out
    return margin


def _gradcheck_params(spec, rng):
    """Double-precision parameters conditioned for finite differencing.

    Fan-in init keeps deep-net activations orders of magnitude below the
    finite-difference step, where relu kink crossings corrupt the numeric
    derivative; boosted weights and firmly signed biases push preactivations
    away from the kinks.
    """
    params = N.init_params(spec, rng, np.float64)
    for p in params:
        if p is None:
            continue
        p["w"] *= 2.5
        sign = rng.choice((-1.0, 1.0), p["b"].shape)
        p["b"][...] = sign * rng.uniform(0.7, 1.3, p["b"].shape)
    return params


def _conditioned_params(spec, rng, inputs, attempts: int = 200):
    """Redraw until every kinked activation clears KINK_MARGIN on all inputs."""
    for _ in range(attempts):
        params = _gradcheck_params(spec, rng)
        if all(_kink_margin(spec, params, x) > KINK_MARGIN for x in inputs):
            return params
    raise RuntimeError(f"could not condition {spec.input_shape} net for finite differences")


def _conditioned_disc_params(disc_spec, rng, inputs, attempts: int = 200):
    """Discriminator conditioning: kink margins plus probabilities kept in a
    moderate band, since d^3/dw^3 of the log losses blows up near {0, 1} and
    inflates the finite-difference truncation error."""
    for _ in range(attempts):
        params = _gradcheck_params(disc_spec, rng)
        if not all(_kink_margin(disc_spec, params, x) > KINK_MARGIN for x in inputs):
            continue
        probs = np.concatenate([
            N.forward(disc_spec, params, x)[0].reshape(-1) for x in inputs
        ])
        if probs.min() > 0.15 and probs.max() < 0.85:
            return params
    raise RuntimeError("could not condition the discriminator for finite differences")


def layer_checks(eps: float = DEFAULT_EPS, seed: int = 0) -> dict[str, float]:
    """Each layer kind through an MSE head; activations ride on a conv stem."""
    rng = np.random.default_rng(seed)
    cases = {
        "conv": [N.conv(4, 3, stride=2, padding=1)],
        "tconv": [N.tconv(4, 4, stride=2, padding=1)],
        "cwfc": [N.cwfc()],
        "relu": [N.conv(4, 3, stride=1, padding=1), N.activation("relu")],
        "leaky_relu": [N.conv(4, 3, stride=1, padding=1), N.activation("leaky_relu")],
        "tanh": [N.conv(4, 3, stride=1, padding=1), N.activation("tanh")],
        "sigmoid": [N.conv(4, 3, stride=1, padding=1), N.activation("sigmoid")],
    }
    in_shape = (3, 8, 8)
    errors = {}
    for name, layers in cases.items():
        spec = N.NetworkSpec(in_shape, tuple(layers))
        x = rng.uniform(-1.0, 1.0, (2,) + in_shape)
        params = _conditioned_params(spec, rng, [x])
        target = rng.uniform(-1.0, 1.0, (2,) + spec.output_shape)
        errors[name] = grad_check(spec, params, x, _mse_head(target), eps=eps, seed=seed)
    return errors


def _disc_probs(disc_spec, disc_params, batch):
    out, _ = N.forward(disc_spec, disc_params, batch)
    return np.clip(out.reshape(batch.shape[0]), PROB_EPS, 1.0 - PROB_EPS)


def joint_loss_checks(eps: float = LOSS_PATH_EPS, seed: int = 0) -> dict[str, float]:
    """Generator gradients of the weighted rec+adv objective and discriminator
    gradients of its cross-entropy, on a 16x16 encoder-decoder."""
    rng = np.random.default_rng(seed)
    size = 16
    cfg = TrainConfig(lambda_rec=0.999, lambda_adv=0.001, adversarial_enabled=True)
    gen_spec = N.context_encoder_spec(size)
    disc_spec = N.discriminator_spec(size)
    P = rng.uniform(-1.0, 1.0, (2, 3, size, size))
    mask = central_mask(size, size, 0.25)
    bits = np.stack([mask.bits] * 2)
    X = np.stack([apply_mask(p, mask, 0.0) for p in P])
    gen_params = _conditioned_params(gen_spec, rng, [X])
    fake0 = N.forward(gen_spec, gen_params, X)[0]
    disc_params = _conditioned_disc_params(disc_spec, rng, [P, fake0])

    def gen_compute():
        Y, tape = N.forward(gen_spec, gen_params, X)
        rec, dF = masked_rec_loss_batch(P, Y, bits)
        adv = adversarial_losses(disc_spec, disc_params, P, Y)
        loss = cfg.lambda_rec * rec + cfg.lambda_adv * adv.gen_loss
        grads, _ = N.backward(gen_spec, gen_params, tape,
                              cfg.lambda_rec * dF + cfg.lambda_adv * adv.dfake)
        return loss, grads

    def gen_loss_only():
        Y, _ = N.forward(gen_spec, gen_params, X)
        rec = masked_rec_loss_batch(P, Y, bits)[0]
        gen_loss = float(-np.log(_disc_probs(disc_spec, disc_params, Y)).mean())
        return cfg.lambda_rec * rec + cfg.lambda_adv * gen_loss

    _, gen_grads = gen_compute()
    gen_err = check_param_gradients(gen_params, gen_grads, gen_loss_only,
                                    eps=eps, rng=np.random.default_rng(seed))

    adv = adversarial_losses(disc_spec, disc_params, P, fake0)

    def disc_loss_only():
        pr = _disc_probs(disc_spec, disc_params, P)
        pf = _disc_probs(disc_spec, disc_params, fake0)
        return float(-(np.log(pr) + np.log(1.0 - pf)).mean())

    disc_err = check_param_gradients(disc_params, adv.disc_grads, disc_loss_only,
                                     eps=eps, rng=np.random.default_rng(seed))
    return {"joint_generator": gen_err, "adversarial_discriminator": disc_err}


def cascade_loss_checks(eps: float = LOSS_PATH_EPS, seed: int = 0) -> dict[str, float]:
    """Stage-2 and discriminator gradients of the cascade rec/adv losses
    (stage-1 at 8x8, stage-2 at 16x16, stage-1 frozen)."""
    rng = np.random.default_rng(seed)
    size = 16
    s1_spec = N.context_encoder_spec(size // 2)
    s2_spec = N.context_encoder_spec(size)
    P = rng.uniform(-1.0, 1.0, (3, size, size))
    mask = central_mask(size, size, 0.25)
    fill = 0.0
    stage1_params = _gradcheck_params(s1_spec, rng)  # frozen: never perturbed
    # The composite depends only on the frozen stage, so it is precomputed for
    # the loss-only finite-difference paths.
    composite = _fill_batch(
        lambda small: N.forward(s1_spec, stage1_params, small)[0],
        P[None], mask.bits[None], fill,
    )[0][0]
    model = CascadeModel(
        stage1_spec=s1_spec,
        stage1_params=stage1_params,
        stage2_spec=s2_spec,
        stage2_params=_conditioned_params(s2_spec, rng, [composite[None]]),
    )
    disc_spec = N.discriminator_spec(size)
    fake0 = N.forward(s2_spec, model.stage2_params, composite)[0][None]
    disc_params = _conditioned_disc_params(disc_spec, rng, [P[None], fake0])

    _, rec_grads = cascade_rec_loss(model, P, mask, fill)

    def rec_loss_only():
        out, _ = N.forward(model.stage2_spec, model.stage2_params, composite)
        return masked_rec_loss(P, out, mask)[0]

    rec_err = check_param_gradients(model.stage2_params, rec_grads, rec_loss_only,
                                    eps=eps, rng=np.random.default_rng(seed))

    _, _, adv_grads = cascade_adv_loss(model, disc_spec, disc_params, P, mask, fill)

    def adv_gen_loss_only():
        out, _ = N.forward(model.stage2_spec, model.stage2_params, composite)
        return float(-np.log(_disc_probs(disc_spec, disc_params, out[None])).mean())

    gen_err = check_param_gradients(model.stage2_params, adv_grads.stage2,
                                    adv_gen_loss_only, eps=eps,
                                    rng=np.random.default_rng(seed))

    def adv_disc_loss_only():
        pr = _disc_probs(disc_spec, disc_params, P[None])
        pf = _disc_probs(disc_spec, disc_params, fake0)
        return float(-(np.log(pr) + np.log(1.0 - pf)).mean())

    disc_err = check_param_gradients(disc_params, adv_grads.disc, adv_disc_loss_only,
                                     eps=eps, rng=np.random.default_rng(seed))
    return {
        "cascade_rec": rec_err,
        "cascade_adv_generator": gen_err,
        "cascade_adv_discriminator": disc_err,
    }


def run_all_checks(eps: float = DEFAULT_EPS, seed: int = 0,
                   loss_eps: float = LOSS_PATH_EPS) -> dict[str, float]:
    errors = {}
    errors.update(layer_checks(eps=eps, seed=seed))
    errors.update(joint_loss_checks(eps=loss_eps, seed=seed))
    errors.update(cascade_loss_checks(eps=loss_eps, seed=seed))
    return errors

"""Finite-difference verification of the backward passes.

Central differences in double precision against the analytic gradients, on
a seeded random subsample of coordinates per parameter array. The relative
error uses a small floor in the denominator so that coordinates whose true
gradient is below the finite-difference noise floor compare absolutely
instead of exploding.
"""

from __future__ import annotations

import numpy as np

from . import network as N

# Coordinates with |gradient| under this floor are compared on an absolute
# scale; central differences cannot resolve relative error below it.
GRAD_FLOOR = 1e-4


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), GRAD_FLOOR)


def check_param_gradients(params: list, analytic_grads: list, loss_only,
                          eps: float = 1e-5, coords_per_array: int = 50,
                          rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic_grads and central differences.

    `loss_only` recomputes the scalar loss from the (perturbed-in-place)
    params. Arrays must be float64 for the stated tolerances to hold.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    max_err = 0.0
    for i, p in enumerate(params):
        if p is None:
            continue
        for key, arr in p.items():
            grad = analytic_grads[i][key]
            count = min(coords_per_array, arr.size)
            idx = rng.choice(arr.size, size=count, replace=False)
            for flat in idx:
                orig = arr.flat[flat]
                arr.flat[flat] = orig + eps
                lp = loss_only()
                arr.flat[flat] = orig - eps
                lm = loss_only()
                arr.flat[flat] = orig
                numeric = (lp - lm) / (2.0 * eps)
                max_err = max(max_err, relative_error(float(grad.flat[flat]), numeric))
    return max_err


def grad_check(spec: N.NetworkSpec, params: list, x, loss_fn,
               eps: float = 1e-5, coords_per_array: int = 50,
               seed: int = 0) -> float:
    """Check the network backward pass for a given loss head.

    `loss_fn` maps the network output to (loss, d loss / d output). Returns
    the max relative error over a random parameter subsample (>= 50
    coordinates per parameter array, or all of them when fewer exist).
    """
    y, tape = N.forward(spec, params, x)
    loss, dy = loss_fn(y)
    analytic, _ = N.backward(spec, params, tape, dy)

    def loss_only():
        out, _ = N.forward(spec, params, x)
        return loss_fn(out)[0]

    rng = np.random.default_rng(seed)
    return check_param_gradients(params, analytic, loss_only, eps, coords_per_array, rng)

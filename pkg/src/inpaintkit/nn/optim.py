"""Adaptive-moment optimizer with bias correction."""

from __future__ import annotations

import numpy as np


class Adam:
    """Holds first/second moment accumulators and the step count for one
    parameter set; updates are applied in place and are deterministic."""

    def __init__(self, params: list, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [None if p is None else {k: np.zeros_like(v) for k, v in p.items()}
                  for p in params]
        self.v = [None if p is None else {k: np.zeros_like(v) for k, v in p.items()}
                  for p in params]

    def step(self, params: list, grads: list, lr: float | None = None) -> list:
        """One update; aborts (naming the layer) if any gradient is non-finite."""
        lr = self.lr if lr is None else lr
        self.step_count += 1
        t = self.step_count
        correct1 = 1.0 - self.beta1 ** t
        correct2 = 1.0 - self.beta2 ** t
        for i, (p, g) in enumerate(zip(params, grads)):
            if p is None:
                continue
            for key in p:
                grad = g[key]
                if not np.isfinite(grad).all():
                    raise FloatingPointError(f"non-finite gradient at layer {i} ({key})")
                m = self.m[i][key]
                v = self.v[i][key]
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                m_hat = m / correct1
                v_hat = v / correct2
                p[key] -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p[key].dtype)
        return params

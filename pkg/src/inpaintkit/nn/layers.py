"""Array kernels for the network layers: forward and exact backward passes.

All kernels take batched inputs (N, C, H, W). Convolutions use strided
windows + einsum; the transposed convolution is implemented as the
gradient-of-convolution (scatter-add via col2im), so the two are exact
adjoints of each other.
"""

from __future__ import annotations

import numpy as np


def _windows(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Sliding (k, k) windows of a padded input, as a view (N, C, oh, ow, k, k)."""
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hp, wp = x.shape[2], x.shape[3]
    out_h = (hp - kernel) // stride + 1
    out_w = (wp - kernel) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ValueError(f"kernel {kernel} too large for padded input {hp}x{wp}")
    sn, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        (n, c, out_h, out_w, kernel, kernel),
        (sn, sc, stride * sh, stride * sw, sh, sw),
        writeable=False,
    )


def _scatter_windows(cols: np.ndarray, out_hw: tuple[int, int], stride: int,
                     padding: int) -> np.ndarray:
    """Adjoint of :func:`_windows`: scatter-add (N, C, oh, ow, k, k) into (N, C, H, W)."""
    n, c, oh, ow, k, _ = cols.shape
    h, w = out_hw
    acc = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            acc[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += (
                cols[:, :, :, :, i, j]
            )
    if padding:
        acc = acc[:, :, padding : padding + h, padding : padding + w]
    return acc


def conv2d_forward(x, w, b, stride: int, padding: int):
    """x (N, Ci, H, W), w (Co, Ci, k, k), b (Co,) -> y (N, Co, oh, ow)."""
    win = _windows(x, w.shape[2], stride, padding)
    y = np.einsum("nchwkl,ockl->nohw", win, w, optimize=True)
    y += b[None, :, None, None]
    cache = (x.shape, win, w, stride, padding)
    return y, cache


def conv2d_backward(dy, cache):
    x_shape, win, w, stride, padding = cache
    db = dy.sum(axis=(0, 2, 3))
    dw = np.einsum("nchwkl,nohw->ockl", win, dy, optimize=True)
    dcols = np.einsum("nohw,ockl->nchwkl", dy, w, optimize=True)
    dx = _scatter_windows(dcols, x_shape[2:], stride, padding)
    return dx, dw, db


def conv_transpose2d_forward(x, w, b, stride: int, padding: int):
    """x (N, Ci, H, W), w (Ci, Co, k, k), b (Co,) -> y (N, Co, OH, OW).

    OH = (H - 1) * stride + k - 2 * padding.
    """
    n, ci, h, wd = x.shape
    k = w.shape[2]
    out_h = (h - 1) * stride + k - 2 * padding
    out_w = (wd - 1) * stride + k - 2 * padding
    if out_h < 1 or out_w < 1:
        raise ValueError(f"transposed conv output degenerates to {out_h}x{out_w}")
    cols = np.einsum("nchw,cokl->nohwkl", x, w, optimize=True)
    y = _scatter_windows(cols, (out_h, out_w), stride, padding)
    y += b[None, :, None, None]
    cache = (x, w, stride, padding)
    return y, cache


def conv_transpose2d_backward(dy, cache):
    x, w, stride, padding = cache
    k = w.shape[2]
    win = _windows(dy, k, stride, padding)
    db = dy.sum(axis=(0, 2, 3))
    dx = np.einsum("nohwkl,cokl->nchw", win, w, optimize=True)
    dw = np.einsum("nchw,nohwkl->cokl", x, win, optimize=True)
    return dx, dw, db


def channelwise_fc_forward(x, w, b):
    """Per-channel dense mix of spatial positions.

    x (N, C, H, W), w (C, HW, HW), b (C, HW); channel c of the output depends
    only on channel c of the input.
    """
    n, c, h, wd = x.shape
    xf = x.reshape(n, c, h * wd)
    yf = np.einsum("coi,nci->nco", w, xf, optimize=True) + b[None]
    cache = (xf, w, (n, c, h, wd))
    return yf.reshape(n, c, h, wd), cache


def channelwise_fc_backward(dy, cache):
    xf, w, shape = cache
    n, c, h, wd = shape
    dyf = dy.reshape(n, c, h * wd)
    db = dyf.sum(axis=0)
    dw = np.einsum("nco,nci->coi", dyf, xf, optimize=True)
    dxf = np.einsum("coi,nco->nci", w, dyf, optimize=True)
    return dxf.reshape(n, c, h, wd), dw, db


def relu_forward(x):
    y = np.maximum(x, 0)
    return y, x > 0


def relu_backward(dy, cache):
    return dy * cache


def leaky_relu_forward(x, slope: float):
    y = np.where(x > 0, x, slope * x)
    return y, (x > 0, slope)


def leaky_relu_backward(dy, cache):
    positive, slope = cache
    return dy * np.where(positive, 1.0, slope)


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy, cache):
    return dy * (1.0 - cache * cache)


def sigmoid_forward(x):
    y = 1.0 / (1.0 + np.exp(-x))
    return y, y


def sigmoid_backward(dy, cache):
    return dy * cache * (1.0 - cache)

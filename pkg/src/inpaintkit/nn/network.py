"""Network description, parameter init, and the forward/backward drivers.

A network is a flat sequence of layer specs applied in order. The single
channel-wise fully-connected layer of an encoder-decoder acts as the
bottleneck; its flattened output per image is the latent vector consumed by
the distortion metric.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from . import layers as L

PARAM_LAYER_KINDS = ("conv", "tconv", "cwfc")
ACTIVATION_KINDS = ("relu", "leaky_relu", "tanh", "sigmoid")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    slope: float = 0.2  # leaky_relu only

    def __post_init__(self):
        if self.kind not in PARAM_LAYER_KINDS + ACTIVATION_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind in ("conv", "tconv"):
            if self.out_channels < 1 or self.kernel < 1 or self.stride < 1 or self.padding < 0:
                raise ValueError(f"bad {self.kind} geometry: {self}")


def conv(out_channels, kernel, stride=1, padding=0):
    return LayerSpec("conv", out_channels, kernel, stride, padding)


def tconv(out_channels, kernel, stride=1, padding=0):
    return LayerSpec("tconv", out_channels, kernel, stride, padding)


def cwfc():
    return LayerSpec("cwfc")


def activation(kind, slope=0.2):
    return LayerSpec(kind, slope=slope)


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer descriptions plus the input shape they compose from."""

    input_shape: tuple[int, int, int]  # (C, H, W)
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.layer_shapes()  # composition is validated eagerly

    def layer_shapes(self) -> list[tuple[int, int, int]]:
        """Output shape of every layer; raises (with the layer index) on mismatch."""
        shapes = []
        c, h, w = self.input_shape
        if c < 1 or h < 1 or w < 1:
            raise ValueError(f"bad input shape {self.input_shape}")
        for i, spec in enumerate(self.layers):
            if spec.kind == "conv":
                oh = (h + 2 * spec.padding - spec.kernel) // spec.stride + 1
                ow = (w + 2 * spec.padding - spec.kernel) // spec.stride + 1
                if spec.kernel > h + 2 * spec.padding or spec.kernel > w + 2 * spec.padding:
                    raise ValueError(f"layer {i} (conv): kernel exceeds input {h}x{w}")
                c, h, w = spec.out_channels, oh, ow
            elif spec.kind == "tconv":
                oh = (h - 1) * spec.stride + spec.kernel - 2 * spec.padding
                ow = (w - 1) * spec.stride + spec.kernel - 2 * spec.padding
                if oh < 1 or ow < 1:
                    raise ValueError(f"layer {i} (tconv): output degenerates to {oh}x{ow}")
                c, h, w = spec.out_channels, oh, ow
            # cwfc and activations preserve shape
            if h < 1 or w < 1:
                raise ValueError(f"layer {i} ({spec.kind}): empty spatial output {h}x{w}")
            shapes.append((c, h, w))
        return shapes

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return self.layer_shapes()[-1]

    @property
    def bottleneck_index(self) -> int:
        idx = [i for i, s in enumerate(self.layers) if s.kind == "cwfc"]
        if len(idx) != 1:
            raise ValueError(f"expected exactly one channel-wise FC bottleneck, found {len(idx)}")
        return idx[0]

    @property
    def latent_dim(self) -> int:
        c, h, w = self.layer_shapes()[self.bottleneck_index]
        return c * h * w

    def to_dict(self) -> dict:
        return {"input_shape": list(self.input_shape),
                "layers": [asdict(s) for s in self.layers]}

    @staticmethod
    def from_dict(d: dict) -> "NetworkSpec":
        return NetworkSpec(tuple(d["input_shape"]),
                           tuple(LayerSpec(**s) for s in d["layers"]))


def init_params(spec: NetworkSpec, rng: np.random.Generator, dtype=np.float32) -> list:
    """Fan-in-scaled uniform weights, zero biases; entries align with spec.layers."""
    params = []
    c, h, w = spec.input_shape
    for layer, shape in zip(spec.layers, spec.layer_shapes()):
        if layer.kind == "conv":
            fan_in = c * layer.kernel * layer.kernel
            bound = 1.0 / np.sqrt(fan_in)
            wgt = rng.uniform(-bound, bound,
                              (layer.out_channels, c, layer.kernel, layer.kernel))
            params.append({"w": wgt.astype(dtype), "b": np.zeros(layer.out_channels, dtype)})
        elif layer.kind == "tconv":
            fan_in = c * layer.kernel * layer.kernel
            bound = 1.0 / np.sqrt(fan_in)
            wgt = rng.uniform(-bound, bound,
                              (c, layer.out_channels, layer.kernel, layer.kernel))
            params.append({"w": wgt.astype(dtype), "b": np.zeros(layer.out_channels, dtype)})
        elif layer.kind == "cwfc":
            hw = h * w
            bound = 1.0 / np.sqrt(hw)
            wgt = rng.uniform(-bound, bound, (c, hw, hw))
            params.append({"w": wgt.astype(dtype), "b": np.zeros((c, hw), dtype)})
        else:
            params.append(None)
        c, h, w = shape
    return params


def param_count(params: list) -> int:
    return sum(p["w"].size + p["b"].size for p in params if p is not None)


def cast_params(params: list, dtype) -> list:
    return [None if p is None else {k: v.astype(dtype) for k, v in p.items()} for p in params]


def zero_grads_like(params: list) -> list:
    return [None if p is None else {k: np.zeros_like(v) for k, v in p.items()} for p in params]


class Tape(NamedTuple):
    caches: list
    lifted: bool


def _lift(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError(f"input must be (C, H, W) or (N, C, H, W), got shape {x.shape}")


def _run_layers(spec: NetworkSpec, params: list, x, upto: int | None = None):
    caches = []
    stop = len(spec.layers) if upto is None else upto
    for i, layer in enumerate(spec.layers[:stop]):
        p = params[i]
        try:
            if layer.kind == "conv":
                x, cache = L.conv2d_forward(x, p["w"], p["b"], layer.stride, layer.padding)
            elif layer.kind == "tconv":
                x, cache = L.conv_transpose2d_forward(x, p["w"], p["b"], layer.stride, layer.padding)
            elif layer.kind == "cwfc":
                x, cache = L.channelwise_fc_forward(x, p["w"], p["b"])
            elif layer.kind == "relu":
                x, cache = L.relu_forward(x)
            elif layer.kind == "leaky_relu":
                x, cache = L.leaky_relu_forward(x, layer.slope)
            elif layer.kind == "tanh":
                x, cache = L.tanh_forward(x)
            else:
                x, cache = L.sigmoid_forward(x)
        except ValueError as exc:
            raise ValueError(f"layer {i} ({layer.kind}): {exc}") from exc
        caches.append(cache)
    return x, caches


def forward(spec: NetworkSpec, params: list, x):
    """Run the full network; returns (output, tape) where the tape suffices
    for an exact backward pass."""
    x, lifted = _lift(x)
    if x.shape[1:] != spec.input_shape:
        raise ValueError(
            f"layer 0: input shape {x.shape[1:]} does not match spec {spec.input_shape}"
        )
    if len(params) != len(spec.layers):
        raise ValueError("params do not align with spec layers")
    y, caches = _run_layers(spec, params, x)
    if not np.isfinite(y).all():
        raise FloatingPointError("non-finite values in network output")
    return (y[0] if lifted else y), Tape(caches, lifted)


def backward(spec: NetworkSpec, params: list, tape: Tape, dy):
    """Exact gradients of a scalar loss w.r.t. every weight and bias.

    Returns (grads, dx) with grads aligned to params.
    """
    if len(tape.caches) != len(spec.layers):
        raise ValueError("tape does not match spec (stale or truncated)")
    dy = np.asarray(dy)
    if tape.lifted:
        if dy.ndim != 3:
            raise ValueError("output gradient rank does not match forward call")
        dy = dy[None]
    grads: list = [None] * len(spec.layers)
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        cache = tape.caches[i]
        if layer.kind == "conv":
            dy, dw, db = L.conv2d_backward(dy, cache)
            grads[i] = {"w": dw, "b": db}
        elif layer.kind == "tconv":
            dy, dw, db = L.conv_transpose2d_backward(dy, cache)
            grads[i] = {"w": dw, "b": db}
        elif layer.kind == "cwfc":
            dy, dw, db = L.channelwise_fc_backward(dy, cache)
            grads[i] = {"w": dw, "b": db}
        elif layer.kind == "relu":
            dy = L.relu_backward(dy, cache)
        elif layer.kind == "leaky_relu":
            dy = L.leaky_relu_backward(dy, cache)
        elif layer.kind == "tanh":
            dy = L.tanh_backward(dy, cache)
        else:
            dy = L.sigmoid_backward(dy, cache)
    dx = dy[0] if tape.lifted else dy
    return grads, dx


def layer_outputs(spec: NetworkSpec, params: list, x) -> list:
    """Output of every layer for one forward run (inspection/diagnostics)."""
    x, _ = _lift(x)
    outs = []
    for i in range(len(spec.layers)):
        x, _ = _run_single(spec, params, x, i)
        outs.append(x)
    return outs


def _run_single(spec: NetworkSpec, params: list, x, index: int):
    layer = spec.layers[index]
    p = params[index]
    if layer.kind == "conv":
        return L.conv2d_forward(x, p["w"], p["b"], layer.stride, layer.padding)
    if layer.kind == "tconv":
        return L.conv_transpose2d_forward(x, p["w"], p["b"], layer.stride, layer.padding)
    if layer.kind == "cwfc":
        return L.channelwise_fc_forward(x, p["w"], p["b"])
    if layer.kind == "relu":
        return L.relu_forward(x)
    if layer.kind == "leaky_relu":
        return L.leaky_relu_forward(x, layer.slope)
    if layer.kind == "tanh":
        return L.tanh_forward(x)
    return L.sigmoid_forward(x)


def encode(spec: NetworkSpec, params: list, image) -> np.ndarray:
    """Flattened bottleneck activation of one masked image; this is the latent
    vector the distortion metric consumes."""
    x, lifted = _lift(image)
    if not lifted:
        raise ValueError("encode takes a single (C, H, W) image")
    if x.shape[1:] != spec.input_shape:
        raise ValueError(
            f"layer 0: input shape {x.shape[1:]} does not match spec {spec.input_shape}"
        )
    y, _ = _run_layers(spec, params, x, upto=spec.bottleneck_index + 1)
    return y.reshape(-1)


def context_encoder_spec(size: int, in_channels: int = 3,
                         channels: tuple[int, ...] = (16, 32, 64)) -> NetworkSpec:
    """Desk-scale encoder-decoder: stride-2 4x4 convs down, channel-wise FC
    bottleneck, mirrored transposed convs up, tanh output in [-1, 1].

    The latent dimension is channels[-1] * (size / 2**len(channels))**2,
    e.g. 256 at size 16 and 1024 at size 32 with the default widths.
    """
    if size % (2 ** len(channels)) != 0:
        raise ValueError(f"size {size} not divisible by 2^{len(channels)}")
    specs = []
    for ch in channels:
        specs += [conv(ch, 4, stride=2, padding=1), activation("relu")]
    specs += [cwfc(), activation("relu")]
    for ch in list(channels[:-1])[::-1]:
        specs += [tconv(ch, 4, stride=2, padding=1), activation("relu")]
    specs += [tconv(in_channels, 4, stride=2, padding=1), activation("tanh")]
    return NetworkSpec((in_channels, size, size), tuple(specs))


def discriminator_spec(size: int, in_channels: int = 3,
                       channels: tuple[int, ...] = (16, 32, 64)) -> NetworkSpec:
    """Stride-2 conv stack ending in a single sigmoid probability per sample."""
    if size % (2 ** len(channels)) != 0:
        raise ValueError(f"size {size} not divisible by 2^{len(channels)}")
    specs = []
    for ch in channels:
        specs += [conv(ch, 4, stride=2, padding=1), activation("leaky_relu")]
    final = size // (2 ** len(channels))
    specs += [conv(1, final, stride=1, padding=0), activation("sigmoid")]
    return NetworkSpec((in_channels, size, size), tuple(specs))

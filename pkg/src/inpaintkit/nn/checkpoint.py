"""Parameter checkpoint file format.

Layout (little-endian): magic ``CEPK``, version u32, header length u32,
header JSON (network spec, the training config used, the RNG seed, pixel
normalization constants), then per parameter-bearing layer the weight and
bias arrays as (ndim u32, dims u32*, float32 data), in layer order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .network import NetworkSpec

MAGIC = b"CEPK"
VERSION = 1


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: list
    header: dict


def _write_array(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes())


def _read_array(fh) -> np.ndarray:
    (ndim,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
    count = int(np.prod(dims))
    data = fh.read(4 * count)
    if len(data) != 4 * count:
        raise ValueError("truncated checkpoint array")
    return np.frombuffer(data, dtype="<f4").reshape(dims).copy()


def write_checkpoint(path, spec: NetworkSpec, params: list,
                     config: dict | None = None, seed: int | None = None,
                     extra: dict | None = None) -> None:
    header = {"spec": spec.to_dict(), "config": config, "seed": seed}
    if extra:
        header.update(extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for p in params:
            if p is None:
                continue
            _write_array(fh, p["w"])
            _write_array(fh, p["b"])


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a parameter checkpoint (magic {magic!r})")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        spec = NetworkSpec.from_dict(header["spec"])
        params = []
        for layer in spec.layers:
            if layer.kind in ("conv", "tconv", "cwfc"):
                w = _read_array(fh)
                b = _read_array(fh)
                params.append({"w": w, "b": b})
            else:
                params.append(None)
    return Checkpoint(spec=spec, params=params, header=header)

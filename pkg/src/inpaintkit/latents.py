"""Binary latent dumps and evaluation report files.

Dump layout (little-endian): magic ``LTNT``, version u32, D u32, n u32,
image-id length u32 + UTF-8 bytes, then n*D float32 values row-major (one
row per mask). One file per image; a plain-text manifest lists the files
belonging to one evaluation.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .metric import DistortionReport, LatentSet

MAGIC = b"LTNT"
VERSION = 1


def write_latent_dump(path, latent_set: LatentSet) -> None:
    arr = np.ascontiguousarray(latent_set.latents, dtype="<f4")
    n, dim = arr.shape
    ident = latent_set.image_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, dim, n))
        fh.write(struct.pack("<I", len(ident)))
        fh.write(ident)
        fh.write(arr.tobytes())


def read_latent_dump(path) -> LatentSet:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a latent dump (magic {magic!r})")
        version, dim, n = struct.unpack("<III", fh.read(12))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported latent dump version {version}")
        (id_len,) = struct.unpack("<I", fh.read(4))
        ident = fh.read(id_len).decode("utf-8")
        data = fh.read(4 * n * dim)
        if len(data) != 4 * n * dim:
            raise ValueError(f"{path}: truncated latent dump")
    arr = np.frombuffer(data, dtype="<f4").reshape(n, dim)
    return LatentSet(ident, arr)


def write_latent_manifest(path, filenames: list[str]) -> None:
    Path(path).write_text("".join(f"{name}\n" for name in filenames), encoding="utf-8")


def read_latent_manifest(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip()]


def load_evaluation(manifest_path) -> list[LatentSet]:
    """Read every latent dump listed in a manifest (paths relative to it)."""
    base = Path(manifest_path).parent
    return [read_latent_dump(base / name) for name in read_latent_manifest(manifest_path)]


def write_report_records(path, image_ids: list[str], report: DistortionReport) -> None:
    """One JSON record per image: image_id, dist2, nsd."""
    if len(image_ids) != report.k:
        raise ValueError("image id count does not match report k")
    with open(path, "w", encoding="utf-8") as fh:
        for ident, dist2, nsd in zip(image_ids, report.per_image_dist2, report.per_image_nsd):
            fh.write(json.dumps({"image_id": ident, "dist2": dist2, "nsd": nsd}) + "\n")


def format_report_text(reports: dict[str, DistortionReport]) -> str:
    """Human-readable report; one summary line per evaluated model."""
    lines = [
        "# normalized squared-distortion report",
        "# +/- is the sample standard deviation over images (k), not over repeated runs",
    ]
    width = max((len(name) for name in reports), default=0)
    for name, report in reports.items():
        lines.append(f"{name.ljust(width)}  {report.summary_line()}")
    return "\n".join(lines) + "\n"

"""Evaluation protocol: sample images and masks, encode every pair, score.

One fixed set of n masks is drawn per evaluation and shared by all k images.
For a single-stage model the encoder runs on the masked image; for a cascade
it runs stage-2's encoder on the coarse-filled composite, so the latent
reflects what the refinement stage actually sees.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cascade as C
from .config import ExperimentConfig
from .imaging import Dataset
from .latents import (
    format_report_text,
    write_latent_dump,
    write_latent_manifest,
    write_report_records,
)
from .masking import Mask, apply_mask
from .metric import DistortionReport, LatentSet, nsd_estimate, standardize_latents
from .nn import network as N
from .nn.checkpoint import read_checkpoint


@dataclass
class LoadedModel:
    """A checkpoint resolved to something that can encode and inpaint."""

    name: str
    kind: str  # "single" | "cascade"
    single: tuple | None = None       # (spec, params)
    cascade: C.CascadeModel | None = None

    @property
    def latent_dim(self) -> int:
        spec = self.single[0] if self.kind == "single" else self.cascade.stage2_spec
        return spec.latent_dim

    @property
    def image_size(self) -> tuple[int, int]:
        spec = self.single[0] if self.kind == "single" else self.cascade.stage2_spec
        return spec.input_shape[1:]


def load_model(name: str, path) -> LoadedModel:
    """A directory is a cascade container; a file is a single-stage checkpoint."""
    p = Path(path)
    if p.is_dir():
        return LoadedModel(name=name, kind="cascade", cascade=C.load_cascade_checkpoint(p))
    ckpt = read_checkpoint(p)
    return LoadedModel(name=name, kind="single", single=(ckpt.spec, ckpt.params))


def encoder_fn(model: LoadedModel, fill):
    """(image, mask) -> latent vector for the given model."""
    if model.kind == "single":
        spec, params = model.single

        def encode_single(image, mask: Mask):
            return N.encode(spec, params, apply_mask(image, mask, fill))

        return encode_single

    cas = model.cascade

    def encode_cascade(image, mask: Mask):
        composite, _ = C.cascade_fill(cas, image, mask, fill)
        return N.encode(cas.stage2_spec, cas.stage2_params, composite)

    return encode_cascade


def sample_eval_masks(cfg: ExperimentConfig, height: int, width: int) -> list[Mask]:
    """n masks for the evaluation, drawn once from the seeded sampler."""
    rng = np.random.default_rng(cfg.eval_seed)
    sampler = cfg.eval_sampler(height, width)
    return [sampler(rng) for _ in range(cfg.eval_n)]


def sample_eval_images(dataset: Dataset, k: int, seed: int, split: str = "val"):
    """k images (seeded, without replacement) from a split; clamps k to its size."""
    pool = dataset.split(split)
    if not pool:
        raise ValueError(f"dataset split {split!r} is empty")
    k = min(k, len(pool))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=k, replace=False)
    ids = [f"{split}_{int(i):04d}" for i in picks]
    return ids, [pool[int(i)] for i in picks]


def compute_latent_sets(encode, ids: list[str], images: list, masks: list[Mask],
                        threads: int = 1) -> list[LatentSet]:
    """Encode every (image, mask) pair; per-image work may run in parallel but
    results are assembled in image order, so the outcome is thread-count
    independent."""

    def one(arg):
        ident, image = arg
        lat = np.stack([encode(image, m) for m in masks]).astype(np.float32)
        return LatentSet(ident, lat)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, zip(ids, images)))
    return [one(pair) for pair in zip(ids, images)]


def evaluate_model(model: LoadedModel, ids, images, masks, fill,
                   standardize: bool = False, mask_strategy: str = "",
                   threads: int = 1) -> tuple[DistortionReport, list[LatentSet]]:
    sets = compute_latent_sets(encoder_fn(model, fill), ids, images, masks, threads)
    scored = standardize_latents(sets)[0] if standardize else sets
    report = nsd_estimate(scored, model.latent_dim, standardized=standardize,
                          mask_strategy=mask_strategy)
    return report, sets


def run_nsd_evaluation(models: list[LoadedModel], dataset: Dataset,
                       cfg: ExperimentConfig, fill, out_dir=None):
    """Full protocol over one or more models; rejects latent-dim mismatches.

    Writes, per model, the latent dumps + manifest and the per-image records;
    returns {model name: report}.
    """
    if not models:
        raise ValueError("no models to evaluate")
    dims = {m.name: m.latent_dim for m in models}
    if len(set(dims.values())) != 1:
        raise ValueError(f"latent dimensions differ across models: {dims}")
    sizes = {m.image_size for m in models}
    if len(sizes) != 1:
        raise ValueError(f"image resolutions differ across models: {sizes}")
    height, width = sizes.pop()

    ids, images = sample_eval_images(dataset, cfg.eval_k, cfg.eval_seed)
    masks = sample_eval_masks(cfg, height, width)
    reports: dict[str, DistortionReport] = {}
    for model in models:
        report, sets = evaluate_model(
            model, ids, images, masks, fill,
            standardize=cfg.standardize, mask_strategy=cfg.eval_mask_strategy,
            threads=cfg.threads,
        )
        reports[model.name] = report
        if out_dir is not None:
            model_dir = Path(out_dir) / model.name
            latent_dir = model_dir / "latents"
            latent_dir.mkdir(parents=True, exist_ok=True)
            names = []
            for s in sets:
                fname = f"{s.image_id}.ltnt"
                write_latent_dump(latent_dir / fname, s)
                names.append(fname)
            write_latent_manifest(latent_dir / "manifest.txt", names)
            write_report_records(model_dir / "records.jsonl", ids, report)
    if out_dir is not None:
        (Path(out_dir) / "report.txt").write_text(format_report_text(reports),
                                                  encoding="utf-8")
    return reports

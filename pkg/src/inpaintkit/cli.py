"""Command-line entry point.

Subcommands: gen-data, train, eval-nsd, inpaint, grad-check, mask-preview.
Every command resolves one flat config (flag > file > default), writes the
resolved copy beside its outputs, and is bit-reproducible from that file
when run with --threads 1.

Exit codes: 0 success, 1 usage or config error, 2 runtime failure,
3 grad-check threshold exceeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import cascade as C
from . import checks
from .config import ConfigError, ExperimentConfig, build_config, write_config_file
from .imaging import Dataset, dataset_mean_color, load_dataset, save_dataset, save_png, synth_dataset
from .latents import format_report_text
from .masking import load_mask_png, save_mask_png, coverage, apply_mask
from .nn.checkpoint import write_checkpoint
from .nn.train import train_context_encoder
from .nn import network as N
from .protocol import load_model, run_nsd_evaluation


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are exit code 1, not argparse's 2
        raise ConfigError(message)


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output directory (default: config out_dir)")
    p.add_argument("--threads", type=int, help="worker cap; 1 guarantees bit-reproducibility")


def _resolve(args, **extra) -> ExperimentConfig:
    overrides = {"threads": getattr(args, "threads", None), "out_dir": getattr(args, "out", None)}
    overrides.update(extra)
    return build_config(args.config, overrides)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(path) -> Dataset:
    if not path:
        raise ConfigError("a dataset directory is required (--data)")
    if not (Path(path) / "manifest.json").exists():
        raise ConfigError(f"no dataset manifest under {path}")
    return load_dataset(path)


def cmd_gen_data(args) -> int:
    cfg = _resolve(
        args,
        synth_count=args.count,
        synth_size=args.size,
        synth_val_count=args.val_count,
        data_seed=args.seed,
    )
    out = _out_dir(cfg)
    dataset = synth_dataset(cfg.synth_count, cfg.synth_size, cfg.data_seed,
                            val_count=cfg.synth_val_count)
    save_dataset(dataset, out)
    write_config_file(cfg, out / "gen_data_config.txt")
    print(f"wrote {len(dataset.train)} train / {len(dataset.val)} val images to {out}")
    return 0


def _parse_stages(text: str) -> list[str]:
    stages = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in stages if s not in ("1", "2", "single")]
    if bad or not stages:
        raise ConfigError(f"--stages takes a comma list from 1,2,single; got {text!r}")
    return stages


def cmd_train(args) -> int:
    cfg = _resolve(
        args,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        train_seed=args.seed,
        mask_strategy=args.mask_strategy,
        adversarial_enabled=True if args.adversarial else None,
    )
    dataset = _load_data(args.data)
    cfg.image_size = dataset.size
    stages = _parse_stages(args.stages)
    out = _out_dir(cfg)
    write_config_file(cfg, out / "train_config.txt")
    size = dataset.size
    fill = dataset_mean_color(dataset)
    sampler = cfg.sampler(size, size)
    tc = cfg.train_config()
    channels = tuple(cfg.channels)
    disc_channels = tuple(cfg.disc_channels)
    extra = {
        "normalization": {"scale": 127.5, "offset": -1.0},
        "mask_strategy": cfg.mask_strategy,
        "fill": [float(v) for v in np.atleast_1d(fill)],
    }

    stage1_path = Path(args.stage1_ckpt) if args.stage1_ckpt else out / "stage1.cepk"
    if "1" in stages:
        result = C.train_stage1(dataset.train, tc, sampler, fill,
                                channels=channels, disc_channels=disc_channels,
                                log_path=out / "stage1_log.jsonl")
        stage1_path = out / "stage1.cepk"
        write_checkpoint(stage1_path, result.spec, result.params,
                         config=tc.to_dict(), seed=tc.seed, extra=extra)
        print(f"stage-1 checkpoint: {stage1_path}")
    if "2" in stages:
        if not stage1_path.exists():
            raise ConfigError(f"stage-2 needs a stage-1 checkpoint; none at {stage1_path}")
        model = C.train_stage2(stage1_path, dataset.train, tc, sampler, fill,
                               channels=channels, disc_channels=disc_channels,
                               log_path=out / "stage2_log.jsonl")
        model.manifest.update({"mask_strategy": cfg.mask_strategy, "fill": extra["fill"]})
        C.save_cascade_checkpoint(out / "cascade", stage1_path, model, cfg=tc)
        print(f"cascade checkpoint: {out / 'cascade'}")
    if "single" in stages:
        spec = N.context_encoder_spec(size, channels=channels)
        disc_spec = N.discriminator_spec(size, channels=disc_channels) if tc.adversarial_enabled else None
        result = train_context_encoder(dataset.train, spec, tc, sampler, fill,
                                       disc_spec=disc_spec,
                                       log_path=out / "single_log.jsonl")
        write_checkpoint(out / "single.cepk", result.spec, result.params,
                         config=tc.to_dict(), seed=tc.seed, extra=extra)
        print(f"single-stage checkpoint: {out / 'single.cepk'}")
    return 0


def _parse_ckpt_args(items) -> list[tuple[str, str]]:
    pairs = []
    for item in items:
        if "=" in item:
            name, _, path = item.partition("=")
        else:
            name, path = Path(item).stem, item
        pairs.append((name, path))
    if len({name for name, _ in pairs}) != len(pairs):
        raise ConfigError("duplicate checkpoint names in --ckpt")
    return pairs


def cmd_eval_nsd(args) -> int:
    cfg = _resolve(
        args,
        eval_n=args.n,
        eval_k=args.k,
        eval_seed=args.seed,
        eval_mask_strategy=args.mask_strategy,
        standardize=True if args.standardize else None,
    )
    if args.from_latents:
        # rescore existing latent dumps instead of running encoders
        from .latents import load_evaluation
        from .metric import nsd_estimate

        out = _out_dir(cfg)
        write_config_file(cfg, out / "eval_config.txt")
        reports = {}
        for name, manifest in _parse_ckpt_args(args.from_latents):
            sets = load_evaluation(manifest)
            reports[name] = nsd_estimate(sets, sets[0].dim,
                                         mask_strategy=cfg.eval_mask_strategy)
        text = format_report_text(reports)
        (out / "report.txt").write_text(text, encoding="utf-8")
        print(text, end="")
        return 0
    dataset = _load_data(args.data)
    cfg.image_size = dataset.size
    if not args.ckpt:
        raise ConfigError("at least one --ckpt NAME=PATH is required")
    models = [load_model(name, path) for name, path in _parse_ckpt_args(args.ckpt)]
    out = _out_dir(cfg)
    write_config_file(cfg, out / "eval_config.txt")
    fill = dataset_mean_color(dataset)
    reports = run_nsd_evaluation(models, dataset, cfg, fill, out_dir=out)
    print(format_report_text(reports), end="")  # report.txt written by the run
    return 0


def cmd_inpaint(args) -> int:
    cfg = _resolve(args, eval_seed=args.seed, mask_strategy=args.mask_strategy)
    dataset = _load_data(args.data)
    cfg.image_size = dataset.size
    model = load_model("model", args.ckpt)
    out = _out_dir(cfg)
    write_config_file(cfg, out / "inpaint_config.txt")
    fill = dataset_mean_color(dataset)
    pool = dataset.split(args.split)
    count = min(args.count, len(pool))
    rng = np.random.default_rng(cfg.eval_seed)
    sampler = cfg.sampler(dataset.size, dataset.size)
    for i in range(count):
        image = pool[i]
        mask = load_mask_png(args.mask_png) if args.mask_png else sampler(rng)
        if model.kind == "cascade":
            handle = model.cascade
            coarse_col, _ = C.cascade_fill(handle, image, mask, fill)
            final = C.inpaint(handle, image, mask, fill)
        else:
            handle = model.single
            final = C.inpaint(handle, image, mask, fill)
            coarse_col = final
        masked = apply_mask(image, mask, fill)
        panel = np.concatenate([image, masked, coarse_col, final], axis=2)
        save_png(panel, out / f"{args.split}_{i:04d}_panel.png")
    print(f"wrote {count} comparison panels to {out}")
    return 0


def cmd_grad_check(args) -> int:
    threshold = args.threshold
    errors = checks.run_all_checks(eps=args.eps, seed=args.seed)
    worst = 0.0
    for name, err in errors.items():
        status = "ok" if err <= threshold else "FAIL"
        print(f"{name:28s} max_rel_err = {err:.3e}  [{status}]")
        worst = max(worst, err)
    print(f"worst component error: {worst:.3e} (threshold {threshold:.1e})")
    return 0 if worst <= threshold else 3


def cmd_mask_preview(args) -> int:
    cfg = _resolve(args, mask_strategy=args.strategy, eval_seed=args.seed)
    out = _out_dir(cfg)
    write_config_file(cfg, out / "mask_preview_config.txt")
    size = args.size or cfg.image_size
    sampler = cfg.sampler(size, size)
    rng = np.random.default_rng(cfg.eval_seed)
    for i in range(args.count):
        mask = sampler(rng)
        path = out / f"mask_{i:03d}.png"
        save_mask_png(mask, path)
        print(f"{path}  coverage = {coverage(mask):.4f}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="inpaintkit",
                     description="cascade context encoders and latent-distortion evaluation")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("gen-data", parents=[], help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--count", type=int, help="total image count")
    p.add_argument("--size", type=int, help="square image size (even)")
    p.add_argument("--val-count", type=int, dest="val_count", help="held-out image count")
    p.add_argument("--seed", type=int, help="generator seed")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train stage-1 / cascade / single-stage models")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--stages", default="1", help="comma list from: 1, 2, single")
    p.add_argument("--stage1-ckpt", dest="stage1_ckpt",
                   help="existing stage-1 checkpoint (when training stage 2 alone)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--mask-strategy", dest="mask_strategy", choices=["central", "random_blocks"])
    p.add_argument("--adversarial", action="store_true", help="enable the adversarial loss")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-nsd", help="normalized squared-distortion over checkpoints")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--ckpt", action="append", default=[],
                   help="NAME=PATH; repeat to compare models side by side")
    p.add_argument("--from-latents", dest="from_latents", action="append", default=[],
                   help="NAME=MANIFEST; rescore existing latent dumps instead")
    p.add_argument("--n", type=int, help="masks per image")
    p.add_argument("--k", type=int, help="images")
    p.add_argument("--seed", type=int)
    p.add_argument("--mask-strategy", dest="mask_strategy", choices=["central", "random_blocks"])
    p.add_argument("--standardize", action="store_true",
                   help="standardize pooled latents before scoring")
    p.set_defaults(func=cmd_eval_nsd)

    p = sub.add_parser("inpaint", help="write original|masked|fill|result panels")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True, help="single checkpoint file or cascade directory")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--split", default="val", choices=["train", "val"])
    p.add_argument("--seed", type=int)
    p.add_argument("--mask-strategy", dest="mask_strategy", choices=["central", "random_blocks"])
    p.add_argument("--mask-png", dest="mask_png", help="use one fixed mask PNG for all images")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("grad-check", help="finite-difference audit of every backward pass")
    p.add_argument("--eps", type=float, default=checks.DEFAULT_EPS)
    p.add_argument("--threshold", type=float, default=checks.DEFAULT_THRESHOLD)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("mask-preview", help="write mask PNGs for inspection")
    _add_common(p)
    p.add_argument("--strategy", choices=["central", "random_blocks"])
    p.add_argument("--size", type=int)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_mask_preview)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return 1
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

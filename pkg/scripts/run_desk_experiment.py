#!/usr/bin/env python3
"""End-to-end desk-scale experiment.

Generates a synthetic dataset, trains the half-resolution stage, the cascade,
and a single-stage baseline, scores both models with the normalized
squared-distortion protocol, and writes inpainting comparison panels.
Everything goes through the CLI so each step leaves its resolved config next
to its outputs.
"""

import argparse
import sys
from pathlib import Path

from inpaintkit.cli import main as cli


def run(args):
    root = Path(args.out)
    data = root / "data"
    models = root / "models"
    steps = [
        ["gen-data", "--out", str(data), "--count", str(args.count),
         "--size", str(args.size), "--val-count", str(args.val_count),
         "--seed", str(args.seed)],
        ["train", "--data", str(data), "--out", str(models),
         "--stages", "1,2,single", "--epochs", str(args.epochs),
         "--seed", str(args.seed), "--mask-strategy", args.mask_strategy],
        ["eval-nsd", "--data", str(data),
         "--ckpt", f"cascade={models / 'cascade'}",
         "--ckpt", f"single={models / 'single.cepk'}",
         "--n", str(args.n), "--k", str(args.k), "--seed", str(args.seed),
         "--threads", "1", "--out", str(root / "nsd")],
        ["inpaint", "--data", str(data), "--ckpt", str(models / "cascade"),
         "--count", "8", "--seed", str(args.seed), "--out", str(root / "panels")],
        ["grad-check"],
    ]
    for step in steps:
        print(f"\n==> inpaintkit {' '.join(step)}")
        code = cli(step)
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    print(f"\nall outputs under {root}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk")
    parser.add_argument("--count", type=int, default=576)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--val-count", type=int, default=64, dest="val_count")
    parser.add_argument("--epochs", type=int, default=25)
    parser.add_argument("--mask-strategy", default="central",
                        choices=["central", "random_blocks"], dest="mask_strategy")
    parser.add_argument("--n", type=int, default=100, help="masks per image in the NSD protocol")
    parser.add_argument("--k", type=int, default=32, help="images in the NSD protocol")
    parser.add_argument("--seed", type=int, default=0)
    sys.exit(run(parser.parse_args()))

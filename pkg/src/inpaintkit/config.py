"""Experiment configuration: one flat, typed key = value file per run.

Resolution order is CLI flag > config file > built-in default. Every command
writes its fully-resolved config next to its outputs so a run can be
reproduced from that single artifact.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, asdict
from pathlib import Path

from .masking import make_sampler
from .nn.train import TrainConfig

ENV_OUT_ROOT = "INPAINTKIT_OUT_ROOT"


class ConfigError(Exception):
    """Bad configuration or usage; maps to exit code 1."""


def default_out_root() -> str:
    return os.environ.get(ENV_OUT_ROOT, "runs")


@dataclass
class ExperimentConfig:
    # data
    data_dir: str = ""
    synth_count: int = 576
    synth_size: int = 32
    synth_val_count: int = 64
    data_seed: int = 0
    # model
    image_size: int = 32
    channels: list = None           # conv widths, default (16, 32, 64)
    disc_channels: list = None
    # masks (training/inpainting use mask_strategy; the distortion protocol
    # needs mask variation per image, so it has its own default)
    mask_strategy: str = "central"  # central | random_blocks
    eval_mask_strategy: str = "random_blocks"
    mask_fraction: float = 0.25
    blocks_max_coverage: float = 0.25
    blocks_side_min: int = 4
    blocks_side_max: int = 8
    # training
    lambda_rec: float = 0.999
    lambda_adv: float = 0.001
    adversarial_enabled: bool = False
    learning_rate: float = 2e-3
    batch_size: int = 32
    epochs: int = 10
    train_seed: int = 0
    # evaluation protocol
    eval_n: int = 100
    eval_k: int = 250
    eval_seed: int = 0
    standardize: bool = False
    # execution
    threads: int = 1
    out_dir: str = ""

    def __post_init__(self):
        if self.channels is None:
            self.channels = [16, 32, 64]
        if self.disc_channels is None:
            self.disc_channels = [16, 32, 64]
        if isinstance(self.channels, int):
            self.channels = [self.channels]
        if isinstance(self.disc_channels, int):
            self.disc_channels = [self.disc_channels]
        if not self.out_dir:
            self.out_dir = default_out_root()

    def validate(self) -> None:
        if self.mask_strategy not in ("central", "random_blocks"):
            raise ConfigError(f"unknown mask_strategy {self.mask_strategy!r}")
        if self.eval_mask_strategy not in ("central", "random_blocks"):
            raise ConfigError(f"unknown eval_mask_strategy {self.eval_mask_strategy!r}")
        if self.eval_n < 2:
            raise ConfigError(f"eval_n must be >= 2, got {self.eval_n}")
        if self.eval_k < 1:
            raise ConfigError(f"eval_k must be >= 1, got {self.eval_k}")
        if self.synth_size % 2:
            raise ConfigError(f"synth_size must be even, got {self.synth_size}")
        if self.image_size % 2:
            raise ConfigError(f"image_size must be even, got {self.image_size}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        try:
            self.train_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self, epochs: int | None = None, seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            lambda_rec=self.lambda_rec,
            lambda_adv=self.lambda_adv if self.adversarial_enabled else 0.0,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs if epochs is None else epochs,
            seed=self.train_seed if seed is None else seed,
            adversarial_enabled=self.adversarial_enabled,
        )

    def sampler(self, height: int, width: int, strategy: str | None = None):
        return make_sampler(
            self.mask_strategy if strategy is None else strategy,
            height,
            width,
            fraction=self.mask_fraction,
            max_coverage=self.blocks_max_coverage,
            side_range=(self.blocks_side_min, self.blocks_side_max),
        )

    def eval_sampler(self, height: int, width: int):
        return self.sampler(height, width, strategy=self.eval_mask_strategy)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _parse_scalar(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_value(text: str):
    if "," in text:
        return [_parse_scalar(part) for part in text.split(",")]
    return _parse_scalar(text)


def read_config_file(path) -> dict:
    """Flat `key = value` lines; '#' starts a comment; values are typed."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = parse_value(val)
    return values


def write_config_file(cfg: ExperimentConfig, path) -> None:
    lines = ["# inpaintkit resolved configuration"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_config(file_path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the config file, then CLI overrides (None values skipped)."""
    cfg = ExperimentConfig()
    known = {f.name for f in fields(cfg)}
    if file_path:
        if not Path(file_path).exists():
            raise ConfigError(f"config file not found: {file_path}")
        for key, value in read_config_file(file_path).items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r} in {file_path}")
            setattr(cfg, key, value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown config override {key!r}")
        setattr(cfg, key, value)
    cfg.__post_init__()
    cfg.validate()
    return cfg


def config_as_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)

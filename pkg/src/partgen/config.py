"""Training configuration, dataset presets, and flat config-file I/O."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

# Per-dataset loss weights used for the published runs.
PENALTY_COEFFICIENTS = {
    # dataset: (lambda_con, lambda_area)
    "celeba-wild": (10.0, 1.0),
    "taichi": (30.0, 1.0),
    "cub": (10.0, 1.0),
    "flower": (30.0, 1.0),
}

# Concentration weight scales linearly with the part count: lambda_con = C_con * K.
CON_COEFFICIENT = {
    "celeba-wild": 1.25,
    "taichi": 3.0,
    "cub": 1.25,
    "flower": 3.75,
}

# Mean part scale of trained models, used by the fixed-scale ablation.
FIXED_SIGMA = {
    "celeba-wild": 0.00725,
    "taichi": 0.010,
    "cub": 0.0016,
    "flower": 0.0065,
}

# Datasets where the background position is sampled along the horizontal axis only.
HORIZONTAL_BG_DATASETS = ("taichi",)

MIN_RECOMMENDED_DATASET = 5000

_ACTIVATIONS = ("leaky_relu", "relu", "gelu")
_BG_POS_MODES = ("full", "horizontal")
_UPSAMPLE_MODES = ("bilinear", "nearest")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


def lambda_con_for_parts(c_con: float, k_parts: int) -> float:
    """Concentration weight as a function of the part count."""
    return c_con * k_parts


@dataclass
class TrainConfig:
    """All knobs for the generator/discriminator training run.

    Defaults reproduce the published full-scale setup; toy runs override
    the resolution schedule and widths.
    """

    # architecture
    k_parts: int = 8
    n_per: int = 4
    d_noise: int = 256
    d_emb: int = 256
    resolutions: tuple[int, ...] = (32, 32, 64, 128)
    margin_px: int = 10
    mask_channels: tuple[int, ...] = (256, 128, 64, 32)
    fg_channels: tuple[int, ...] | None = None  # default: mask widths with last = d_emb
    bg_channels: tuple[int, ...] | None = None
    composite_hidden: int = 64
    disc_base_channels: int = 64
    disc_max_channels: int = 512
    activation: str = "leaky_relu"
    upsample_mode: str = "bilinear"
    sigma_floor: float = 1e-3
    sigma_as_sample_std: bool = False  # alternate reading of the scale formula
    freq_scale: float = 1.0

    # losses
    lambda_gp: float = 10.0
    lambda_con: float | None = None  # None -> c_con * k_parts
    lambda_area: float = 1.0
    c_con: float = 1.25

    # optimization
    lr_g: float = 1e-4
    lr_d: float = 4e-4
    beta1: float = 0.5
    beta2: float = 0.9
    batch_size: int = 16
    total_g_updates: int = 30000
    d_steps_per_g: int = 1
    seed: int = 0

    # ablations
    disable_points: bool = False
    merged_background: bool = False
    fixed_sigma: float | None = None
    disable_con_loss: bool = False
    disable_area_loss: bool = False
    bg_pos_mode: str = "full"

    # run bookkeeping
    checkpoint_every: int = 2000
    sample_every: int = 1000

    def __post_init__(self) -> None:
        self.resolutions = tuple(int(r) for r in self.resolutions)
        self.mask_channels = tuple(int(c) for c in self.mask_channels)
        if self.fg_channels is not None:
            self.fg_channels = tuple(int(c) for c in self.fg_channels)
        if self.bg_channels is not None:
            self.bg_channels = tuple(int(c) for c in self.bg_channels)
        self.validate()

    def validate(self) -> None:
        if self.k_parts < 1:
            raise ConfigError("k_parts must be >= 1")
        if self.n_per < 2:
            raise ConfigError("n_per must be >= 2")
        if self.n_per <= 3:
            warnings.warn(
                f"n_per={self.n_per} is prone to collapse; 4 or more is recommended",
                stacklevel=2,
            )
        if self.d_emb % 2 != 0:
            raise ConfigError("d_emb must be even (sin/cos halves)")
        for name in ("lambda_gp", "lambda_area", "c_con"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.lambda_con is not None and self.lambda_con < 0:
            raise ConfigError("lambda_con must be >= 0")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ConfigError("learning rates must be positive")
        if len(self.resolutions) < 1 or any(r < 2 for r in self.resolutions):
            raise ConfigError("resolutions must be a non-empty tuple of sizes >= 2")
        for a, b in zip(self.resolutions, self.resolutions[1:]):
            if b not in (a, 2 * a):
                raise ConfigError("each resolution must repeat or double the previous one")
        if self.margin_px < 0:
            raise ConfigError("margin_px must be >= 0")
        if len(self.mask_channels) != len(self.resolutions):
            raise ConfigError("mask_channels must have one width per resolution")
        for name in ("fg_channels", "bg_channels"):
            widths = getattr(self, name)
            if widths is not None and len(widths) != len(self.resolutions):
                raise ConfigError(f"{name} must have one width per resolution")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"activation must be one of {_ACTIVATIONS}")
        if self.upsample_mode not in _UPSAMPLE_MODES:
            raise ConfigError(f"upsample_mode must be one of {_UPSAMPLE_MODES}")
        if self.bg_pos_mode not in _BG_POS_MODES:
            raise ConfigError(f"bg_pos_mode must be one of {_BG_POS_MODES}")
        if self.fixed_sigma is not None:
            if self.fixed_sigma <= 0:
                raise ConfigError("fixed_sigma must be positive")
            if self.disable_points:
                raise ConfigError("fixed_sigma has no effect when points are disabled")
        if self.sigma_floor <= 0:
            raise ConfigError("sigma_floor must be positive")
        if self.batch_size < 1 or self.total_g_updates < 0:
            raise ConfigError("batch_size must be >= 1 and total_g_updates >= 0")
        if self.d_steps_per_g < 1:
            raise ConfigError("d_steps_per_g must be >= 1")

    @property
    def lambda_con_effective(self) -> float:
        if self.lambda_con is not None:
            return self.lambda_con
        return lambda_con_for_parts(self.c_con, self.k_parts)

    @property
    def final_resolution(self) -> int:
        return self.resolutions[-1]

    def fg_channels_effective(self) -> tuple[int, ...]:
        # Foreground/background feature widths end at d_emb so the blend is a
        # plain per-pixel sum of same-width maps.
        if self.fg_channels is not None:
            return self.fg_channels
        return self.mask_channels[:-1] + (self.d_emb,)

    def bg_channels_effective(self) -> tuple[int, ...]:
        if self.bg_channels is not None:
            return self.bg_channels
        return self.fg_channels_effective()

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("resolutions", "mask_channels", "fg_channels", "bg_channels"):
            if out[key] is not None:
                out[key] = list(out[key])
        return out

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = set(cls.field_names())
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**values)


def preset(dataset: str, **overrides) -> TrainConfig:
    """Config preset for one of the published dataset rows."""
    if dataset not in PENALTY_COEFFICIENTS:
        raise ConfigError(f"unknown dataset preset: {dataset!r}")
    values = {
        "c_con": CON_COEFFICIENT[dataset],
        "lambda_area": PENALTY_COEFFICIENTS[dataset][1],
        "bg_pos_mode": "horizontal" if dataset in HORIZONTAL_BG_DATASETS else "full",
    }
    values.update(overrides)
    return TrainConfig(**values)


def load_config(path: str | Path, overrides: dict | None = None) -> TrainConfig:
    """Load a flat key-value config file, then apply overrides."""
    with open(path) as fh:
        values = yaml.safe_load(fh) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a flat key-value mapping")
    if overrides:
        values.update(overrides)
    return TrainConfig.from_dict(values)


def save_config(config: TrainConfig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)

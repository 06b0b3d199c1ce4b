"""Level 1 of the hierarchy: noise to grouped 2D points, part statistics,
and part appearance embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .config import ConfigError


@dataclass
class LatentBundle:
    """The four independent noise sources for a batch of samples."""

    z_point: torch.Tensor  # (B, d_noise), standard normal
    z_app: torch.Tensor  # (B, d_noise), standard normal
    z_bg_app: torch.Tensor  # (B, d_noise), standard normal
    u_bg_pos: torch.Tensor  # (B, 2) in [-1, 1]^2, (y, x)
    seed: int | None = None

    @property
    def batch_size(self) -> int:
        return self.z_point.shape[0]

    def to(self, device) -> "LatentBundle":
        return LatentBundle(
            z_point=self.z_point.to(device),
            z_app=self.z_app.to(device),
            z_bg_app=self.z_bg_app.to(device),
            u_bg_pos=self.u_bg_pos.to(device),
            seed=self.seed,
        )


def sample_latents(
    batch_size: int,
    d_noise: int,
    generator: torch.Generator | None = None,
    bg_pos_mode: str = "full",
    seed: int | None = None,
) -> LatentBundle:
    """Draw one latent bundle per sample.

    ``bg_pos_mode="horizontal"`` pins the vertical background position to the
    center and samples only the horizontal coordinate.
    """
    if seed is not None:
        generator = torch.Generator().manual_seed(seed)
    kw = {"generator": generator}
    z_point = torch.randn(batch_size, d_noise, **kw)
    z_app = torch.randn(batch_size, d_noise, **kw)
    z_bg_app = torch.randn(batch_size, d_noise, **kw)
    u = torch.rand(batch_size, 2, **kw) * 2.0 - 1.0
    if bg_pos_mode == "horizontal":
        u[:, 0] = 0.0
    elif bg_pos_mode != "full":
        raise ConfigError(f"unknown bg_pos_mode: {bg_pos_mode!r}")
    return LatentBundle(z_point=z_point, z_app=z_app, z_bg_app=z_bg_app, u_bg_pos=u, seed=seed)


@dataclass
class PartLayout:
    """Grouped latent points with derived per-part statistics and embeddings."""

    points: torch.Tensor  # (B, K, n_per, 2)
    centers: torch.Tensor  # (B, K, 2), group means
    scales: torch.Tensor  # (B, K), spread statistic, clamped below
    embeddings: torch.Tensor  # (B, K, d_emb) = dynamic * const
    const_embeddings: torch.Tensor  # (K, d_emb)
    dynamic_embedding: torch.Tensor  # (B, d_emb)

    @property
    def k_parts(self) -> int:
        return self.points.shape[1]

    @property
    def n_per(self) -> int:
        return self.points.shape[2]


def _make_activation(name: str) -> nn.Module:
    if name == "leaky_relu":
        return nn.LeakyReLU(0.2)
    if name == "relu":
        return nn.ReLU()
    if name == "gelu":
        return nn.GELU()
    raise ConfigError(f"unknown activation: {name!r}")


def make_mlp(
    in_dim: int, out_dim: int, hidden: int, n_layers: int = 3, activation: str = "leaky_relu"
) -> nn.Sequential:
    """Fully connected stack with activations between layers (none after the last)."""
    if n_layers < 1:
        raise ConfigError("MLP needs at least one layer")
    dims = [in_dim] + [hidden] * (n_layers - 1) + [out_dim]
    layers: list[nn.Module] = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        layers.append(nn.Linear(a, b))
        if i < n_layers - 1:
            layers.append(_make_activation(activation))
    return nn.Sequential(*layers)


class PointGenerator(nn.Module):
    """3-layer MLP mapping point noise to K groups of n_per 2D points."""

    def __init__(
        self,
        d_noise: int,
        k_parts: int,
        n_per: int,
        hidden: int | None = None,
        activation: str = "leaky_relu",
    ):
        super().__init__()
        if n_per < 2:
            raise ConfigError("n_per must be >= 2 for a meaningful spread statistic")
        self.k_parts = k_parts
        self.n_per = n_per
        self.mlp = make_mlp(
            d_noise, 2 * k_parts * n_per, hidden or d_noise, activation=activation
        )

    def forward(self, z_point: torch.Tensor) -> torch.Tensor:
        """(B, d_noise) -> (B, K, n_per, 2); deterministic in z_point."""
        out = self.mlp(z_point)
        return out.reshape(z_point.shape[0], self.k_parts, self.n_per, 2)


def part_stats(
    points: torch.Tensor,
    sigma_floor: float = 1e-3,
    as_sample_std: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-group center and spread of grouped points.

    centers[k] is the group mean. The default spread is
    sqrt(sum_i |x_i - center|^2) / (n_per - 1); ``as_sample_std`` selects the
    textbook sample standard deviation sqrt(sum / (n_per - 1)) instead.
    Scales are clamped below at ``sigma_floor`` (the clamp also keeps the
    sqrt gradient finite when a group collapses).
    """
    if points.shape[-2] < 2:
        raise ConfigError("part_stats requires n_per >= 2")
    n_per = points.shape[-2]
    centers = points.mean(dim=-2)
    sq_sum = (points - centers.unsqueeze(-2)).square().sum(dim=(-2, -1))
    if as_sample_std:
        floor_sq = sigma_floor**2 * (n_per - 1)
        scales = torch.sqrt(sq_sum.clamp_min(floor_sq) / (n_per - 1))
    else:
        floor_sq = (sigma_floor * (n_per - 1)) ** 2
        scales = torch.sqrt(sq_sum.clamp_min(floor_sq)) / (n_per - 1)
    return centers, scales


class AppearanceEncoder(nn.Module):
    """Shared dynamic appearance vector modulating per-part constant embeddings."""

    def __init__(
        self,
        d_noise: int,
        d_emb: int,
        k_parts: int,
        hidden: int | None = None,
        activation: str = "leaky_relu",
    ):
        super().__init__()
        self.mlp = make_mlp(d_noise, d_emb, hidden or d_noise, activation=activation)
        self.const_embeddings = nn.Parameter(torch.randn(k_parts, d_emb))

    def forward(self, z_app: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (dynamic (B, d_emb), per-part embeddings (B, K, d_emb))."""
        dynamic = self.mlp(z_app)
        embeddings = dynamic.unsqueeze(1) * self.const_embeddings.unsqueeze(0)
        return dynamic, embeddings

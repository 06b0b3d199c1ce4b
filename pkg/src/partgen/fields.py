"""Coordinate grids with margins, Gaussian part heatmaps, relative positional
encoding, and the upsample-then-crop discipline.

Conventions used throughout the package:

* Normalized coordinates are (y, x) pairs. The interior of a grid tiles
  [-1, 1]^2 exactly; pixel (i, j) sits at the cell center.
* A margin of ``m`` pixels extends the grid on every side, so an
  ``H0 x W0`` interior becomes an ``(H0+2m) x (W0+2m)`` grid whose outer
  cell edges reach ``1 + 2m/H0`` (vertically) and ``1 + 2m/W0``
  (horizontally).
* Every field here reads positions only through differences ``p - x``,
  never through absolute coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .config import ConfigError


@dataclass(frozen=True)
class MarginGrid:
    """Uniform coordinate grid with a fixed pixel margin around the interior."""

    interior_h: int
    interior_w: int
    margin_px: int
    coords: torch.Tensor  # (H0+2m, W0+2m, 2), entries (y, x)

    @property
    def grid_h(self) -> int:
        return self.interior_h + 2 * self.margin_px

    @property
    def grid_w(self) -> int:
        return self.interior_w + 2 * self.margin_px

    @property
    def pitch(self) -> tuple[float, float]:
        """Pixel spacing (dy, dx) in normalized units."""
        return 2.0 / self.interior_h, 2.0 / self.interior_w

    @property
    def span(self) -> tuple[float, float]:
        """Outer cell-edge extent (vertical, horizontal); interior edges are at 1."""
        return (
            1.0 + 2.0 * self.margin_px / self.interior_h,
            1.0 + 2.0 * self.margin_px / self.interior_w,
        )

    def interior_slice(self) -> tuple[slice, slice]:
        m = self.margin_px
        return slice(m, m + self.interior_h), slice(m, m + self.interior_w)

    def interior_coords(self) -> torch.Tensor:
        si, sj = self.interior_slice()
        return self.coords[si, sj]


def make_margin_grid(
    interior: tuple[int, int],
    margin_px: int,
    dtype: torch.dtype = torch.float32,
    device=None,
) -> MarginGrid:
    """Build the cell-center coordinate grid for an interior plus margin.

    The interior rows/columns are computed with the same arithmetic as a
    margin-free grid, so the central block matches it bit-exactly.
    """
    h0, w0 = int(interior[0]), int(interior[1])
    if h0 < 1 or w0 < 1:
        raise ConfigError(f"grid interior must be positive, got {interior}")
    if margin_px < 0:
        raise ConfigError("margin_px must be >= 0")
    # Index relative to the interior origin: cell center (2i+1)/H - 1.
    iy = torch.arange(-margin_px, h0 + margin_px, dtype=dtype, device=device)
    ix = torch.arange(-margin_px, w0 + margin_px, dtype=dtype, device=device)
    ys = (2.0 * iy + 1.0) / h0 - 1.0
    xs = (2.0 * ix + 1.0) / w0 - 1.0
    yy, xx = torch.meshgrid(ys, xs, indexing="ij")
    coords = torch.stack([yy, xx], dim=-1)
    return MarginGrid(interior_h=h0, interior_w=w0, margin_px=margin_px, coords=coords)


@dataclass(frozen=True)
class HeatmapStack:
    """Per-part Gaussian fields evaluated on a grid, with their generators."""

    values: torch.Tensor  # (B, K, grid_h, grid_w), entries in (0, 1]
    centers: torch.Tensor  # (B, K, 2)
    scales: torch.Tensor  # (B, K)


def gaussian_heatmaps(
    grid: MarginGrid, centers: torch.Tensor, scales: torch.Tensor
) -> HeatmapStack:
    """Sharpened Gaussian bump per part: exp(-|p - x_k|^2 / sigma_k^2).

    The denominator is sigma^2 (not 2 sigma^2), which halves the effective
    width. Evaluated at every grid cell, margins included.
    """
    if centers.dim() == 2:  # allow unbatched (K, 2)
        centers = centers.unsqueeze(0)
        scales = scales.unsqueeze(0)
    coords = grid.coords.to(centers.dtype)
    diff = coords.unsqueeze(0).unsqueeze(0) - centers[:, :, None, None, :]
    sq_dist = diff.square().sum(dim=-1)
    values = torch.exp(-sq_dist / scales[:, :, None, None].square())
    return HeatmapStack(values=values, centers=centers, scales=scales)


class PositionalEncoder(nn.Module):
    """Low-frequency sin/cos features of linearly projected pixel-point offsets.

    At each pixel p the input is the concatenation of (p - x_i) over all
    reference points, mapped through a single linear projection (no bias,
    no activation); the output stacks sin(pi * proj) and cos(pi * proj).
    Absolute position enters only through the differences.
    """

    def __init__(self, n_points: int, out_dim: int, freq_scale: float = 1.0):
        super().__init__()
        if out_dim % 2 != 0:
            raise ConfigError("positional encoding out_dim must be even")
        self.n_points = n_points
        self.out_dim = out_dim
        self.proj = nn.Linear(2 * n_points, out_dim // 2, bias=False)
        if freq_scale != 1.0:
            with torch.no_grad():
                self.proj.weight.mul_(freq_scale)

    def forward(self, grid: MarginGrid, points: torch.Tensor) -> torch.Tensor:
        """points: (B, n_points, 2) -> features (B, out_dim, grid_h, grid_w)."""
        if points.dim() == 2:
            points = points.unsqueeze(0)
        if points.shape[1] != self.n_points:
            raise ValueError(
                f"expected {self.n_points} reference points, got {points.shape[1]}"
            )
        coords = grid.coords.to(points.dtype)
        # (B, H, W, n_points, 2) -> (B, H, W, 2*n_points)
        diff = coords[None, :, :, None, :] - points[:, None, None, :, :]
        diff = diff.reshape(points.shape[0], grid.grid_h, grid.grid_w, -1)
        phase = torch.pi * self.proj(diff)
        feats = torch.cat([torch.sin(phase), torch.cos(phase)], dim=-1)
        return feats.permute(0, 3, 1, 2)


def upsample_and_crop(
    feature: torch.Tensor, margin_px: int, mode: str = "bilinear"
) -> torch.Tensor:
    """Double the resolution, then crop back to the fixed pixel margin.

    Input carries ``margin_px`` around an H x W interior. Upsampling doubles
    both interior and margin; cropping ``margin_px`` per side restores the
    margin around the now 2H x 2W interior. Boundary effects introduced by
    padded convolutions thus stay confined to the (discarded) outer band.
    """
    if feature.dim() != 4:
        raise ValueError("expected (B, C, H, W) feature map")
    h, w = feature.shape[-2], feature.shape[-1]
    if h <= 2 * margin_px or w <= 2 * margin_px:
        raise ValueError(
            f"feature {h}x{w} has no interior for margin {margin_px}"
        )
    if mode == "bilinear":
        up = F.interpolate(feature, scale_factor=2, mode="bilinear", align_corners=False)
    elif mode == "nearest":
        up = F.interpolate(feature, scale_factor=2, mode="nearest")
    else:
        raise ConfigError(f"unsupported upsample mode: {mode!r}")
    if margin_px == 0:
        return up
    m = margin_px
    return up[:, :, m:-m, m:-m]


def crop_margin(feature: torch.Tensor, margin_px: int) -> torch.Tensor:
    """Strip the margin band, leaving the interior block."""
    if margin_px == 0:
        return feature
    m = margin_px
    return feature[..., m:-m, m:-m]

"""Convolutional building blocks on periodic lattices (2D or 3D)."""
from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

_CONV = {2: F.conv2d, 3: F.conv3d}
_BATCH_NORM = {2: nn.BatchNorm2d, 3: nn.BatchNorm3d}

LEAKY_SLOPE = 0.01


def conv_periodic(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None = None) -> torch.Tensor:
    """Cross-correlation with wrap-around padding; spatial extent is preserved.

    ``x`` is (B, C, L, ..., L) with 2 or 3 spatial axes, ``weight`` is
    (C_out, C, k, ..., k) with odd k.
    """
    dim = weight.ndim - 2
    if dim not in _CONV:
        raise ValueError(f"expected a 2D or 3D kernel, got weight of shape {tuple(weight.shape)}")
    if x.ndim != dim + 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"input {tuple(x.shape)} does not match kernel {tuple(weight.shape)}")
    k = weight.shape[-1]
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    pad = k // 2
    if pad:
        x = F.pad(x, (pad,) * (2 * dim), mode="circular")
    return _CONV[dim](x, weight, bias)


def conv3d_periodic(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None = None) -> torch.Tensor:
    if weight.ndim != 5:
        raise ValueError(f"conv3d_periodic needs a 5-D kernel, got {tuple(weight.shape)}")
    return conv_periodic(x, weight, bias)


def kaiming_init(
    shape: tuple[int, ...],
    generator: torch.Generator | None = None,
    negative_slope: float = LEAKY_SLOPE,
) -> torch.Tensor:
    """Zero-mean normal weights with variance 2 / ((1 + a**2) fan_in)."""
    weight = torch.empty(shape)
    nn.init.kaiming_normal_(weight, a=negative_slope, nonlinearity="leaky_relu", generator=generator)
    return weight


class PeriodicConv(nn.Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3, dim: int = 3):
        super().__init__()
        self.weight = nn.Parameter(kaiming_init((out_channels, in_channels) + (kernel_size,) * dim))
        self.bias = nn.Parameter(torch.zeros(out_channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv_periodic(x, self.weight, self.bias)


class AttentionAugmentedConv(nn.Module):
    """Periodic convolution features concatenated with self-attention features.

    Attention runs over lattice positions without positional embeddings, so
    the layer stays translation equivariant and works for any L.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        dim: int = 3,
        heads: int = 2,
        attention_channels: int | None = None,
    ):
        super().__init__()
        dv = attention_channels or max(heads, (out_channels // 4) // heads * heads)
        if dv % heads or dv >= out_channels:
            raise ValueError(f"attention channels {dv} must be a multiple of {heads} and below {out_channels}")
        self.conv = PeriodicConv(in_channels, out_channels - dv, kernel_size, dim)
        self.embed = nn.Linear(in_channels, dv)
        self.attention = nn.MultiheadAttention(dv, heads, batch_first=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        spatial = x.shape[2:]
        tokens = self.embed(x.flatten(2).transpose(1, 2))
        attended, _ = self.attention(tokens, tokens, tokens, need_weights=False)
        attended = attended.transpose(1, 2).reshape(x.shape[0], -1, *spatial)
        return torch.cat([self.conv(x), attended], dim=1)


class WideResBlock(nn.Module):
    """Projection path plus ``depth`` stacked conv -> batch norm -> GELU stages."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        depth: int = 3,
        kernel_size: int = 3,
        dim: int = 3,
        attention: bool = False,
    ):
        super().__init__()
        if in_channels == out_channels:
            self.projection: nn.Module = nn.Identity()
        else:
            self.projection = PeriodicConv(in_channels, out_channels, 1, dim)

        stages: list[nn.Module] = []
        for i in range(depth):
            c_in = in_channels if i == 0 else out_channels
            if i == 0 and attention:
                conv: nn.Module = AttentionAugmentedConv(c_in, out_channels, kernel_size, dim)
            else:
                conv = PeriodicConv(c_in, out_channels, kernel_size, dim)
            stages += [conv, _BATCH_NORM[dim](out_channels, momentum=0.1), nn.GELU()]
        self.stages = nn.Sequential(*stages)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.projection(x) + self.stages(x)

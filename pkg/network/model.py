"""
Fully convolutional decoder network and its pooled wrapper.

ToricDecoderNet maps syndrome channels (B, channels, L, ..., L) to per-position
class logits (B, L**dim, classes). PooledDecoder applies a per-position softmax
and one of the pooling heads, giving one class distribution per syndrome.
Nothing in the network depends on L, so a trained net can be re-attached to a
code of another lattice size with ``with_code``.
"""
from __future__ import annotations

import logging
from typing import Literal

import torch
from pydantic import BaseModel, Field, field_validator
from torch import nn

from network.heads import build_head
from network.layers import AttentionAugmentedConv, PeriodicConv, WideResBlock
from qec.code import ToricCode
from qec.noise import channel_count

logger = logging.getLogger(__name__)

POOLED_EPS = 1e-9


class NetworkSpec(BaseModel):
    dim: Literal[2, 3] = 3
    channels: tuple[int, ...] = Field(default=(32, 16, 16), min_length=1)
    depth: int = Field(default=3, ge=1)
    kernel_size: int = Field(default=3, ge=1)
    attention: bool = False
    head: Literal["gap", "gapt"] = "gapt"

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"kernel size must be odd, got {v}")
        return v

    @field_validator("channels")
    @classmethod
    def _positive_channels(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(c <= 0 for c in v):
            raise ValueError(f"block channels must be positive, got {v}")
        return v

    @property
    def in_channels(self) -> int:
        return channel_count(self.dim)

    @property
    def n_classes(self) -> int:
        return 2 ** (2 * self.dim)


# Block widths used for the full-size experiments
FULL_SIZE_CHANNELS = (128, 64, 64)


class ToricDecoderNet(nn.Module):
    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        blocks: list[nn.Module] = []
        c_in = spec.in_channels
        for i, c_out in enumerate(spec.channels):
            blocks.append(WideResBlock(
                c_in, c_out,
                depth=spec.depth,
                kernel_size=spec.kernel_size,
                dim=spec.dim,
                attention=spec.attention and i == 0,
            ))
            c_in = c_out
        self.blocks = nn.Sequential(*blocks)
        if spec.attention:
            self.classifier: nn.Module = AttentionAugmentedConv(c_in, spec.n_classes, 1, spec.dim)
        else:
            self.classifier = PeriodicConv(c_in, spec.n_classes, 1, spec.dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        logits = self.classifier(self.blocks(x))
        return logits.flatten(2).transpose(1, 2)


class PooledDecoder(nn.Module):
    """Network plus pooling head bound to one code."""

    def __init__(self, net: ToricDecoderNet, code: ToricCode):
        super().__init__()
        if net.spec.dim != code.dim:
            raise ValueError(f"{net.spec.dim}D network cannot decode a {code.dim}D code")
        self.net = net
        self.code = code
        self.head = build_head(net.spec.head, code)

    @property
    def spec(self) -> NetworkSpec:
        return self.net.spec

    def position_probabilities(self, syndromes: torch.Tensor) -> torch.Tensor:
        """(B, positions, classes) per-position softmax for flat (B, n_checks) syndromes."""
        x = syndromes.view((syndromes.shape[0], self.code.n_channels) + self.code.lattice_shape)
        return torch.softmax(self.net(x), dim=-1)

    def forward(self, syndromes: torch.Tensor) -> torch.Tensor:
        syndromes = syndromes.to(torch.float32)
        return self.head(self.position_probabilities(syndromes), syndromes)

    def with_code(self, code: ToricCode) -> PooledDecoder:
        """Same weights, pooling rebuilt for ``code``."""
        logger.info("Re-attaching L=%d network to L=%d code", self.code.L, code.L)
        return PooledDecoder(self.net, code)


def build_decoder_network(code: ToricCode, spec: NetworkSpec | None = None, seed: int = 0) -> PooledDecoder:
    spec = spec or NetworkSpec(dim=code.dim)
    if spec.dim != code.dim:
        spec = spec.model_copy(update={"dim": code.dim})
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = ToricDecoderNet(spec)
    n_params = sum(p.numel() for p in net.parameters())
    logger.info("Built %s network for L=%d, dim=%d (%d parameters)", spec.head, code.L, code.dim, n_params)
    return PooledDecoder(net, code)


def log_pooled(pooled: torch.Tensor) -> torch.Tensor:
    return torch.log(pooled + POOLED_EPS)

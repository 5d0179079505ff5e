"""
Pooling heads mapping per-position class distributions to one distribution.

Inputs are (B, positions, classes) probabilities, already softmax-normalized
per position. GAP averages them. GAP_T first permutes each position's classes
by the syndrome-dependent flip of that position (class l -> l ^ c_g), which
makes the pooled output move by delta(h, s) when the syndrome is translated
by h instead of staying put. This holds for achievable syndromes (s = H e).
"""
from __future__ import annotations

import torch
from torch import nn

from qec.code import ToricCode
from qec.equivariance import EquivarianceError, flip_functional


def gap_head(probs: torch.Tensor) -> torch.Tensor:
    return probs.mean(dim=1)


def flip_classes(probs: torch.Tensor, flips: torch.Tensor) -> torch.Tensor:
    """out[..., l] = probs[..., l ^ flips]; ``flips`` holds one class mask per position."""
    classes = torch.arange(probs.shape[-1], device=probs.device)
    index = torch.bitwise_xor(classes, flips.unsqueeze(-1))
    return probs.gather(-1, index)


def gapt_head(probs: torch.Tensor, flips: torch.Tensor) -> torch.Tensor:
    return flip_classes(probs, flips).mean(dim=1)


class GAPHead(nn.Module):
    def forward(self, probs: torch.Tensor, syndrome: torch.Tensor) -> torch.Tensor:
        return gap_head(probs)


class GAPTHead(nn.Module):
    """GAP_T for one code; the flip table is rebuilt for every lattice size."""

    def __init__(self, code: ToricCode):
        super().__init__()
        flips = flip_functional(code).position_flips()  # (positions, logicals, checks)
        self.n_positions, self.n_logicals, n_checks = flips.shape
        self.register_buffer(
            "flip_matrix",
            torch.from_numpy(flips.reshape(-1, n_checks).astype("float32")),
            persistent=False,
        )
        self.register_buffer(
            "bit_weights",
            torch.tensor([1 << a for a in range(self.n_logicals)], dtype=torch.long),
            persistent=False,
        )

    def position_masks(self, syndrome: torch.Tensor) -> torch.Tensor:
        """(B, positions) class masks c_g for float 0/1 syndromes of shape (B, checks)."""
        counts = syndrome.to(self.flip_matrix.dtype) @ self.flip_matrix.T
        bits = torch.remainder(torch.round(counts), 2).long()
        bits = bits.view(syndrome.shape[0], self.n_positions, self.n_logicals)
        return (bits * self.bit_weights).sum(dim=-1)

    def forward(self, probs: torch.Tensor, syndrome: torch.Tensor) -> torch.Tensor:
        if probs.shape[1] != self.n_positions:
            raise EquivarianceError(
                f"network produced {probs.shape[1]} positions, flip table covers {self.n_positions}"
            )
        return gapt_head(probs, self.position_masks(syndrome))


def build_head(kind: str, code: ToricCode) -> nn.Module:
    if kind == "gap":
        return GAPHead()
    if kind == "gapt":
        return GAPTHead(code)
    raise ValueError(f"Unknown pooling head: {kind!r}")

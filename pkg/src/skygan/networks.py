"""Network architectures: U-Net generators, PatchGAN discriminators, the
hazy/clear domain classifier, and the residual catalyst extractor.

Also holds the ImageTensor <-> torch bridges and the differentiable
3-to-31 channel spanning used inside training graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn

from .colorcue import ANCHOR_BAND_RGB, band_weights
from .imagecore import ImageTensor


@dataclass(frozen=True)
class GeneratorSpec:
    """U-Net shape: down/up stage count and first-stage width; sigmoid output."""

    in_channels: int
    out_channels: int
    depth: int = 4
    base_width: int = 32

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DiscriminatorSpec:
    """PatchGAN shape: stride-2 stage count; emits a 1-channel logit map."""

    in_channels: int
    layers: int = 3
    base_width: int = 32

    def to_dict(self):
        return asdict(self)


class UNetGenerator(nn.Module):
    """U-Net with skip connections; LeakyReLU encoder, ReLU decoder, sigmoid head.

    Input H and W must be divisible by 2**depth.
    """

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        widths = [min(spec.base_width * 2**i, spec.base_width * 8) for i in range(spec.depth)]
        downs = []
        c = spec.in_channels
        for i, w in enumerate(widths):
            block = [nn.Conv2d(c, w, 4, stride=2, padding=1)]
            if i > 0:
                block.append(nn.InstanceNorm2d(w))
            block.append(nn.LeakyReLU(0.2))
            downs.append(nn.Sequential(*block))
            c = w
        self.downs = nn.ModuleList(downs)
        self.mid = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.InstanceNorm2d(c), nn.ReLU()
        )
        ups = []
        for i in reversed(range(spec.depth)):
            out_w = widths[i - 1] if i > 0 else spec.base_width
            ups.append(
                nn.Sequential(
                    nn.ConvTranspose2d(c + widths[i], out_w, 4, stride=2, padding=1),
                    nn.InstanceNorm2d(out_w),
                    nn.ReLU(),
                )
            )
            c = out_w
        self.ups = nn.ModuleList(ups)
        self.head = nn.Conv2d(c, spec.out_channels, 3, padding=1)

    def forward(self, x):
        h, w = x.shape[-2], x.shape[-1]
        divisor = 1 << self.spec.depth
        if h % divisor or w % divisor:
            raise ValueError(
                f"input {h}×{w} must be divisible by 2^{self.spec.depth} = {divisor}"
            )
        skips = []
        for down in self.downs:
            x = down(x)
            skips.append(x)
        x = self.mid(x)
        for up, skip in zip(self.ups, reversed(skips)):
            x = up(torch.cat([x, skip], dim=1))
        return torch.sigmoid(self.head(x))


class PatchDiscriminator(nn.Module):
    """PatchGAN: a grid of real/fake logits, spatial size input // 2**layers.

    Inputs must keep at least 2×2 spatial extent at every normalized stage,
    i.e. input size >= 2**(layers+1).
    """

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        blocks = []
        c = spec.in_channels
        for i in range(spec.layers):
            w = min(spec.base_width * 2**i, spec.base_width * 8)
            block = [nn.Conv2d(c, w, 4, stride=2, padding=1)]
            if i > 0:
                block.append(nn.InstanceNorm2d(w))
            block.append(nn.LeakyReLU(0.2))
            blocks.append(nn.Sequential(*block))
            c = w
        blocks.append(nn.Conv2d(c, 1, 1))
        self.model = nn.Sequential(*blocks)

    def forward(self, x):
        return self.model(x)


class DomainClassifier(nn.Module):
    """Hazy-vs-clear binary classifier: 3 stride-2 stages, global average, linear logit.

    No normalization layers, so it works down to 8×8 inputs.
    """

    def __init__(self, in_channels: int, base_width: int = 32):
        super().__init__()
        widths = [base_width, base_width * 2, base_width * 4]
        blocks = []
        c = in_channels
        for w in widths:
            blocks.append(
                nn.Sequential(nn.Conv2d(c, w, 4, stride=2, padding=1), nn.LeakyReLU(0.2))
            )
            c = w
        self.features = nn.Sequential(*blocks)
        self.project = nn.Linear(c, 1)

    def forward(self, x):
        feat = self.features(x).mean(dim=(2, 3))
        return self.project(feat).squeeze(-1)


class ResidualBlock(nn.Module):
    def __init__(self, width):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1),
            nn.InstanceNorm2d(width),
            nn.ReLU(),
            nn.Conv2d(width, width, 3, padding=1),
            nn.InstanceNorm2d(width),
        )

    def forward(self, x):
        return x + self.body(x)


class ResNetCatalyst(nn.Module):
    """Residual feature extractor, spatially preserving, sigmoid output in [0,1]."""

    def __init__(self, in_channels: int = 31, out_channels: int = 3,
                 residual_blocks: int = 4, width: int = 64):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.residual_blocks = residual_blocks
        self.width = width
        self.stem = nn.Sequential(nn.Conv2d(in_channels, width, 3, padding=1), nn.ReLU())
        self.blocks = nn.Sequential(*[ResidualBlock(width) for _ in range(residual_blocks)])
        self.head = nn.Conv2d(width, out_channels, 3, padding=1)

    def forward(self, x):
        if x.shape[1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {x.shape[1]}")
        return torch.sigmoid(self.head(self.blocks(self.stem(x))))

    def to_dict(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "residual_blocks": self.residual_blocks,
            "width": self.width,
        }


def to_torch(img: ImageTensor, dtype=torch.float32) -> torch.Tensor:
    """ImageTensor (H,W,C) -> torch tensor (1,C,H,W)."""
    arr = np.transpose(img.data, (2, 0, 1)).copy()
    return torch.from_numpy(arr).to(dtype).unsqueeze(0)


def from_torch(t: torch.Tensor, dtype=np.float32) -> ImageTensor:
    """torch tensor (1,C,H,W) or (C,H,W) -> ImageTensor, clamped to [0,1]."""
    if t.dim() == 4:
        t = t.squeeze(0)
    arr = t.detach().clamp(0.0, 1.0).cpu().numpy().astype(dtype)
    return ImageTensor(np.transpose(arr, (1, 2, 0)))


def spanning_matrix(dtype=torch.float32) -> torch.Tensor:
    """The 31×3 band-weight matrix as a torch tensor."""
    return torch.from_numpy(band_weights()).to(dtype)


def span_rgb(rgb: torch.Tensor, weights: torch.Tensor | None = None) -> torch.Tensor:
    """Differentiable spanning of (B,3,H,W) into (B,31,H,W)."""
    if weights is None:
        weights = spanning_matrix(rgb.dtype)
    return torch.einsum("kc,bchw->bkhw", weights.to(rgb.dtype), rgb)


def anchor_rgb(spanned: torch.Tensor) -> torch.Tensor:
    """Extract the (R,G,B) anchor bands from a (B,31,H,W) spanned tensor."""
    return spanned[:, list(ANCHOR_BAND_RGB), :, :]

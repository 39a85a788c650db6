"""Building blocks shared by the generator and discriminator."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn
from torchvision.ops import deform_conv2d


class NumericsError(RuntimeError):
    """A network stage produced non-finite activations."""


def check_finite(t: torch.Tensor, stage: str) -> torch.Tensor:
    if not torch.isfinite(t).all():
        raise NumericsError(f"non-finite activations in {stage}")
    return t


def group_norm(channels: int) -> nn.GroupNorm:
    # 8 groups wherever 8 divides the width; degrade gracefully for narrow
    # desk-scale configurations
    return nn.GroupNorm(math.gcd(8, channels), channels)


class DeformableStem(nn.Module):
    """Deformable 3x3 convolution + group norm + ReLU.

    Sampling offsets come from a zero-initialized convolution, so an
    untrained stem behaves exactly like a plain convolution.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.offset = nn.Conv2d(in_channels, 2 * 9, 3, padding=1)
        nn.init.zeros_(self.offset.weight)
        nn.init.zeros_(self.offset.bias)
        self.weight = nn.Parameter(torch.empty(out_channels, in_channels, 3, 3))
        self.bias = nn.Parameter(torch.zeros(out_channels))
        nn.init.kaiming_uniform_(self.weight, a=math.sqrt(5))
        self.norm = group_norm(out_channels)

    def forward(self, x):
        # the native kernel crashes on non-finite sampling positions, so the
        # offsets must be validated before dispatch
        offsets = check_finite(self.offset(x), "stem.offsets")
        h = deform_conv2d(x, offsets, self.weight, self.bias, padding=1)
        return F.relu(self.norm(h))


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with group norm and an identity skip."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.norm1 = group_norm(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.norm2 = group_norm(out_channels)
        if in_channels != out_channels:
            self.skip = nn.Conv2d(in_channels, out_channels, 1)
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        h = F.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return F.relu(h + self.skip(x))


class DownBlock(nn.Module):
    """Stride-2 convolution + group norm + ReLU + residual block.

    Halves each spatial dimension and (as configured) doubles the width.
    """

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, 3, stride=2, padding=1)
        self.norm = group_norm(out_channels)
        self.res = ResidualBlock(out_channels, out_channels)

    def forward(self, x):
        return self.res(F.relu(self.norm(self.conv(x))))


class AdaIN(nn.Module):
    """Instance-normalize, then scale and shift with style-predicted params."""

    def __init__(self, style_dim: int, channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.affine = nn.Linear(style_dim, 2 * channels)
        # start near the identity transform: scale 1, shift 0
        nn.init.normal_(self.affine.weight, std=0.02)
        with torch.no_grad():
            self.affine.bias[:channels] = 1.0
            self.affine.bias[channels:] = 0.0

    def normalize(self, g: torch.Tensor) -> torch.Tensor:
        mean = g.mean(dim=(2, 3), keepdim=True)
        var = g.var(dim=(2, 3), unbiased=False, keepdim=True)
        return (g - mean) / torch.sqrt(var + self.eps)

    def forward(self, g: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        scale, shift = self.affine(style).chunk(2, dim=1)
        return self.normalize(g) * scale[:, :, None, None] + shift[:, :, None, None]


class StyleGate(nn.Module):
    """Sigmoid channel gate predicted from a style embedding."""

    def __init__(self, style_dim: int, channels: int):
        super().__init__()
        self.proj = nn.Linear(style_dim, channels)

    def forward(self, x: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        gate = torch.sigmoid(self.proj(style))
        return x * gate[:, :, None, None]


class UpBlock(nn.Module):
    """AdaIN, 2x bilinear upsample, convolution, residual block.

    Doubles each spatial dimension and halves the width.
    """

    def __init__(self, in_channels: int, out_channels: int, style_dim: int):
        super().__init__()
        self.adain = AdaIN(style_dim, in_channels)
        self.conv = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.res = ResidualBlock(out_channels, out_channels)

    def forward(self, g: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        h = self.adain(g, style)
        h = F.interpolate(h, scale_factor=2, mode="bilinear", align_corners=False)
        return self.res(self.conv(h))

"""Encoder-decoder generator with disentangled style/content embeddings.

The encoder downsamples through four stride-2 stages; the three deepest
feature maps feed parallel multiscale style heads (channel statistics) and
content heads (projected + pooled features), each producing a third of the
final embedding.  The decoder projects the content embedding to a low-res
latent and upsamples through four fusion blocks that inject the style
embedding chunks via AdaIN and sigmoid channel gates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import nn

from .blocks import (
    AdaIN,
    DeformableStem,
    DownBlock,
    ResidualBlock,
    StyleGate,
    UpBlock,
    check_finite,
    group_norm,
)


@dataclass
class EncoderConfig:
    """Width/shape hyperparameters shared by encoder and decoder."""

    image_size: int = 64
    in_channels: int = 1
    base_width: int = 64
    head_dim: int = 256

    def __post_init__(self):
        if self.image_size % 16 != 0:
            raise ValueError("image_size must be divisible by 16")
        if self.head_dim < 1 or self.base_width < 1:
            raise ValueError("head_dim and base_width must be positive")

    @property
    def embed_dim(self) -> int:
        return 3 * self.head_dim

    def channels(self, level: int) -> int:
        """Width of pyramid level 1..5 (doubles per downsampling stage)."""
        return self.base_width * 2 ** (level - 1)


class EncodedGlyph(NamedTuple):
    style: torch.Tensor  # B x embed_dim
    content: torch.Tensor  # B x embed_dim
    pyramid: dict  # level -> B x C_i x H_i x W_i


class StyleHead(nn.Module):
    """Channel-wise mean and biased variance, projected to the head size."""

    def __init__(self, channels: int, head_dim: int):
        super().__init__()
        self.proj = nn.Linear(2 * channels, head_dim)

    @staticmethod
    def statistics(z: torch.Tensor) -> torch.Tensor:
        mu = z.mean(dim=(2, 3))
        var = z.var(dim=(2, 3), unbiased=False)
        return torch.cat([mu, var], dim=1)

    def forward(self, z):
        return self.proj(self.statistics(z))


class ContentHead(nn.Module):
    """Conv + group norm + depthwise separable projection, then the sum of
    global average and max pooling."""

    def __init__(self, channels: int, head_dim: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, head_dim, 3, padding=1)
        self.norm = group_norm(head_dim)
        self.depthwise = nn.Conv2d(head_dim, head_dim, 3, padding=1, groups=head_dim)
        self.pointwise = nn.Conv2d(head_dim, head_dim, 1)

    def project(self, z: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.norm(self.conv(z)))
        return self.pointwise(self.depthwise(h))

    @staticmethod
    def aggregate(projected: torch.Tensor) -> torch.Tensor:
        return projected.mean(dim=(2, 3)) + projected.amax(dim=(2, 3))

    def forward(self, z):
        return self.aggregate(self.project(z))


class MultiScaleStyleBlock(nn.Module):
    """Three per-scale style heads concatenated in scale order 3, 4, 5."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.head3 = StyleHead(config.channels(3), config.head_dim)
        self.head4 = StyleHead(config.channels(4), config.head_dim)
        self.head5 = StyleHead(config.channels(5), config.head_dim)

    def forward(self, z3, z4, z5):
        return torch.cat([self.head3(z3), self.head4(z4), self.head5(z5)], dim=1)


class MultiScaleContentBlock(nn.Module):
    """Three per-scale content heads concatenated in scale order 3, 4, 5."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.head3 = ContentHead(config.channels(3), config.head_dim)
        self.head4 = ContentHead(config.channels(4), config.head_dim)
        self.head5 = ContentHead(config.channels(5), config.head_dim)

    def forward(self, z3, z4, z5):
        return torch.cat([self.head3(z3), self.head4(z4), self.head5(z5)], dim=1)


class StyleContentEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        self.stem = DeformableStem(config.in_channels, w)
        self.down2 = DownBlock(w, 2 * w)
        self.down3 = DownBlock(2 * w, 4 * w)
        self.down4 = DownBlock(4 * w, 8 * w)
        self.down5 = DownBlock(8 * w, 16 * w)
        self.mshb = MultiScaleStyleBlock(config)
        self.mchb = MultiScaleContentBlock(config)

    def forward(self, x: torch.Tensor) -> EncodedGlyph:
        if x.shape[-2:] != (self.config.image_size, self.config.image_size):
            raise ValueError(
                f"encoder expects {self.config.image_size}x{self.config.image_size} input, "
                f"got {tuple(x.shape[-2:])}"
            )
        z1 = check_finite(self.stem(x), "enc.stem")
        z2 = check_finite(self.down2(z1), "enc.down2")
        z3 = check_finite(self.down3(z2), "enc.down3")
        z4 = check_finite(self.down4(z3), "enc.down4")
        z5 = check_finite(self.down5(z4), "enc.down5")
        style = check_finite(self.mshb(z3, z4, z5), "enc.mshb")
        content = check_finite(self.mchb(z3, z4, z5), "enc.mchb")
        return EncodedGlyph(style, content, {1: z1, 2: z2, 3: z3, 4: z4, 5: z5})


class StyleContentDecoder(nn.Module):
    """Four fusion-upsampling stages from a 16x-downscaled content latent.

    Stage j normalizes with style chunk j-1 (chunk 1 twice at the start) and
    gates stages 1..3 with chunks 1..3; the last stage feeds a 1x1 output
    convolution squashed to [0, 1].
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        self.latent_size = config.image_size // 16
        self.latent_channels = 16 * w
        self.proj = nn.Linear(config.embed_dim, self.latent_channels * self.latent_size**2)
        d = config.head_dim
        self.up1 = UpBlock(16 * w, 8 * w, d)
        self.up2 = UpBlock(8 * w, 4 * w, d)
        self.up3 = UpBlock(4 * w, 2 * w, d)
        self.up4 = UpBlock(2 * w, w, d)
        self.gate1 = StyleGate(d, 8 * w)
        self.gate2 = StyleGate(d, 4 * w)
        self.gate3 = StyleGate(d, 2 * w)
        self.out = nn.Conv2d(w, config.in_channels, 1)

    def forward(self, style: torch.Tensor, content: torch.Tensor) -> torch.Tensor:
        if style.shape[-1] != self.config.embed_dim or content.shape[-1] != self.config.embed_dim:
            raise ValueError(
                f"decoder expects {self.config.embed_dim}-dim embeddings, "
                f"got style {style.shape[-1]}, content {content.shape[-1]}"
            )
        e1, e2, e3 = style.chunk(3, dim=1)
        g = self.proj(content).reshape(
            -1, self.latent_channels, self.latent_size, self.latent_size
        )
        g = self.gate1(self.up1(g, e1), e1)
        g = self.gate2(self.up2(g, e1), e2)
        g = self.gate3(self.up3(g, e2), e3)
        g = self.up4(g, e3)
        return check_finite(torch.sigmoid(self.out(g)), "dec.out")


class GeneratorNet(nn.Module):
    """Full generator: shared encoder plus cross-fusing decoder."""

    def __init__(self, config: EncoderConfig | None = None):
        super().__init__()
        self.config = config or EncoderConfig()
        self.enc = StyleContentEncoder(self.config)
        self.dec = StyleContentDecoder(self.config)

    def encode(self, x: torch.Tensor) -> EncodedGlyph:
        return self.enc(x)

    def decode(self, style: torch.Tensor, content: torch.Tensor) -> torch.Tensor:
        return self.dec(style, content)

    def synthesize(self, style_img: torch.Tensor, content_img: torch.Tensor) -> torch.Tensor:
        """Generate targets from a style reference and a content reference."""
        style = self.enc(style_img).style
        content = self.enc(content_img).content
        return self.dec(style, content)

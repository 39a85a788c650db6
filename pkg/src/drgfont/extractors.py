"""Frozen feature extractors for perceptual/latent objectives and LPIPS.

Three families behind one small interface:

* pretrained perceptual backbone (VGG19 taps) for paper-faithful runs,
* a pretrained latent encoder wrapper (e.g. a diffusion VAE encoder supplied
  by the caller),
* deterministic fixed-seed convolutional stand-ins for CI and desk-scale
  work, where pretrained weights are unavailable.

Perceptual extractors map a 3-channel batch to a list of feature maps with
matching ``layer_weights``; latent extractors map a 1-channel glyph batch to
a single latent map.  All extractors are frozen: parameters never receive
gradients and modules stay in eval mode.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

PERCEPTUAL_TAP_WEIGHTS = (1.0, 0.75, 0.5, 0.25)
VGG19_TAP_LAYERS = (3, 8, 17, 26)


class ExtractorUnavailable(RuntimeError):
    """A requested pretrained backbone cannot be constructed."""


class _Frozen(nn.Module):
    def _freeze(self):
        for p in self.parameters():
            p.requires_grad_(False)
        super().train(False)

    def train(self, mode: bool = True):
        # frozen extractors never enter training mode
        return super().train(False)


def replicate_channels(x: torch.Tensor) -> torch.Tensor:
    """Expand single-channel glyphs to 3 channels for RGB backbones."""
    if x.shape[1] == 1:
        return x.repeat(1, 3, 1, 1)
    return x


def _seeded_conv(in_ch, out_ch, kernel, stride, generator, gain=1.0):
    conv = nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=kernel // 2)
    with torch.no_grad():
        fan_in = in_ch * kernel * kernel
        conv.weight.copy_(torch.randn(conv.weight.shape, generator=generator) * gain / fan_in**0.5)
        conv.bias.copy_(torch.randn(conv.bias.shape, generator=generator) * 0.1)
    return conv


class StandInPerceptualExtractor(_Frozen):
    """Fixed-seed random convolutional feature pyramid with four taps."""

    def __init__(self, seed: int = 0, width: int = 8):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.conv1 = _seeded_conv(3, width, 3, 1, g)
        self.conv2 = _seeded_conv(width, 2 * width, 3, 2, g)
        self.conv3 = _seeded_conv(2 * width, 2 * width, 3, 2, g)
        self.conv4 = _seeded_conv(2 * width, 4 * width, 3, 2, g)
        self.layer_weights = PERCEPTUAL_TAP_WEIGHTS
        self._freeze()

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        taps = []
        h = x
        for conv in (self.conv1, self.conv2, self.conv3, self.conv4):
            h = torch.tanh(conv(h))
            taps.append(h)
        return taps


class VggPerceptualExtractor(_Frozen):
    """Pretrained VGG19 features tapped at the four canonical layers.

    Needs downloadable torchvision weights; raises ExtractorUnavailable when
    they cannot be fetched (offline CI uses the stand-in instead).
    """

    _MEAN = (0.485, 0.456, 0.406)
    _STD = (0.229, 0.224, 0.225)

    def __init__(self):
        super().__init__()
        try:
            from torchvision.models import VGG19_Weights, vgg19

            features = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).features
        except Exception as exc:  # noqa: BLE001 - any fetch/import failure
            raise ExtractorUnavailable(f"pretrained VGG19 weights unavailable: {exc}") from exc
        self.slices = nn.ModuleList()
        prev = 0
        for tap in VGG19_TAP_LAYERS:
            self.slices.append(nn.Sequential(*[features[i] for i in range(prev, tap + 1)]))
            prev = tap + 1
        self.layer_weights = PERCEPTUAL_TAP_WEIGHTS
        self.register_buffer("mean", torch.tensor(self._MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(self._STD).view(1, 3, 1, 1))
        self._freeze()

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        h = (x - self.mean) / self.std
        taps = []
        for block in self.slices:
            h = block(h)
            taps.append(h)
        return taps


class IdentityFeatureExtractor(_Frozen):
    """Single tap returning the input unchanged (degenerate/debug)."""

    def __init__(self):
        super().__init__()
        self.layer_weights = (1.0,)
        self._freeze()

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        return [x]


class StandInLatentEncoder(_Frozen):
    """Fixed-seed convolutional encoder to a small latent map (8x downscale)."""

    def __init__(self, seed: int = 0, width: int = 8, latent_channels: int = 4):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.conv1 = _seeded_conv(1, width, 3, 2, g)
        self.conv2 = _seeded_conv(width, 2 * width, 3, 2, g)
        self.conv3 = _seeded_conv(2 * width, latent_channels, 3, 2, g)
        self._freeze()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.tanh(self.conv1(x))
        h = torch.tanh(self.conv2(h))
        return self.conv3(h)


class WrappedLatentEncoder(_Frozen):
    """Freeze and adapt a caller-supplied latent encoder (e.g. a diffusion
    VAE encoder); single-channel glyphs are replicated to 3 channels."""

    def __init__(self, module: nn.Module):
        super().__init__()
        self.module = module
        self._freeze()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.module(replicate_channels(x))
        if isinstance(out, (tuple, list)):
            out = out[0]
        return out


class IdentityLatentEncoder(_Frozen):
    """Latent space = pixel space (degenerate/debug)."""

    def __init__(self):
        super().__init__()
        self._freeze()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x


class StandInLpipsBackbone(_Frozen):
    """Fixed-seed conv pyramid for the perceptual image distance.

    Not calibrated against human judgments like a published backbone, but a
    valid deterministic pseudo-distance for CI.
    """

    def __init__(self, seed: int = 0, width: int = 8):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        self.conv1 = _seeded_conv(3, width, 3, 1, g)
        self.conv2 = _seeded_conv(width, 2 * width, 3, 2, g)
        self.conv3 = _seeded_conv(2 * width, 4 * width, 3, 2, g)
        self._freeze()

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        h1 = torch.tanh(self.conv1(x))
        h2 = torch.tanh(self.conv2(h1))
        h3 = torch.tanh(self.conv3(h2))
        return [h1, h2, h3]

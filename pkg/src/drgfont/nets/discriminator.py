"""Multi-task patch discriminator.

A spectrally-normalized stride-2 backbone yields an 8x8 patch realism map
(for 64x64 inputs) plus style and content classification logits from two
spectrally-normalized branches over the pooled features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.parametrizations import spectral_norm

from .blocks import check_finite


@dataclass
class DiscriminatorConfig:
    n_styles: int
    n_contents: int
    in_channels: int = 1
    base_width: int = 64

    def __post_init__(self):
        if self.n_styles < 1 or self.n_contents < 1:
            raise ValueError("classification head sizes must be positive")


class DiscriminatorOutput(NamedTuple):
    adv_map: torch.Tensor  # B x 1 x H_D x W_D patch logits
    style_logits: torch.Tensor  # B x n_styles
    content_logits: torch.Tensor  # B x n_contents


class MultiTaskDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        self.conv1 = spectral_norm(nn.Conv2d(config.in_channels, w, 4, stride=2, padding=1))
        self.conv2 = spectral_norm(nn.Conv2d(w, 2 * w, 4, stride=2, padding=1))
        self.conv3 = spectral_norm(nn.Conv2d(2 * w, 4 * w, 4, stride=2, padding=1))
        self.adv_head = nn.Conv2d(4 * w, 1, 3, padding=1)
        self.style_head = spectral_norm(nn.Linear(4 * w, config.n_styles))
        self.content_head = spectral_norm(nn.Linear(4 * w, config.n_contents))

    def forward(self, x: torch.Tensor) -> DiscriminatorOutput:
        h = F.leaky_relu(self.conv1(x), 0.2)
        h = F.leaky_relu(self.conv2(h), 0.2)
        h = F.leaky_relu(self.conv3(h), 0.2)
        check_finite(h, "disc.backbone")
        adv = check_finite(self.adv_head(h), "disc.adv_head")
        pooled = h.mean(dim=(2, 3))
        style = check_finite(self.style_head(pooled), "disc.style_head")
        content = check_finite(self.content_head(pooled), "disc.content_head")
        return DiscriminatorOutput(adv, style, content)

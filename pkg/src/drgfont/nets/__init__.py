from .blocks import AdaIN, DeformableStem, DownBlock, NumericsError, ResidualBlock, StyleGate, UpBlock
from .generator import (
    EncodedGlyph,
    EncoderConfig,
    GeneratorNet,
    StyleContentDecoder,
    StyleContentEncoder,
)
from .discriminator import DiscriminatorConfig, DiscriminatorOutput, MultiTaskDiscriminator

__all__ = [
    "AdaIN",
    "DeformableStem",
    "DownBlock",
    "NumericsError",
    "ResidualBlock",
    "StyleGate",
    "UpBlock",
    "EncodedGlyph",
    "EncoderConfig",
    "GeneratorNet",
    "StyleContentDecoder",
    "StyleContentEncoder",
    "DiscriminatorConfig",
    "DiscriminatorOutput",
    "MultiTaskDiscriminator",
]

"""Loss terms and weighted totals for min-max training.

Six generator-side terms: pixel reconstruction, multi-tap perceptual
consistency, hinge adversarial, auxiliary classification, contrastive
disentanglement over style/content embedding triplets, and latent-space
reconstruction through a frozen encoder.  The discriminator optimizes hinge
realism plus classification on real targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import torch
import torch.nn.functional as F

from .extractors import replicate_channels


@dataclass
class LossWeights:
    recon: float = 5.0
    perc: float = 1.0
    dist: float = 0.2
    latent: float = 0.15
    cls: float = 1.0
    adv: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be >= 0")


@dataclass
class CircleParams:
    margin: float = 0.25
    scale: float = 64.0

    def __post_init__(self):
        if not 0.0 < self.margin < 1.0:
            raise ValueError("margin must be in (0, 1)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def stable_softplus(x: torch.Tensor) -> torch.Tensor:
    """log(1 + exp(x)) without overflow."""
    return torch.clamp_min(x, 0.0) + torch.log1p(torch.exp(-torch.abs(x)))


def safe_cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Row-wise cosine similarity; zero-norm rows score 0."""
    na = a.norm(dim=-1)
    nb = b.norm(dim=-1)
    denom = na * nb
    dots = (a * b).sum(dim=-1)
    return torch.where(denom > 0, dots / denom.clamp_min(torch.finfo(a.dtype).tiny), torch.zeros_like(dots))


def recon_loss(y_hat: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Mean absolute pixel difference."""
    if y_hat.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(y_hat.shape)} vs {tuple(y.shape)}")
    return (y_hat - y).abs().mean()


def perceptual_loss(y_hat: torch.Tensor, y: torch.Tensor, extractor) -> torch.Tensor:
    """Weighted L1 over the extractor's feature taps.

    Single-channel inputs are replicated to 3 channels before extraction.
    """
    taps_hat = extractor(replicate_channels(y_hat))
    taps_ref = extractor(replicate_channels(y))
    total = y_hat.new_zeros(())
    for w, fh, fr in zip(extractor.layer_weights, taps_hat, taps_ref):
        total = total + w * (fh - fr).abs().mean()
    return total


def adv_loss_d(adv_real: torch.Tensor, adv_fake: torch.Tensor) -> torch.Tensor:
    """Hinge loss for the discriminator over patch logit maps."""
    return F.relu(1.0 - adv_real).mean() + F.relu(1.0 + adv_fake).mean()


def adv_loss_g(adv_fake: torch.Tensor) -> torch.Tensor:
    """Generator side of the hinge objective."""
    return -adv_fake.mean()


def cls_loss(
    style_logits: torch.Tensor,
    content_logits: torch.Tensor,
    style_label: torch.Tensor,
    content_label: torch.Tensor,
) -> torch.Tensor:
    """Softmax cross-entropy over both auxiliary heads, batch-mean."""
    for logits, label, name in (
        (style_logits, style_label, "style"),
        (content_logits, content_label, "content"),
    ):
        if label.min() < 0 or label.max() >= logits.shape[-1]:
            raise ValueError(f"{name} label out of range [0, {logits.shape[-1]})")
    return F.cross_entropy(style_logits, style_label) + F.cross_entropy(
        content_logits, content_label
    )


def circle_loss(s_p, s_n, params: CircleParams | None = None) -> torch.Tensor:
    """Pair-similarity loss with adaptive, gradient-stopped weights.

    delta_p = max(0, 1 + margin - s_p) and delta_n = max(0, s_n + margin)
    are treated as constants; the loss is
    softplus(scale * (delta_n*(s_n - margin) - delta_p*(s_p - (1 - margin)))).
    """
    params = params or CircleParams()
    if not torch.is_tensor(s_p):
        s_p = torch.tensor(float(s_p), dtype=torch.float64)
    if not torch.is_tensor(s_n):
        s_n = torch.tensor(float(s_n), dtype=s_p.dtype)
    eta, gamma = params.margin, params.scale
    delta_p = F.relu(1.0 + eta - s_p.detach())
    delta_n = F.relu(s_n.detach() + eta)
    logit = gamma * (delta_n * (s_n - eta) - delta_p * (s_p - (1.0 - eta)))
    return stable_softplus(logit)


def disentangle_loss(
    style_triplet: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
    content_triplet: tuple[torch.Tensor, torch.Tensor, torch.Tensor],
    params: CircleParams | None = None,
) -> torch.Tensor:
    """Circle loss on style-triplet cosines plus circle loss on content-
    triplet cosines, each batch-meaned."""
    params = params or CircleParams()
    sa, sp, sn = style_triplet
    ca, cp, cn = content_triplet
    style_term = circle_loss(safe_cosine(sa, sp), safe_cosine(sa, sn), params).mean()
    content_term = circle_loss(safe_cosine(ca, cp), safe_cosine(ca, cn), params).mean()
    return style_term + content_term


def latent_loss(y_hat: torch.Tensor, y: torch.Tensor, frozen_encoder) -> torch.Tensor:
    """Mean L1 in a frozen encoder's latent space.

    Gradients reach y_hat through the encoder's graph but never its
    parameters (they are frozen).
    """
    lat_hat = frozen_encoder(y_hat)
    with torch.no_grad():
        lat_ref = frozen_encoder(y)
    return (lat_hat - lat_ref).abs().mean()


@dataclass
class GeneratorLossParts:
    recon: torch.Tensor
    perc: torch.Tensor
    dist: torch.Tensor
    latent: torch.Tensor
    adv: torch.Tensor
    cls: torch.Tensor


@dataclass
class DiscriminatorLossParts:
    adv: torch.Tensor
    cls: torch.Tensor


def _check_parts(parts) -> None:
    for f in fields(parts):
        value = getattr(parts, f.name)
        if not torch.isfinite(torch.as_tensor(value)).all():
            raise ValueError(f"loss term {f.name!r} is not finite")


def total_g(parts: GeneratorLossParts, weights: LossWeights | None = None) -> torch.Tensor:
    weights = weights or LossWeights()
    _check_parts(parts)
    return (
        weights.recon * parts.recon
        + weights.perc * parts.perc
        + weights.dist * parts.dist
        + weights.latent * parts.latent
        + weights.adv * parts.adv
        + weights.cls * parts.cls
    )


def total_d(parts: DiscriminatorLossParts, weights: LossWeights | None = None) -> torch.Tensor:
    weights = weights or LossWeights()
    _check_parts(parts)
    return weights.adv * parts.adv + weights.cls * parts.cls


@dataclass
class LossReport:
    """Per-step named scalars, serialized as one structured-text line."""

    step: int
    values: dict[str, float] = field(default_factory=dict)

    def to_line(self) -> str:
        parts = [f"step={self.step}"]
        parts.extend(f"{k}={v:.6f}" for k, v in self.values.items())
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "LossReport":
        tokens = line.split()
        step = int(tokens[0].split("=", 1)[1])
        values = {}
        for tok in tokens[1:]:
            k, v = tok.split("=", 1)
            values[k] = float(v)
        return cls(step=step, values=values)

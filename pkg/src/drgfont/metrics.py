"""Quantitative evaluation: L1, RMSE, SSIM, LPIPS over dataset splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .extractors import replicate_channels
from .glyphs import GlyphStore
from .selection import PreferenceTable

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class MetricUnavailable(RuntimeError):
    """A metric's backbone is missing; the value is reported as absent."""


def _validate_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def metric_l1(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _validate_pair(a, b)
    return float(np.mean(np.abs(a - b)))


def metric_rmse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _validate_pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    return np.outer(k, k)


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    """2-D correlation keeping only fully-supported output positions."""
    size = window.shape[0]
    h, w = img.shape
    patches = np.lib.stride_tricks.sliding_window_view(img, (size, size))
    return np.einsum("ijkl,kl->ij", patches, window, optimize=True)


def metric_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Windowed structural similarity, mean over valid window positions.

    11x11 Gaussian window (sigma 1.5), k1=0.01, k2=0.03, dynamic range 1.
    """
    a, b = _validate_pair(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    win = _gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_a = _filter_valid(a, win)
    mu_b = _filter_valid(b, win)
    var_a = _filter_valid(a * a, win) - mu_a**2
    var_b = _filter_valid(b * b, win) - mu_b**2
    cov = _filter_valid(a * b, win) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def metric_lpips(a: np.ndarray, b: np.ndarray, backbone) -> float:
    """Perceptual distance: unit-normalized feature differences per tap.

    Features are L2-normalized along channels at each spatial location,
    squared differences averaged over channels and positions, then summed
    across taps.  Zero exactly when inputs are identical; symmetric.
    """
    if backbone is None:
        raise MetricUnavailable("no LPIPS backbone configured")
    a, b = _validate_pair(a, b)
    dtype = next(backbone.parameters()).dtype
    ta = replicate_channels(torch.as_tensor(a, dtype=dtype)[None, None])
    tb = replicate_channels(torch.as_tensor(b, dtype=dtype)[None, None])
    total = 0.0
    with torch.no_grad():
        for fa, fb in zip(backbone(ta), backbone(tb)):
            na = fa / fa.norm(dim=1, keepdim=True).clamp_min(1e-10)
            nb = fb / fb.norm(dim=1, keepdim=True).clamp_min(1e-10)
            total += float(((na - nb) ** 2).mean(dim=1).mean())
    return total


@dataclass
class MetricReport:
    split: str
    l1: float
    rmse: float
    ssim: float
    lpips: float | None
    n_pairs: int
    n_skipped: int = 0

    def __post_init__(self):
        if self.n_pairs > 0:
            if self.l1 < 0 or self.rmse < 0:
                raise ValueError("pixel metrics must be non-negative")
            if not -1.0 <= self.ssim <= 1.0:
                raise ValueError("ssim out of [-1, 1]")
            if self.lpips is not None and self.lpips < 0:
                raise ValueError("lpips must be non-negative")


def evaluate(
    generate_fn,
    store: GlyphStore,
    split: str,
    table: PreferenceTable,
    lpips_backbone=None,
) -> MetricReport:
    """Generate every target glyph of a split and average the four metrics.

    ``generate_fn(style_refs, target_chars) -> list of H x W arrays`` is the
    synthesis callback (normally ``Trainer.generate``).  Reference pools come
    from the preference table; pool members are excluded from the targets so
    scores measure generalization to unseen characters.  Pairs lacking ground
    truth or references are skipped and counted.
    """
    catalog = store.catalog
    if split == "seen":
        fonts = sorted(catalog.seen)
    elif split == "unseen":
        fonts = sorted(catalog.unseen)
    else:
        raise ValueError(f"split must be 'seen' or 'unseen', got {split!r}")

    sums = {"l1": 0.0, "rmse": 0.0, "ssim": 0.0, "lpips": 0.0}
    lpips_ok = lpips_backbone is not None
    n_pairs = 0
    n_skipped = 0
    content_font = catalog.content_font
    for font_id in fonts:
        pool = set(table.pools.get(font_id, []))
        refs = [store.get(font_id, c) for c in sorted(pool) if store.has(font_id, c)]
        targets = [
            c
            for c in store.chars_of(font_id)
            if c not in pool and store.has(content_font, c)
        ]
        if not refs or not targets:
            n_skipped += len(targets) if targets else 0
            continue
        outputs = generate_fn(refs, targets)
        for char_id, pred in zip(targets, outputs):
            if not store.has(font_id, char_id):
                n_skipped += 1
                continue
            truth = store.get(font_id, char_id).pixels
            pred = np.clip(np.asarray(pred, dtype=np.float64), 0.0, 1.0)
            sums["l1"] += metric_l1(pred, truth)
            sums["rmse"] += metric_rmse(pred, truth)
            sums["ssim"] += metric_ssim(pred, truth)
            if lpips_ok:
                sums["lpips"] += metric_lpips(pred, truth, lpips_backbone)
            n_pairs += 1
    if n_pairs == 0:
        raise ValueError(f"no evaluable (font, char) pairs in split {split!r}")
    return MetricReport(
        split=split,
        l1=sums["l1"] / n_pairs,
        rmse=sums["rmse"] / n_pairs,
        ssim=sums["ssim"] / n_pairs,
        lpips=(sums["lpips"] / n_pairs) if lpips_ok else None,
        n_pairs=n_pairs,
        n_skipped=n_skipped,
    )


def render_table(reports: list[MetricReport]) -> str:
    """Aligned text table; columns ordered L1, RMSE, SSIM, LPIPS."""
    header = f"{'Split':<12} {'L1':>8} {'RMSE':>8} {'SSIM':>8} {'LPIPS':>8} {'Pairs':>7}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lp = f"{r.lpips:8.4f}" if r.lpips is not None else f"{'n/a':>8}"
        lines.append(
            f"{r.split:<12} {r.l1:8.4f} {r.rmse:8.4f} {r.ssim:8.4f} {lp} {r.n_pairs:7d}"
        )
    return "\n".join(lines)


def save_comparison_grid(pairs: list[tuple[np.ndarray, np.ndarray]], path) -> None:
    """Side-by-side PNG: generated glyphs on top, ground truth below."""
    from PIL import Image

    if not pairs:
        raise ValueError("nothing to render")
    h, w = pairs[0][0].shape
    canvas = np.ones((2 * h + 3, len(pairs) * (w + 1) + 1), dtype=np.float64)
    for i, (pred, truth) in enumerate(pairs):
        x = 1 + i * (w + 1)
        canvas[1 : 1 + h, x : x + w] = np.clip(pred, 0, 1)
        canvas[2 + h : 2 + 2 * h, x : x + w] = np.clip(truth, 0, 1)
    img = (np.round(canvas * 255)).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path)

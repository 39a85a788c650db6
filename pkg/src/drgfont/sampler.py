"""Training batch and triplet sampling.

Each sample pairs a selector-chosen style reference with the content-font
rendering of a target character; the ground truth is the target font's glyph
of that character.  Triplet positives come from within the batch (the ground
truth shares the reference's font and the content glyph's character), and
negatives are drawn fresh: a glyph from a different seen font for style, a
different content-font character for content.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .glyphs import GlyphImage, GlyphStore, Triplet
from .selection import ReferenceSelector, SelectionError


class SamplingError(Exception):
    """The catalog cannot supply valid batches."""


@dataclass
class TrainingBatch:
    style_refs: list[GlyphImage]
    content_refs: list[GlyphImage]
    targets: list[GlyphImage]
    style_negatives: list[GlyphImage]
    content_negatives: list[GlyphImage]

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def style_labels(self) -> list[int]:
        """Font id of each target (the style class being synthesized)."""
        return [g.font_id for g in self.targets]

    @property
    def content_labels(self) -> list[int]:
        """Character id of each target."""
        return [g.char_id for g in self.targets]

    def style_triplets(self) -> list[Triplet]:
        return [
            Triplet(anchor=a, positive=p, negative=n, mode="style")
            for a, p, n in zip(self.style_refs, self.targets, self.style_negatives)
        ]

    def content_triplets(self) -> list[Triplet]:
        return [
            Triplet(anchor=a, positive=p, negative=n, mode="content")
            for a, p, n in zip(self.content_refs, self.targets, self.content_negatives)
        ]


class BatchSampler:
    """Draws deterministic batches given an RNG; read-only over the store."""

    def __init__(self, store: GlyphStore, selector: ReferenceSelector):
        self.store = store
        self.selector = selector
        catalog = store.catalog
        self.content_font = catalog.content_font
        self.content_chars = store.chars_of(self.content_font)
        seen_fonts = sorted(catalog.seen)
        fonts_with_glyphs = [f for f in seen_fonts if store.chars_of(f)]
        if len(fonts_with_glyphs) < 2:
            raise SamplingError("need >=2 fonts for negatives")
        if len(self.content_chars) < 2:
            raise SamplingError("need >=2 characters for negatives")
        self.seen_fonts = fonts_with_glyphs
        # candidate (font, char) targets: ground truth and content glyph both
        # present; the selector may still reject pairs with empty pools
        self.pairs = [
            (f, c)
            for f in self.seen_fonts
            for c in self.store.chars_of(f)
            if self.store.has(self.content_font, c)
        ]
        if not self.pairs:
            raise SamplingError("no (font, char) pair has both target and content glyphs")

    def _style_negative(self, font_id: int, rng: np.random.Generator) -> GlyphImage:
        others = [f for f in self.seen_fonts if f != font_id]
        neg_font = int(others[rng.integers(len(others))])
        chars = self.store.chars_of(neg_font)
        return self.store.get(neg_font, int(chars[rng.integers(len(chars))]))

    def _content_negative(self, char_id: int, rng: np.random.Generator) -> GlyphImage:
        others = [c for c in self.content_chars if c != char_id]
        return self.store.get(self.content_font, int(others[rng.integers(len(others))]))

    def sample(self, batch_size: int, rng: np.random.Generator) -> TrainingBatch:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        batch = TrainingBatch([], [], [], [], [])
        guard = 0
        while len(batch) < batch_size:
            guard += 1
            if guard > 100 * batch_size:
                raise SamplingError("cannot assemble a batch; too many unusable pairs")
            font_id, char_id = self.pairs[rng.integers(len(self.pairs))]
            try:
                style_ref = self.selector.select(font_id, char_id)
            except SelectionError:
                continue  # unusable pair; resample
            self._append(batch, font_id, char_id, style_ref, rng)
        return batch

    def batch_from_pairs(
        self, pairs: list[tuple[int, int]], rng: np.random.Generator
    ) -> TrainingBatch | None:
        """Batch over fixed target pairs (epoch mode); skips unusable pairs."""
        batch = TrainingBatch([], [], [], [], [])
        for font_id, char_id in pairs:
            try:
                style_ref = self.selector.select(font_id, char_id)
            except SelectionError:
                continue
            self._append(batch, font_id, char_id, style_ref, rng)
        return batch if len(batch) else None

    def _append(self, batch, font_id, char_id, style_ref, rng):
        batch.style_refs.append(style_ref)
        batch.content_refs.append(self.store.get(self.content_font, char_id))
        batch.targets.append(self.store.get(font_id, char_id))
        batch.style_negatives.append(self._style_negative(font_id, rng))
        batch.content_negatives.append(self._content_negative(char_id, rng))


def sample_training_batch(
    store: GlyphStore,
    selector: ReferenceSelector,
    batch_size: int,
    rng_seed: int,
) -> TrainingBatch:
    """One-shot sampling entry point; identical seed gives identical batches."""
    sampler = BatchSampler(store, selector)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng_seed)))
    return sampler.sample(batch_size, rng)

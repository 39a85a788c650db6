"""Few-shot glyph generation with stroke-matching reference selection."""

from .glyphs import FontCatalog, GlyphImage, GlyphStore, Triplet, binarize, load_dataset
from .skeleton import SkeletonGraph, build_graph, skeletonize
from .strokes import (
    Stroke,
    StrokeDescriptor,
    decompose_strokes,
    describe_stroke,
    glyph_descriptors,
    glyph_similarity,
    similarity,
)
from .selection import (
    CandidatePool,
    PreferenceTable,
    ReferenceSelector,
    build_pools,
    build_preference_table,
    load_preference_table,
    save_preference_table,
    select_reference,
)
from .losses import CircleParams, LossReport, LossWeights
from .training import TrainConfig, Trainer, generate_glyphs, load_generator
from .metrics import MetricReport, evaluate, render_table

__all__ = [
    "FontCatalog",
    "GlyphImage",
    "GlyphStore",
    "Triplet",
    "binarize",
    "load_dataset",
    "SkeletonGraph",
    "build_graph",
    "skeletonize",
    "Stroke",
    "StrokeDescriptor",
    "decompose_strokes",
    "describe_stroke",
    "glyph_descriptors",
    "glyph_similarity",
    "similarity",
    "CandidatePool",
    "PreferenceTable",
    "ReferenceSelector",
    "build_pools",
    "build_preference_table",
    "load_preference_table",
    "save_preference_table",
    "select_reference",
    "CircleParams",
    "LossReport",
    "LossWeights",
    "TrainConfig",
    "Trainer",
    "generate_glyphs",
    "load_generator",
    "MetricReport",
    "evaluate",
    "render_table",
]

__version__ = "0.1.0"

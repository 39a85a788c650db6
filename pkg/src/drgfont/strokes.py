"""Stroke decomposition and structural similarity between skeletons.

A stroke is a maximal skeleton path running between salient points with no
salient interior.  Connected components without any salient point (pure
rings) form a single closed stroke.  Each stroke is summarized by a 10-dim
descriptor (normalized length, average curvature, 8-bin orientation
histogram); two skeletons are compared by mean-of-row/column-max cosine
similarity over their descriptor sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .glyphs import GlyphImage, binarize
from .skeleton import Coord, SkeletonGraph, build_graph, skeletonize

HIST_BINS = 8


@dataclass
class Stroke:
    """Ordered skeleton pixels; consecutive entries are 8-neighbors."""

    points: list[Coord]

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class StrokeDescriptor:
    norm_length: float
    avg_curvature: float
    orient_hist: np.ndarray  # HIST_BINS entries, sums to 1 (or all zero)

    def vector(self) -> np.ndarray:
        """Flattened 10-dim descriptor."""
        return np.concatenate(([self.norm_length, self.avg_curvature], self.orient_hist))


def _canonical(points: list[Coord]) -> list[Coord]:
    """Fix traversal direction: smaller endpoint first, ties broken along
    the path (which orients closed strokes toward the smaller neighbor)."""
    rev = points[::-1]
    return points if points <= rev else rev


def decompose_strokes(graph: SkeletonGraph) -> list[Stroke]:
    """Split a skeleton graph into strokes covering every pixel.

    Output order is deterministic: strokes sorted lexicographically by their
    point sequences.
    """
    strokes: list[list[Coord]] = []
    visited_edges: set[frozenset[Coord]] = set()
    covered: set[Coord] = set()

    for start in sorted(graph.salient):
        if graph.degree(start) == 0:
            strokes.append([start])
            covered.add(start)
            continue
        for first in graph.adjacency[start]:
            edge = frozenset((start, first))
            if edge in visited_edges:
                continue
            visited_edges.add(edge)
            path = [start, first]
            prev, cur = start, first
            while cur not in graph.salient:
                nxt = next(q for q in graph.adjacency[cur] if q != prev)
                visited_edges.add(frozenset((cur, nxt)))
                path.append(nxt)
                prev, cur = cur, nxt
            strokes.append(_canonical(path))
            covered.update(path)

    # components with no salient point are pure cycles; emit one closed
    # stroke per cycle starting from its smallest pixel
    leftover = sorted(set(graph.nodes) - covered)
    remaining = set(leftover)
    for seed in leftover:
        if seed not in remaining:
            continue
        path = [seed]
        prev: Coord | None = None
        cur = seed
        while True:
            nbrs = [q for q in graph.adjacency[cur] if q != prev]
            nxt = min(nbrs)
            path.append(nxt)
            prev, cur = cur, nxt
            if cur == seed:
                break
        remaining.difference_update(path)
        strokes.append(_canonical(path))
        covered.update(path)

    return [Stroke(p) for p in sorted(strokes)]


def _wrap_angle(d: np.ndarray) -> np.ndarray:
    """Wrap angle differences into (-pi, pi]."""
    return math.pi - np.mod(math.pi - d, 2.0 * math.pi)


def describe_stroke(stroke: Stroke, image_diag: float) -> StrokeDescriptor:
    """Summarize a stroke into its 10-dim descriptor.

    Length is the summed Euclidean segment length divided by the image
    diagonal.  Segment orientations come from the two-argument arctangent of
    consecutive point differences; curvature is the mean absolute wrapped
    orientation change.  The histogram uses 8 half-open bins over [-pi, pi]
    with pi folded into the last bin.  A single-point stroke maps to the
    all-zero descriptor.
    """
    if image_diag <= 0:
        raise ValueError("image_diag must be positive")
    pts = np.asarray(_canonical(stroke.points), dtype=np.float64)
    if len(pts) < 2:
        return StrokeDescriptor(0.0, 0.0, np.zeros(HIST_BINS))
    deltas = pts[1:] - pts[:-1]
    seg_len = np.hypot(deltas[:, 0], deltas[:, 1])
    norm_length = float(seg_len.sum() / image_diag)

    theta = np.arctan2(deltas[:, 0], deltas[:, 1])
    if len(theta) >= 2:
        turns = _wrap_angle(np.diff(theta))
        avg_curvature = float(np.mean(np.abs(turns)))
    else:
        avg_curvature = 0.0

    idx = np.floor((theta + math.pi) / (math.pi / 4.0)).astype(int)
    idx[idx == HIST_BINS] = HIST_BINS - 1  # theta == pi folds into the last bin
    hist = np.bincount(idx, minlength=HIST_BINS).astype(np.float64)
    hist /= hist.sum()
    return StrokeDescriptor(norm_length, avg_curvature, hist)


def similarity_matrix(a_desc: list[StrokeDescriptor], b_desc: list[StrokeDescriptor]) -> np.ndarray:
    """Pairwise cosine similarities; a zero-norm descriptor scores 0."""
    a = np.stack([d.vector() for d in a_desc])
    b = np.stack([d.vector() for d in b_desc])
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.outer(na, nb)
    dots = a @ b.T
    out = np.zeros_like(dots)
    np.divide(dots, denom, out=out, where=denom > 0)
    return out


def similarity(a_desc: list[StrokeDescriptor], b_desc: list[StrokeDescriptor]) -> float:
    """Structural similarity of two descriptor sets.

    Mean of the row maxima plus mean of the column maxima, halved; this keeps
    the score symmetric under uneven stroke counts.  Either side empty gives 0.
    """
    if not a_desc or not b_desc:
        return 0.0
    s = similarity_matrix(a_desc, b_desc)
    return float(0.5 * (s.max(axis=1).mean() + s.max(axis=0).mean()))


def glyph_descriptors(
    img: GlyphImage | np.ndarray, threshold: float = 0.5
) -> list[StrokeDescriptor]:
    """Full pipeline: binarize, thin, split into strokes, describe."""
    pixels = img.pixels if isinstance(img, GlyphImage) else np.asarray(img, dtype=np.float64)
    mask = binarize(pixels, threshold)
    skel = skeletonize(mask)
    graph = build_graph(skel)
    diag = math.hypot(*pixels.shape)
    return [describe_stroke(s, diag) for s in decompose_strokes(graph)]


def glyph_similarity(
    a: GlyphImage | np.ndarray, b: GlyphImage | np.ndarray, threshold: float = 0.5
) -> float:
    """Structural similarity score between two glyph images."""
    return similarity(glyph_descriptors(a, threshold), glyph_descriptors(b, threshold))

"""Binary mask thinning and skeleton pixel graphs.

The thinning operator is the classic two-subiteration parallel scheme
(Zhang-Suen), iterated to a fixed point, followed by a deterministic cleanup
that removes redundant pixels from any remaining fully-inked 2x2 block.  The
whole operator repeats until globally stable, which makes it idempotent by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Ring order N, NE, E, SE, S, SW, W, NW used for both neighbor shifts and
# transition counting.
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _shifted(mask: np.ndarray) -> list[np.ndarray]:
    """Neighbor planes in ring order; outside pixels read as 0."""
    h, w = mask.shape
    p = np.pad(mask, 1)
    return [p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in _RING]


def _thin_once(mask: np.ndarray) -> tuple[np.ndarray, bool]:
    """One full iteration (both subiterations) of parallel thinning."""
    changed = False
    for phase in (0, 1):
        ring = _shifted(mask)
        n, _, e, _, s, _, w, _ = ring
        b = np.zeros(mask.shape, dtype=np.int16)
        a = np.zeros(mask.shape, dtype=np.int16)
        for k in range(8):
            b += ring[k]
            a += (ring[k] == 0) & (ring[(k + 1) % 8] == 1)
        if phase == 0:
            keep_struct = ((n & e & s) == 0) & ((e & s & w) == 0)
        else:
            keep_struct = ((n & e & w) == 0) & ((n & s & w) == 0)
        kill = mask.astype(bool) & (b >= 2) & (b <= 6) & (a == 1) & keep_struct
        if kill.any():
            mask = mask & ~kill
            changed = True
    return mask, changed


def _block_members(mask: np.ndarray) -> np.ndarray:
    """Pixels that belong to at least one fully-inked 2x2 block."""
    tl = mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]
    members = np.zeros_like(mask)
    members[:-1, :-1] |= tl
    members[:-1, 1:] |= tl
    members[1:, :-1] |= tl
    members[1:, 1:] |= tl
    return members


def _is_simple(mask: np.ndarray, r: int, c: int) -> bool:
    """True when deleting (r, c) preserves local connectivity.

    Requires the inked neighbors to form a single 8-connected cluster and at
    least one 4-neighbor to be background.
    """
    h, w = mask.shape
    pts = []
    four_bg = False
    for dr, dc in _RING:
        rr, cc = r + dr, c + dc
        ink = 0 <= rr < h and 0 <= cc < w and mask[rr, cc]
        if ink:
            pts.append((dr, dc))
        elif dr == 0 or dc == 0:
            four_bg = True
    if len(pts) <= 1 or not four_bg:
        return False
    # union-find over at most 8 points
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if max(abs(pts[i][0] - pts[j][0]), abs(pts[i][1] - pts[j][1])) == 1:
                parent[find(i)] = find(j)
    return len({find(i) for i in range(len(pts))}) == 1


def _cleanup_blocks(mask: np.ndarray) -> tuple[np.ndarray, bool]:
    """Delete simple pixels out of fully-inked 2x2 blocks, raster order."""
    changed = False
    while True:
        members = _block_members(mask)
        if not members.any():
            return mask, changed
        deleted = False
        for r, c in zip(*np.nonzero(members)):
            if _is_simple(mask, int(r), int(c)):
                mask = mask.copy()
                mask[r, c] = False
                changed = True
                deleted = True
                break
        if not deleted:
            # every block pixel is a connectivity-critical junction core;
            # deleting any of them would split the skeleton
            return mask, changed


def _components(mask: np.ndarray) -> list[list[Coord]]:
    """8-connected components as coordinate lists (BFS, raster seed order)."""
    ink = {(int(r), int(c)) for r, c in zip(*np.nonzero(mask))}
    comps = []
    while ink:
        seed = min(ink)
        comp = []
        stack = [seed]
        ink.discard(seed)
        while stack:
            r, c = stack.pop()
            comp.append((r, c))
            for dr, dc in _RING:
                q = (r + dr, c + dc)
                if q in ink:
                    ink.discard(q)
                    stack.append(q)
        comps.append(comp)
    return comps


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Thin a binary ink mask to a 1-px-wide skeleton.

    The result is a subset of the input ink, preserves connected components,
    and is a fixed point of the operator (re-skeletonizing changes nothing).
    Tiny blobs the parallel thinning would erase completely (2x2 squares)
    survive as a single dot near their centroid.  An empty mask yields an
    empty skeleton.
    """
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError("skeletonize expects a 2-D mask")
    uniq = np.unique(arr)
    if not np.all(np.isin(uniq, (0, 1))):
        raise ValueError("skeletonize expects a binary mask")
    work = arr.astype(bool)
    if not work.any():
        return work
    original = work.copy()
    while True:
        changed_any = False
        while True:
            work, changed = _thin_once(work)
            changed_any = changed_any or changed
            if not changed:
                break
        work, cleaned = _cleanup_blocks(work)
        changed_any = changed_any or cleaned
        if not changed_any:
            break
    for comp in _components(original):
        if any(work[r, c] for r, c in comp):
            continue
        centroid = np.mean(comp, axis=0)
        r, c = min(comp, key=lambda p: (np.hypot(p[0] - centroid[0], p[1] - centroid[1]), p))
        work[r, c] = True
    return work


Coord = tuple[int, int]


@dataclass
class SkeletonGraph:
    """Skeleton pixels as an 8-connected graph.

    Diagonal edges already covered by a 4-connected ink path of length 2 are
    dropped; without this, every perpendicular crossing reads as a cluster of
    junctions instead of a single one.  Salient points are the endpoints
    (degree 1), junctions (degree > 2), and isolated dots (degree 0).
    """

    nodes: list[Coord]
    adjacency: dict[Coord, tuple[Coord, ...]]
    salient: frozenset[Coord]

    def degree(self, p: Coord) -> int:
        return len(self.adjacency[p])


def build_graph(skeleton: np.ndarray) -> SkeletonGraph:
    """Bundle skeleton pixels into a pixel graph with its salient set."""
    skel = np.asarray(skeleton).astype(bool)
    ink = {(int(r), int(c)) for r, c in zip(*np.nonzero(skel))}
    adjacency: dict[Coord, tuple[Coord, ...]] = {}
    for r, c in sorted(ink):
        nbrs = []
        for dr, dc in _RING:
            q = (r + dr, c + dc)
            if q not in ink:
                continue
            if dr != 0 and dc != 0 and ((r, c + dc) in ink or (r + dr, c) in ink):
                continue
            nbrs.append(q)
        adjacency[(r, c)] = tuple(sorted(nbrs))
    salient = frozenset(p for p, nbrs in adjacency.items() if len(nbrs) != 2)
    return SkeletonGraph(nodes=sorted(ink), adjacency=adjacency, salient=salient)


def save_debug_png(skeleton: np.ndarray, graph: SkeletonGraph, path) -> None:
    """Dump the skeleton as a PNG with salient points highlighted."""
    from PIL import Image

    skel = np.asarray(skeleton).astype(bool)
    canvas = np.zeros(skel.shape, dtype=np.uint8)
    canvas[skel] = 128
    for r, c in graph.salient:
        canvas[r, c] = 255
    Image.fromarray(canvas, mode="L").save(path)

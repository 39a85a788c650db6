import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drgfont.skeleton import build_graph, skeletonize

from synth import bar_mask, plus_mask, ring_mask


def naive_thin(mask):
    """Independent per-pixel reference implementation of the two-subiteration
    parallel thinning scheme (no cleanup pass)."""
    img = mask.astype(np.uint8).copy()
    h, w = img.shape

    def ring(i, j):
        def at(r, c):
            return int(img[r, c]) if 0 <= r < h and 0 <= c < w else 0

        return [
            at(i - 1, j), at(i - 1, j + 1), at(i, j + 1), at(i + 1, j + 1),
            at(i + 1, j), at(i + 1, j - 1), at(i, j - 1), at(i - 1, j - 1),
        ]

    changed = True
    while changed:
        changed = False
        for phase in (0, 1):
            kill = []
            for i in range(h):
                for j in range(w):
                    if not img[i, j]:
                        continue
                    p = ring(i, j)
                    b = sum(p)
                    if not 2 <= b <= 6:
                        continue
                    a = sum(p[k] == 0 and p[(k + 1) % 8] == 1 for k in range(8))
                    if a != 1:
                        continue
                    p2, _, p4, _, p6, _, p8, _ = p
                    if phase == 0 and (p2 * p4 * p6 or p4 * p6 * p8):
                        continue
                    if phase == 1 and (p2 * p4 * p8 or p2 * p6 * p8):
                        continue
                    kill.append((i, j))
            for i, j in kill:
                img[i, j] = 0
            changed = changed or bool(kill)
    return img.astype(bool)


def has_full_2x2(mask):
    return bool((mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]).any())


@st.composite
def stroke_masks(draw):
    """Glyph-like masks: a few thick segments plus an optional ring."""
    size = 32
    m = np.zeros((size, size), dtype=bool)
    n_seg = draw(st.integers(1, 4))
    for _ in range(n_seg):
        r0 = draw(st.integers(2, size - 3))
        c0 = draw(st.integers(2, size - 3))
        r1 = draw(st.integers(2, size - 3))
        c1 = draw(st.integers(2, size - 3))
        t = draw(st.integers(1, 3))
        steps = max(abs(r1 - r0), abs(c1 - c0)) + 1
        for k in range(steps):
            r = round(r0 + (r1 - r0) * k / max(steps - 1, 1))
            c = round(c0 + (c1 - c0) * k / max(steps - 1, 1))
            m[max(0, r - t) : r + t, max(0, c - t) : c + t] = True
    if draw(st.booleans()):
        rad = draw(st.integers(5, 10))
        yy, xx = np.mgrid[0:size, 0:size]
        rr = np.hypot(yy - size / 2, xx - size / 2)
        m |= (rr >= rad - 1.5) & (rr <= rad + 1.5)
    return m


class TestSkeletonize:
    def test_empty_mask(self):
        out = skeletonize(np.zeros((16, 16), dtype=bool))
        assert not out.any()

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError, match="binary"):
            skeletonize(np.full((8, 8), 0.5))

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError, match="2-D"):
            skeletonize(np.zeros((2, 8, 8)))

    def test_thick_bar_reduces_to_single_path(self):
        m = bar_mask(thickness=5)
        sk = skeletonize(m)
        assert np.array_equal(sk, naive_thin(m))
        rows = set(np.nonzero(sk)[0])
        assert len(rows) == 1
        g = build_graph(sk)
        assert sum(1 for n in g.nodes if g.degree(n) == 1) == 2

    def test_plus_has_single_degree4_pixel(self):
        sk = skeletonize(plus_mask(thickness=5))
        assert np.array_equal(sk, naive_thin(plus_mask(thickness=5)))
        g = build_graph(sk)
        degree4 = [n for n in g.nodes if g.degree(n) == 4]
        assert len(degree4) == 1

    @pytest.mark.parametrize("mask_fn", [bar_mask, plus_mask, ring_mask])
    def test_idempotent_on_fixtures(self, mask_fn):
        once = skeletonize(mask_fn())
        assert np.array_equal(skeletonize(once), once)

    @settings(max_examples=30, deadline=None)
    @given(stroke_masks())
    def test_idempotent_property(self, mask):
        once = skeletonize(mask)
        assert np.array_equal(skeletonize(once), once)

    @settings(max_examples=30, deadline=None)
    @given(stroke_masks())
    def test_ink_containment(self, mask):
        assert not (skeletonize(mask) & ~mask).any()

    @settings(max_examples=30, deadline=None)
    @given(stroke_masks())
    def test_unit_width(self, mask):
        assert not has_full_2x2(skeletonize(mask))

    @settings(max_examples=30, deadline=None)
    @given(stroke_masks())
    def test_components_preserved(self, mask):
        from scipy import ndimage

        eight = np.ones((3, 3), dtype=int)
        _, n_before = ndimage.label(mask, structure=eight)
        _, n_after = ndimage.label(skeletonize(mask), structure=eight)
        assert n_before == n_after


class TestBuildGraph:
    def test_straight_path_two_salient(self):
        sk = np.zeros((16, 16), dtype=bool)
        sk[8, 3:13] = True
        g = build_graph(sk)
        assert len(g.nodes) == 10
        assert len(g.salient) == 2
        assert all(g.degree(p) == 1 for p in g.salient)

    def test_plus_skeleton_five_salient(self):
        g = build_graph(skeletonize(plus_mask(thickness=5)))
        assert len(g.salient) == 5
        degs = sorted(g.degree(p) for p in g.salient)
        assert degs == [1, 1, 1, 1, 4]

    def test_isolated_pixel_is_salient(self):
        sk = np.zeros((8, 8), dtype=bool)
        sk[4, 4] = True
        g = build_graph(sk)
        assert g.nodes == [(4, 4)]
        assert g.degree((4, 4)) == 0
        assert (4, 4) in g.salient

    def test_diagonal_shortcut_pruned_in_staircase(self):
        sk = np.zeros((8, 8), dtype=bool)
        sk[2, 2] = sk[2, 3] = sk[3, 4] = sk[3, 5] = True
        g = build_graph(sk)
        # (2,3)-(3,4) is a genuine diagonal step; no triangle edges exist
        assert g.degree((2, 3)) == 2
        assert g.degree((3, 4)) == 2

    @settings(max_examples=30, deadline=None)
    @given(stroke_masks())
    def test_degree_rule(self, mask):
        g = build_graph(skeletonize(mask))
        for p in g.nodes:
            if p in g.salient:
                assert g.degree(p) != 2
            else:
                assert g.degree(p) == 2

    @settings(max_examples=20, deadline=None)
    @given(stroke_masks())
    def test_pruning_preserves_connectivity(self, mask):
        sk = skeletonize(mask)
        g = build_graph(sk)
        if not g.nodes:
            return
        from scipy import ndimage

        _, n_pixel_components = ndimage.label(sk, structure=np.ones((3, 3), dtype=int))
        # BFS over pruned adjacency must find the same number of components
        seen = set()
        comps = 0
        for start in g.nodes:
            if start in seen:
                continue
            comps += 1
            stack = [start]
            while stack:
                p = stack.pop()
                if p in seen:
                    continue
                seen.add(p)
                stack.extend(q for q in g.adjacency[p] if q not in seen)
        assert comps == n_pixel_components


class TestDebugDump:
    def test_writes_png(self, tmp_path):
        from drgfont.skeleton import save_debug_png

        sk = skeletonize(plus_mask())
        g = build_graph(sk)
        out = tmp_path / "skel.png"
        save_debug_png(sk, g, out)
        from PIL import Image

        arr = np.asarray(Image.open(out))
        assert (arr == 255).sum() == len(g.salient)

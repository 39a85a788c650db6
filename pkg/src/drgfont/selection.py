"""Style-reference selection from candidate pools.

For every (font, target char) pair we rank a small candidate pool of that
font's characters by structural similarity against the content-font rendering
of the target, and keep the ranking in a preference table.  Selection is the
argmax; ties break toward the smaller char id.  Tables are built offline
(scores do not depend on training) and persist in a versioned binary file.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .glyphs import GlyphImage, GlyphStore
from .strokes import glyph_descriptors, similarity

log = logging.getLogger(__name__)

MAGIC = b"DRGPREF1"
_SENTINEL_CHAR = 0xFFFF
_SENTINEL_SCORE = -1.0
DEFAULT_POOL_SIZE = 10


class SelectionError(Exception):
    """No usable candidate for a requested (font, char) pair."""


@dataclass
class CandidatePool:
    """Candidate reference characters available for one font."""

    font_id: int
    char_ids: list[int]


def build_pools(
    store: GlyphStore,
    m_prime: int = DEFAULT_POOL_SIZE,
    seed: int = 0,
    font_ids: list[int] | None = None,
) -> dict[int, CandidatePool]:
    """Sample a fixed candidate pool per font.

    Pools are drawn once with a per-font seeded RNG and meant to be persisted,
    so train and test see identical candidates.  Fonts with fewer than
    ``m_prime`` glyphs contribute what they have.
    """
    if font_ids is None:
        font_ids = list(range(store.catalog.n_fonts))
    pools = {}
    for fid in font_ids:
        available = store.chars_of(fid)
        if not available:
            log.warning("font %s has no glyphs; empty pool", store.catalog.font_names[fid])
            pools[fid] = CandidatePool(fid, [])
            continue
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, fid])))
        k = min(m_prime, len(available))
        members = sorted(int(c) for c in rng.choice(available, size=k, replace=False))
        pools[fid] = CandidatePool(fid, members)
    return pools


Ranking = list[tuple[int, float]]  # (char_id, score), score descending


@dataclass
class PreferenceTable:
    """Ranked candidate references for every (font, target char) pair."""

    n_fonts: int
    n_chars: int
    m_prime: int
    entries: dict[tuple[int, int], Ranking] = field(default_factory=dict)
    pools: dict[int, list[int]] = field(default_factory=dict)

    def ranking(self, font_id: int, target_char_id: int) -> Ranking:
        return self.entries.get((font_id, target_char_id), [])


def rank_candidates(
    target_desc: list, candidates: list[tuple[int, list]]
) -> Ranking:
    """Sort (char_id, descriptor set) candidates by similarity to the target.

    Descending score; equal scores order by ascending char id.
    """
    scored = [(cid, similarity(target_desc, desc)) for cid, desc in candidates]
    return sorted(scored, key=lambda t: (-t[1], t[0]))


def build_preference_table(
    store: GlyphStore,
    pools: dict[int, CandidatePool],
    threshold: float = 0.5,
) -> PreferenceTable:
    """Score every candidate against every target character.

    Targets are the characters available in the content font.  A candidate
    never competes for its own character (the selected reference must differ
    from the target), and candidates missing from disk are dropped with a
    warning.
    """
    catalog = store.catalog
    content = catalog.content_font
    targets = store.chars_of(content)
    table = PreferenceTable(
        n_fonts=catalog.n_fonts,
        n_chars=catalog.n_chars,
        m_prime=max((len(p.char_ids) for p in pools.values()), default=DEFAULT_POOL_SIZE),
        pools={fid: list(p.char_ids) for fid, p in pools.items()},
    )

    target_desc = {b: glyph_descriptors(store.get(content, b), threshold) for b in targets}
    for fid, pool in pools.items():
        cand_desc = []
        for cid in pool.char_ids:
            if not store.has(fid, cid):
                log.warning(
                    "candidate U+%04X missing for font %s; dropped",
                    catalog.codepoints[cid],
                    catalog.font_names[fid],
                )
                continue
            cand_desc.append((cid, glyph_descriptors(store.get(fid, cid), threshold)))
        for b in targets:
            usable = [(cid, d) for cid, d in cand_desc if cid != b]
            table.entries[(fid, b)] = rank_candidates(target_desc[b], usable)
    return table


def select_reference(table: PreferenceTable, font_id: int, target_char_id: int) -> tuple[int, float]:
    """Best-ranked candidate char for a (font, target) pair."""
    ranking = table.ranking(font_id, target_char_id)
    if not ranking:
        raise SelectionError(f"no candidates for (font {font_id}, char {target_char_id})")
    return ranking[0]


class ReferenceSelector:
    """Glyph-level selection front end, with a seeded random fallback.

    With ranking disabled (the ablation switch) selection degenerates to a
    uniform draw from the pool, still excluding the target character.
    """

    def __init__(
        self,
        store: GlyphStore,
        table: PreferenceTable,
        use_ranking: bool = True,
        seed: int = 0,
    ):
        self.store = store
        self.table = table
        self.use_ranking = use_ranking
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5E1])))

    def select(self, font_id: int, target_char_id: int) -> GlyphImage:
        if self.use_ranking:
            cid, _ = select_reference(self.table, font_id, target_char_id)
            return self.store.get(font_id, cid)
        pool = [c for c in self.table.pools.get(font_id, []) if c != target_char_id]
        pool = [c for c in pool if self.store.has(font_id, c)]
        if not pool:
            raise SelectionError(f"no candidates for (font {font_id}, char {target_char_id})")
        return self.store.get(font_id, int(self._rng.choice(pool)))


def save_preference_table(table: PreferenceTable, path: str | Path) -> None:
    """Write the versioned binary table.

    Layout: 8-byte magic, three little-endian u32 (fonts, chars, pool size),
    then one fixed-length record per (font, char) in font-major order of
    ``pool_size - 1`` (u16 char id, f32 score) pairs sorted descending, padded
    with (0xFFFF, -1.0).  Rankings longer than the record (target outside the
    pool) keep their best entries.
    """
    path = Path(path)
    slots = max(table.m_prime - 1, 0)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", table.n_fonts, table.n_chars, table.m_prime))
        for fid in range(table.n_fonts):
            for cid in range(table.n_chars):
                ranking = table.ranking(fid, cid)[:slots]
                for char_id, score in ranking:
                    fh.write(struct.pack("<Hf", char_id, score))
                for _ in range(slots - len(ranking)):
                    fh.write(struct.pack("<Hf", _SENTINEL_CHAR, _SENTINEL_SCORE))


def load_preference_table(path: str | Path) -> PreferenceTable:
    """Read a table written by :func:`save_preference_table`.

    Pools are reconstructed as the union of ranked char ids per font.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path} is not a preference table (bad magic)")
    n_fonts, n_chars, m_prime = struct.unpack_from("<III", data, 8)
    slots = max(m_prime - 1, 0)
    table = PreferenceTable(n_fonts=n_fonts, n_chars=n_chars, m_prime=m_prime)
    offset = 8 + 12
    expected = offset + n_fonts * n_chars * slots * 6
    if len(data) != expected:
        raise ValueError(f"{path} is truncated: {len(data)} bytes, expected {expected}")
    pools: dict[int, set[int]] = {fid: set() for fid in range(n_fonts)}
    for fid in range(n_fonts):
        for cid in range(n_chars):
            ranking = []
            for _ in range(slots):
                char_id, score = struct.unpack_from("<Hf", data, offset)
                offset += 6
                if char_id != _SENTINEL_CHAR:
                    ranking.append((char_id, float(score)))
                    pools[fid].add(char_id)
            table.entries[(fid, cid)] = ranking
    table.pools = {fid: sorted(members) for fid, members in pools.items()}
    return table

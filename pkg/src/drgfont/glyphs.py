"""Dataset ingestion, binarization, and glyph access.

Datasets live on disk as ``<root>/<font_name>/<4-hex-digit codepoint>.png``.
Fonts may have partial character coverage; missing glyphs are recorded as
absent rather than treated as errors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)


class DatasetError(Exception):
    """A dataset directory or manifest cannot be used."""


class GlyphLoadError(Exception):
    """A glyph file exists but cannot be decoded."""


@dataclass
class GlyphImage:
    """Single-channel glyph bitmap with its font and character identity."""

    pixels: np.ndarray  # H x W float array, values in [0, 1]
    font_id: int
    char_id: int

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise ValueError(f"glyph pixels must be 2-D, got shape {self.pixels.shape}")
        lo, hi = float(self.pixels.min(initial=0.0)), float(self.pixels.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"glyph pixel values outside [0, 1]: min={lo}, max={hi}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass
class FontCatalog:
    """Font and character index space plus the seen/unseen split.

    ``content_font`` is the fixed standard font supplying content references;
    it always belongs to the seen split and carries a style label like any
    other font.
    """

    font_names: list[str]
    codepoints: list[int]
    content_font: int
    seen: frozenset[int]
    unseen: frozenset[int]

    def __post_init__(self):
        n = len(self.font_names)
        if self.seen | self.unseen != frozenset(range(n)):
            raise DatasetError("seen/unseen split does not cover all fonts")
        if self.seen & self.unseen:
            raise DatasetError("seen and unseen splits overlap")
        if self.content_font not in self.seen:
            raise DatasetError(
                f"content font {self.font_names[self.content_font]!r} must be in the seen split"
            )

    @property
    def n_fonts(self) -> int:
        return len(self.font_names)

    @property
    def n_chars(self) -> int:
        return len(self.codepoints)

    @property
    def style_classes(self) -> list[int]:
        """Seen font ids in classification-label order."""
        return sorted(self.seen)

    def style_class_of(self, font_id: int) -> int:
        """Classification label for a seen font."""
        classes = self.style_classes
        try:
            return classes.index(font_id)
        except ValueError:
            raise KeyError(f"font {font_id} is not in the seen split") from None

    def font_id_of(self, name: str) -> int:
        try:
            return self.font_names.index(name)
        except ValueError:
            raise KeyError(f"unknown font name {name!r}") from None

    def char_id_of(self, codepoint: int) -> int:
        try:
            return self.codepoints.index(codepoint)
        except ValueError:
            raise KeyError(f"unknown codepoint U+{codepoint:04X}") from None


@dataclass
class Triplet:
    """Anchor/positive/negative glyphs for contrastive supervision.

    mode="style":   anchor and positive share a font, negative differs.
    mode="content": anchor and positive share a character, negative differs.
    """

    anchor: GlyphImage
    positive: GlyphImage
    negative: GlyphImage
    mode: str

    def __post_init__(self):
        if self.mode == "style":
            ok = (
                self.anchor.font_id == self.positive.font_id
                and self.anchor.font_id != self.negative.font_id
            )
        elif self.mode == "content":
            ok = (
                self.anchor.char_id == self.positive.char_id
                and self.anchor.char_id != self.negative.char_id
            )
        else:
            raise ValueError(f"unknown triplet mode {self.mode!r}")
        if not ok:
            raise ValueError(f"triplet labels violate {self.mode} constraints")


def _load_pixels(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            gray = im.convert("L")
            arr = np.asarray(gray, dtype=np.float64) / 255.0
    except Exception as exc:  # noqa: BLE001 - re-raise with the offending path
        raise GlyphLoadError(f"cannot read glyph image {path}") from exc
    return arr


class GlyphStore:
    """Read-only accessor over a scanned dataset.

    Loading is lazy and cached; after construction the store is safe to share
    across parallel workers.
    """

    def __init__(self, catalog: FontCatalog, paths: dict[tuple[int, int], Path]):
        self.catalog = catalog
        self._paths = paths
        self._cache: dict[tuple[int, int], np.ndarray] = {}
        self._resolution: tuple[int, int] | None = None

    def has(self, font_id: int, char_id: int) -> bool:
        return (font_id, char_id) in self._paths

    def chars_of(self, font_id: int) -> list[int]:
        """Char ids available for a font, ascending."""
        return sorted(c for (f, c) in self._paths if f == font_id)

    def get(self, font_id: int, char_id: int) -> GlyphImage:
        key = (font_id, char_id)
        pixels = self._cache.get(key)
        if pixels is None:
            try:
                path = self._paths[key]
            except KeyError:
                name = self.catalog.font_names[font_id]
                cp = self.catalog.codepoints[char_id]
                raise KeyError(f"font {name!r} has no glyph for U+{cp:04X}") from None
            pixels = _load_pixels(path)
            if self._resolution is None:
                self._resolution = pixels.shape
            elif pixels.shape != self._resolution:
                raise DatasetError(
                    f"glyph {path} has shape {pixels.shape}, expected {self._resolution}"
                )
            self._cache[key] = pixels
        return GlyphImage(pixels=pixels, font_id=font_id, char_id=char_id)

    @property
    def resolution(self) -> tuple[int, int]:
        if self._resolution is None:
            # resolve from any glyph
            f, c = next(iter(self._paths))
            self.get(f, c)
        return self._resolution


def _read_split_manifest(path: Path, font_names: list[str]) -> tuple[set[int], set[int]]:
    seen: set[int] = set()
    unseen: set[int] = set()
    by_name = {name: i for i, name in enumerate(font_names)}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("seen", "unseen"):
            raise DatasetError(f"{path}:{lineno}: expected '<font_name> <seen|unseen>'")
        name, tag = parts
        if name not in by_name:
            raise DatasetError(f"{path}:{lineno}: unknown font {name!r}")
        (seen if tag == "seen" else unseen).add(by_name[name])
    return seen, unseen


def load_dataset(
    root: str | Path,
    content_font: str | None = None,
    split_manifest: str | Path | None = None,
) -> GlyphStore:
    """Scan a dataset directory into a catalog-backed glyph store.

    Fonts are the subdirectories of ``root`` (sorted by name); characters are
    the union of codepoints found across fonts (sorted).  ``content_font``
    defaults to the first seen font.  Fonts not listed in the manifest
    default to seen.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    font_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not font_dirs:
        raise DatasetError(f"no fonts found under {root}")

    font_names = [p.name for p in font_dirs]
    found: dict[str, dict[int, Path]] = {}
    codepoints: set[int] = set()
    for fdir in font_dirs:
        glyphs: dict[int, Path] = {}
        for png in fdir.glob("*.png"):
            try:
                cp = int(png.stem, 16)
            except ValueError:
                log.warning("skipping non-codepoint file %s", png)
                continue
            glyphs[cp] = png
            codepoints.add(cp)
        found[fdir.name] = glyphs
    if not codepoints:
        raise DatasetError(f"no glyph images found under {root}")

    cps = sorted(codepoints)
    cp_index = {cp: i for i, cp in enumerate(cps)}
    paths = {
        (font_names.index(name), cp_index[cp]): path
        for name, glyphs in found.items()
        for cp, path in glyphs.items()
    }

    if split_manifest is not None:
        seen, unseen = _read_split_manifest(Path(split_manifest), font_names)
        seen |= set(range(len(font_names))) - seen - unseen
    else:
        seen, unseen = set(range(len(font_names))), set()

    if content_font is None:
        content_id = min(seen)
    else:
        if content_font not in font_names:
            raise DatasetError(f"content font {content_font!r} not found in dataset")
        content_id = font_names.index(content_font)

    catalog = FontCatalog(
        font_names=font_names,
        codepoints=cps,
        content_font=content_id,
        seen=frozenset(seen),
        unseen=frozenset(unseen),
    )
    return GlyphStore(catalog, paths)


def binarize(img: GlyphImage | np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold a glyph into an ink mask, auto-detecting ink polarity.

    The border of a glyph image is overwhelmingly background, so a majority
    vote over the 1-px frame decides whether ink is dark-on-light or
    light-on-dark.  Returns a boolean H x W array, True where ink is present.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    pixels = img.pixels if isinstance(img, GlyphImage) else np.asarray(img, dtype=np.float64)
    if pixels.ndim != 2:
        raise ValueError("binarize expects a single-channel image")
    border = np.concatenate([pixels[0], pixels[-1], pixels[1:-1, 0], pixels[1:-1, -1]])
    dark_background = float(np.mean(border < threshold)) > 0.5
    if dark_background:
        return pixels > threshold
    return pixels < threshold

import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

import synth  # noqa: E402


def write_custom_dataset(root: Path, fonts: dict[str, dict[int, np.ndarray]]) -> None:
    """Write arbitrary [0,1] arrays as a dataset tree."""
    for name, glyphs in fonts.items():
        fdir = root / name
        fdir.mkdir(parents=True, exist_ok=True)
        for cp, arr in glyphs.items():
            img = Image.fromarray(np.round(np.asarray(arr) * 255).astype(np.uint8), mode="L")
            img.save(fdir / f"{cp:04x}.png")


@pytest.fixture(scope="session")
def ttf_dataset_dir(tmp_path_factory):
    """5 TTF-rendered fonts x 10 uppercase chars, all seen."""
    root = tmp_path_factory.mktemp("ttf_data")
    synth.write_dataset(root, n_fonts=5, chars="ABCDEFGHIJ")
    return root


@pytest.fixture(scope="session")
def ttf_store(ttf_dataset_dir):
    from drgfont.glyphs import load_dataset

    return load_dataset(ttf_dataset_dir, split_manifest=ttf_dataset_dir / "split.txt")

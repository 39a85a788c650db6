"""Command-line entry point.

Subcommands: ``prefs build``, ``train``, ``generate``, ``evaluate``,
``smc score``.  Exit codes: 1 usage, 2 I/O failure, 3 numeric failure.
The ``DRGFONT_CACHE`` environment variable names the default directory for
derived artifacts (preference tables).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

log = logging.getLogger("drgfont")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def cache_dir() -> Path:
    return Path(os.environ.get("DRGFONT_CACHE", Path.cwd() / ".drgfont-cache"))


def _bool_flag(parser, name, help_text):
    parser.add_argument(name, choices=["on", "off"], default=None, help=help_text)


def build_parser() -> _Parser:
    parser = _Parser(prog="drgfont", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    prefs = sub.add_parser("prefs", help="preference table operations")
    prefs_sub = prefs.add_subparsers(dest="prefs_command", required=True)
    build = prefs_sub.add_parser("build", help="build and persist a preference table")
    build.add_argument("--root", required=True, help="dataset root directory")
    build.add_argument("--out", default=None, help="output table path")
    build.add_argument("--seed", type=int, required=True)
    build.add_argument("--m-prime", type=int, default=10, help="candidate pool size")
    build.add_argument("--content-font", default=None)
    build.add_argument("--split", default=None, help="split manifest path")

    train = sub.add_parser("train", help="run min-max training")
    train.add_argument("--root", required=True)
    train.add_argument("--out", required=True, help="checkpoint directory")
    train.add_argument("--seed", type=int, required=True)
    train.add_argument("--split", default=None, help="split manifest path")
    train.add_argument("--prefs", default=None, help="preference table file")
    train.add_argument("--config", default=None, help="key=value config file")
    train.add_argument("--resume", default=None, help="checkpoint to continue from")
    train.add_argument("--log-file", default=None)
    train.add_argument("--epochs", type=int, default=None)
    train.add_argument("--batch-size", type=int, default=None)
    train.add_argument("--lr", type=float, default=None)
    train.add_argument("--dtype", default=None)
    train.add_argument("--base-width", type=int, default=None)
    train.add_argument("--head-dim", type=int, default=None, choices=[128, 256, 512])
    train.add_argument("--checkpoint-every", type=int, default=None)
    train.add_argument("--max-steps", type=int, default=None)
    train.add_argument("--m-prime", type=int, default=None)
    train.add_argument("--content-font", default=None)
    _bool_flag(train, "--rs-train", "reference selection during training")
    _bool_flag(train, "--rs-test", "reference selection at test time")
    _bool_flag(train, "--cls", "auxiliary classification loss")
    _bool_flag(train, "--latent", "latent reconstruction loss")

    gen = sub.add_parser("generate", help="few-shot glyph synthesis")
    gen.add_argument("--checkpoint", required=True)
    gen.add_argument("--refs-dir", required=True, help="directory of reference <hex>.png files")
    gen.add_argument("--content-dir", required=True, help="standard-font glyph directory")
    gen.add_argument("--chars", required=True, help="characters, e.g. 'ABC' or hex codes 'U+0041,U+0042'")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--seed", type=int, default=0)
    _bool_flag(gen, "--rs", "rank references structurally (default: checkpoint setting)")

    ev = sub.add_parser("evaluate", help="metric report over a split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--root", required=True)
    ev.add_argument("--split-manifest", default=None)
    ev.add_argument("--split", choices=["seen", "unseen"], required=True)
    ev.add_argument("--prefs", required=True, help="preference table file (reference pools)")
    ev.add_argument("--content-font", default=None)
    ev.add_argument("--grid", default=None, help="write a side-by-side comparison PNG")
    ev.add_argument("--lpips", choices=["standin", "none"], default="standin")

    smc = sub.add_parser("smc", help="stroke matching comparator")
    smc_sub = smc.add_subparsers(dest="smc_command", required=True)
    score = smc_sub.add_parser("score", help="print the structural similarity of two images")
    score.add_argument("image_a")
    score.add_argument("image_b")
    score.add_argument("--debug-dir", default=None, help="dump skeleton PNGs with salient points")

    return parser


def _load_image(path: str) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise OSError(f"cannot read image {path}: {exc}") from exc


def _parse_chars(spec: str) -> list[int]:
    if "," in spec or spec.upper().startswith("U+"):
        cps = []
        for token in spec.split(","):
            token = token.strip()
            if not token:
                continue
            cps.append(int(token[2:], 16) if token.upper().startswith("U+") else ord(token))
        return cps
    return [ord(ch) for ch in spec]


def _cmd_prefs_build(args) -> int:
    import time

    from .glyphs import load_dataset
    from .selection import build_pools, build_preference_table, save_preference_table

    store = load_dataset(args.root, content_font=args.content_font, split_manifest=args.split)
    out = Path(args.out) if args.out else cache_dir() / "prefs.bin"
    out.parent.mkdir(parents=True, exist_ok=True)
    pools = build_pools(store, m_prime=args.m_prime, seed=args.seed)
    t0 = time.perf_counter()
    table = build_preference_table(store, pools)
    per_font = (time.perf_counter() - t0) / max(store.catalog.n_fonts, 1)
    save_preference_table(table, out)
    print(
        f"wrote {out} (fonts={table.n_fonts} chars={table.n_chars} "
        f"pool={table.m_prime}, {per_font * 1000:.0f} ms/font)"
    )
    return 0


def _run_config_from_args(args):
    from .config import build_run_config, read_config_file

    file_values = read_config_file(args.config) if args.config else {}
    flags = {
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "seed": args.seed,
        "dtype": args.dtype,
        "base_width": args.base_width,
        "head_dim": args.head_dim,
        "checkpoint_every": args.checkpoint_every,
        "max_steps": args.max_steps,
        "m_prime": args.m_prime,
        "content_font": args.content_font,
        "rs_train": args.rs_train,
        "rs_test": args.rs_test,
        "enable_cls": args.cls,
        "enable_latent": args.latent,
    }
    return build_run_config(file_values, flags)


def _cmd_train(args) -> int:
    from .glyphs import load_dataset
    from .selection import (
        build_pools,
        build_preference_table,
        load_preference_table,
        save_preference_table,
    )
    from .training import Trainer

    run = _run_config_from_args(args)
    store = load_dataset(args.root, content_font=run.content_font, split_manifest=args.split)
    if args.prefs:
        table = load_preference_table(args.prefs)
    else:
        prefs_path = cache_dir() / "prefs.bin"
        if prefs_path.exists():
            table = load_preference_table(prefs_path)
            log.info("loaded cached preference table %s", prefs_path)
        else:
            pools = build_pools(store, m_prime=run.m_prime, seed=run.train.seed)
            table = build_preference_table(store, pools)
            prefs_path.parent.mkdir(parents=True, exist_ok=True)
            save_preference_table(table, prefs_path)
            log.info("cached preference table at %s", prefs_path)

    trainer = Trainer(store, table, run.train, out_dir=args.out)
    if args.resume:
        trainer.load_checkpoint(args.resume)
    log_file = args.log_file or (Path(args.out) / "train.log")
    written = trainer.fit(log_file=log_file)
    print(f"finished at step {trainer.step}; last checkpoint: {written[-1] if written else 'none'}")
    return 0


def _cmd_generate(args) -> int:
    from .glyphs import GlyphImage, load_dataset
    from .training import generate_glyphs, load_generator

    gen, config = load_generator(args.checkpoint)
    store = load_dataset(args.content_dir)  # single-font layout: <dir>/<font>/<hex>.png

    refs_dir = Path(args.refs_dir)
    refs = []
    for png in sorted(refs_dir.glob("*.png")):
        try:
            cp = int(png.stem, 16)
        except ValueError:
            continue
        pixels = _load_image(str(png))
        try:
            char_id = store.catalog.char_id_of(cp)
        except KeyError:
            char_id = -1  # reference char outside the content charset
        refs.append(GlyphImage(pixels=pixels, font_id=0, char_id=char_id))
    if not refs:
        raise OSError(f"no reference glyphs (<hex>.png) found in {refs_dir}")

    targets = []
    for cp in _parse_chars(args.chars):
        targets.append(store.catalog.char_id_of(cp))
    rs_enabled = config.rs_test if args.rs is None else args.rs == "on"
    outputs = generate_glyphs(
        gen,
        store,
        refs,
        targets,
        rs_enabled=rs_enabled,
        rng_seed=args.seed,
        dtype=config.torch_dtype,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for char_id, arr in zip(targets, outputs):
        cp = store.catalog.codepoints[char_id]
        img = Image.fromarray(np.round(np.clip(arr, 0, 1) * 255).astype(np.uint8), mode="L")
        img.save(out_dir / f"{cp:04x}.png")
    print(f"wrote {len(outputs)} glyphs to {out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    from .extractors import StandInLpipsBackbone
    from .glyphs import load_dataset
    from .metrics import evaluate, render_table, save_comparison_grid
    from .selection import load_preference_table
    from .training import generate_glyphs, load_generator

    gen, config = load_generator(args.checkpoint)
    store = load_dataset(
        args.root, content_font=args.content_font, split_manifest=args.split_manifest
    )
    table = load_preference_table(args.prefs)
    backbone = StandInLpipsBackbone(seed=0) if args.lpips == "standin" else None
    if backbone is not None:
        backbone = backbone.to(dtype=config.torch_dtype)

    collected = []

    def generate_fn(refs, chars):
        outs = generate_glyphs(
            gen, store, refs, chars, rs_enabled=config.rs_test, dtype=config.torch_dtype
        )
        if args.grid and len(collected) < 16:
            for char_id, pred in zip(chars, outs):
                font_id = refs[0].font_id
                if store.has(font_id, char_id) and len(collected) < 16:
                    collected.append((pred, store.get(font_id, char_id).pixels))
        return outs

    report = evaluate(generate_fn, store, args.split, table, lpips_backbone=backbone)
    print(render_table([report]))
    if args.grid:
        save_comparison_grid(collected, args.grid)
        print(f"wrote comparison grid to {args.grid}")
    return 0


def _cmd_smc_score(args) -> int:
    from .strokes import glyph_similarity

    a = _load_image(args.image_a)
    b = _load_image(args.image_b)
    if args.debug_dir:
        from .glyphs import binarize
        from .skeleton import build_graph, save_debug_png, skeletonize

        debug = Path(args.debug_dir)
        debug.mkdir(parents=True, exist_ok=True)
        for name, img in (("a", a), ("b", b)):
            skel = skeletonize(binarize(img))
            save_debug_png(skel, build_graph(skel), debug / f"skeleton_{name}.png")
    print(f"{glyph_similarity(a, b):.6f}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "prefs":
            return _cmd_prefs_build(args)
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "generate":
            return _cmd_generate(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "smc":
            return _cmd_smc_score(args)
        parser.error(f"unknown command {args.command!r}")
    except (OSError, FileNotFoundError) as exc:
        print(f"drgfont: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        from .config import ConfigError
        from .glyphs import DatasetError, GlyphLoadError

        if isinstance(exc, (ConfigError, DatasetError, GlyphLoadError, ValueError, KeyError)):
            kind = "usage" if isinstance(exc, ConfigError) else "i/o error"
            code = EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_IO
            print(f"drgfont: {kind}: {exc}", file=sys.stderr)
            return code
        from .nets import NumericsError
        from .training import TrainingDiverged

        if isinstance(exc, (NumericsError, TrainingDiverged)):
            print(f"drgfont: numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())

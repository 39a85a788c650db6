import struct

import numpy as np
import pytest
from PIL import Image

from drgfont.cli import main

from synth import bar_mask, mask_to_image, plus_mask


def save_gray(arr, path):
    Image.fromarray(np.round(np.asarray(arr) * 255).astype(np.uint8), mode="L").save(path)


@pytest.fixture(scope="module")
def trained(tmp_path_factory, ttf_dataset_dir):
    """A short CLI training run shared across CLI tests."""
    out = tmp_path_factory.mktemp("cli_train")
    prefs = out / "prefs.bin"
    rc = main(
        [
            "prefs",
            "build",
            "--root",
            str(ttf_dataset_dir),
            "--out",
            str(prefs),
            "--seed",
            "0",
            "--m-prime",
            "6",
            "--split",
            str(ttf_dataset_dir / "split.txt"),
        ]
    )
    assert rc == 0
    rc = main(
        [
            "train",
            "--root",
            str(ttf_dataset_dir),
            "--split",
            str(ttf_dataset_dir / "split.txt"),
            "--prefs",
            str(prefs),
            "--out",
            str(out),
            "--seed",
            "0",
            "--epochs",
            "1",
            "--batch-size",
            "4",
            "--base-width",
            "8",
            "--max-steps",
            "2",
        ]
    )
    assert rc == 0
    ckpts = sorted(out.glob("checkpoint_*.pt"))
    assert ckpts
    return ttf_dataset_dir, prefs, ckpts[-1], out


class TestSmc:
    def test_identical_files_score_one(self, tmp_path, capsys):
        img = mask_to_image(plus_mask())
        save_gray(img, tmp_path / "a.png")
        save_gray(img, tmp_path / "b.png")
        rc = main(["smc", "score", str(tmp_path / "a.png"), str(tmp_path / "b.png")])
        assert rc == 0
        assert capsys.readouterr().out.strip() == "1.000000"

    def test_different_files_score_below_one(self, tmp_path, capsys):
        save_gray(mask_to_image(plus_mask()), tmp_path / "a.png")
        save_gray(mask_to_image(bar_mask()), tmp_path / "b.png")
        rc = main(["smc", "score", str(tmp_path / "a.png"), str(tmp_path / "b.png")])
        assert rc == 0
        out = capsys.readouterr().out.strip()
        assert 0.0 <= float(out) < 1.0
        assert len(out.split(".")[1]) == 6

    def test_missing_file_exits_two(self, tmp_path, capsys):
        rc = main(["smc", "score", str(tmp_path / "nope.png"), str(tmp_path / "also.png")])
        assert rc == 2

    def test_debug_dump(self, tmp_path):
        save_gray(mask_to_image(plus_mask()), tmp_path / "a.png")
        save_gray(mask_to_image(bar_mask()), tmp_path / "b.png")
        rc = main(
            [
                "smc",
                "score",
                str(tmp_path / "a.png"),
                str(tmp_path / "b.png"),
                "--debug-dir",
                str(tmp_path / "dbg"),
            ]
        )
        assert rc == 0
        assert (tmp_path / "dbg" / "skeleton_a.png").exists()
        assert (tmp_path / "dbg" / "skeleton_b.png").exists()


class TestPrefs:
    def test_header_and_determinism(self, tmp_path, ttf_dataset_dir):
        out_a = tmp_path / "a.bin"
        out_b = tmp_path / "b.bin"
        for out in (out_a, out_b):
            rc = main(
                [
                    "prefs",
                    "build",
                    "--root",
                    str(ttf_dataset_dir),
                    "--out",
                    str(out),
                    "--seed",
                    "3",
                    "--m-prime",
                    "10",
                ]
            )
            assert rc == 0
        blob = out_a.read_bytes()
        assert blob[:8] == b"DRGPREF1"
        n, m, mp = struct.unpack_from("<III", blob, 8)
        assert (n, m, mp) == (5, 10, 10)
        assert blob == out_b.read_bytes()

    def test_unreadable_dataset_exits_two(self, tmp_path):
        rc = main(
            ["prefs", "build", "--root", str(tmp_path / "missing"), "--out", str(tmp_path / "p.bin"), "--seed", "0"]
        )
        assert rc == 2

    def test_corrupt_output_path_exits_two(self, tmp_path, ttf_dataset_dir):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        rc = main(
            [
                "prefs",
                "build",
                "--root",
                str(ttf_dataset_dir),
                "--out",
                str(blocker / "p.bin"),
                "--seed",
                "0",
            ]
        )
        assert rc == 2


class TestUsageErrors:
    def test_missing_required_flag_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["prefs", "build", "--root", "x"])  # no --seed
        assert exc.value.code == 1

    def test_unknown_command_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1


class TestGenerateAndEvaluate:
    def test_generate_writes_per_target_pngs(self, trained, tmp_path):
        root, prefs, ckpt, _ = trained
        refs_dir = sorted(p for p in root.iterdir() if p.is_dir())[1]
        content_root = tmp_path / "content"
        content_root.mkdir()
        content_dir = sorted(p for p in root.iterdir() if p.is_dir())[0]
        (content_root / "standard").symlink_to(content_dir)
        out_dir = tmp_path / "out"
        rc = main(
            [
                "generate",
                "--checkpoint",
                str(ckpt),
                "--refs-dir",
                str(refs_dir),
                "--content-dir",
                str(content_root),
                "--chars",
                "ABC",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert rc == 0
        written = sorted(out_dir.glob("*.png"))
        assert [p.name for p in written] == ["0041.png", "0042.png", "0043.png"]
        arr = np.asarray(Image.open(written[0]))
        assert arr.shape == (64, 64)

    def test_evaluate_prints_table(self, trained, capsys, tmp_path):
        root, prefs, ckpt, _ = trained
        grid = tmp_path / "grid.png"
        rc = main(
            [
                "evaluate",
                "--checkpoint",
                str(ckpt),
                "--root",
                str(root),
                "--split-manifest",
                str(root / "split.txt"),
                "--split",
                "seen",
                "--prefs",
                str(prefs),
                "--grid",
                str(grid),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        header = out.splitlines()[0]
        assert header.index("L1") < header.index("RMSE") < header.index("SSIM") < header.index("LPIPS")
        assert grid.exists()

    def test_train_flag_precedence_over_config_file(self, ttf_dataset_dir, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("max_steps=50\nbatch_size=4\nbase_width=8\nepochs=1\n")
        out = tmp_path / "run"
        rc = main(
            [
                "train",
                "--root",
                str(ttf_dataset_dir),
                "--split",
                str(ttf_dataset_dir / "split.txt"),
                "--out",
                str(out),
                "--seed",
                "0",
                "--config",
                str(cfg),
                "--max-steps",
                "1",
            ]
        )
        assert rc == 0
        assert "step 1" in capsys.readouterr().out

    def test_ablation_flags_reach_checkpoint_config(self, ttf_dataset_dir, tmp_path):
        import torch

        out = tmp_path / "abl"
        rc = main(
            [
                "train",
                "--root",
                str(ttf_dataset_dir),
                "--split",
                str(ttf_dataset_dir / "split.txt"),
                "--out",
                str(out),
                "--seed",
                "1",
                "--epochs",
                "1",
                "--batch-size",
                "4",
                "--base-width",
                "8",
                "--max-steps",
                "1",
                "--rs-train",
                "off",
                "--rs-test",
                "off",
                "--cls",
                "off",
                "--latent",
                "off",
                "--head-dim",
                "128",
            ]
        )
        assert rc == 0
        ckpt = sorted(out.glob("checkpoint_*.pt"))[-1]
        cfg = torch.load(ckpt, weights_only=False)["config"]
        assert cfg["rs_train"] is False
        assert cfg["rs_test"] is False
        assert cfg["enable_cls"] is False
        assert cfg["enable_latent"] is False
        assert cfg["head_dim"] == 128

"""CLI subcommand behavior, exit codes, and a small end-to-end flow."""

import json

import numpy as np
import pytest

from skygan import errors
from skygan.cli import main, _parse_levels
from skygan.imagecore import ImageTensor, load_image, save_image

from conftest import make_toy_config, make_toy_dataset


def _write_image(path, size=16, seed=0):
    rng = np.random.default_rng(seed)
    save_image(ImageTensor(rng.random((size, size, 3))), path)


class TestParseHelpers:
    def test_level_range(self):
        assert _parse_levels("1..5") == [1, 2, 3, 4, 5]

    def test_level_list(self):
        assert _parse_levels("1,3,5") == [1, 3, 5]


class TestSynthesize:
    def test_deterministic_output_bytes(self, tmp_path):
        _write_image(tmp_path / "in.png")
        for name in ("a.png", "b.png"):
            code = main([
                "synthesize", "--in", str(tmp_path / "in.png"), "--level", "3",
                "--seed", "9", "--out", str(tmp_path / name),
            ])
            assert code == 0
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        _write_image(tmp_path / "in.png")
        monkeypatch.setenv("SKYGAN_SEED", "9")
        main(["synthesize", "--in", str(tmp_path / "in.png"), "--level", "3",
              "--out", str(tmp_path / "env.png")])
        monkeypatch.delenv("SKYGAN_SEED")
        main(["synthesize", "--in", str(tmp_path / "in.png"), "--level", "3",
              "--seed", "9", "--out", str(tmp_path / "flag.png")])
        assert (tmp_path / "env.png").read_bytes() == (tmp_path / "flag.png").read_bytes()

    def test_missing_input_exit_code(self, tmp_path, capsys):
        code = main(["synthesize", "--in", str(tmp_path / "nope.png"), "--level", "1",
                     "--out", str(tmp_path / "o.png")])
        assert code == errors.EXIT_INPUT
        assert "error:" in capsys.readouterr().err


class TestBuildDataset:
    def test_builds_manifest(self, tmp_path):
        src = tmp_path / "src"
        src.mkdir()
        _write_image(src / "a.png", size=16)
        code = main(["build-dataset", "--src", str(src), "--out", str(tmp_path / "d"),
                     "--levels", "1,2", "--tile", "8", "--stride", "8", "--seed", "3"])
        assert code == 0
        manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
        assert len(manifest["pairs"]) == 4 * 2

    def test_empty_source_exit_code(self, tmp_path):
        (tmp_path / "src").mkdir()
        code = main(["build-dataset", "--src", str(tmp_path / "src"),
                     "--out", str(tmp_path / "d"), "--tile", "8", "--stride", "8"])
        assert code == errors.EXIT_DATA


class TestFixtures:
    def test_writes_cubes(self, tmp_path):
        code = main(["fixtures", "--count", "2", "--seed", "4", "--out",
                     str(tmp_path / "cubes"), "--height", "16", "--width", "16"])
        assert code == 0
        files = sorted((tmp_path / "cubes").glob("*.hsc"))
        assert len(files) == 2
        from skygan.cubeio import load_cube

        cube = load_cube(files[0])
        assert cube.data.shape == (16, 16, 31)


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_run")
    manifest = make_toy_dataset(root)
    config = make_toy_config(manifest, root / "run", steps=(2, 2, 2))
    (root / "config.json").write_text(config.to_json())
    code = main(["train", "--config", str(root / "config.json")])
    assert code == 0
    return root


class TestModelCommands:
    def test_dehaze_and_intermediates(self, trained_run, tmp_path):
        _write_image(tmp_path / "in.png", size=16, seed=2)
        code = main([
            "dehaze", "--model", str(trained_run / "run"),
            "--in", str(tmp_path / "in.png"), "--out", str(tmp_path / "out.png"),
            "--dump-intermediates", str(tmp_path / "mid"),
        ])
        assert code == 0
        out = load_image(tmp_path / "out.png")
        assert out.data.shape == (16, 16, 3)
        assert (tmp_path / "mid" / "out_spanned.hsc").exists()
        assert (tmp_path / "mid" / "out_cube.hsc").exists()
        assert (tmp_path / "mid" / "out_catalyst.png").exists()

    def test_dehaze_missing_model_exit_code(self, tmp_path):
        _write_image(tmp_path / "in.png")
        code = main(["dehaze", "--model", str(tmp_path / "nomodel"),
                     "--in", str(tmp_path / "in.png"), "--out", str(tmp_path / "o.png")])
        assert code == errors.EXIT_CHECKPOINT

    def test_evaluate_writes_report_files(self, trained_run, tmp_path):
        manifest = trained_run / "data" / "manifest.json"
        out_prefix = tmp_path / "report"
        code = main(["evaluate", "--model", str(trained_run / "run"),
                     "--manifest", str(manifest), "--out", str(out_prefix)])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        kinds = {r["kind"] for r in report["rows"]}
        assert kinds == {"dehazed", "original"}
        assert (tmp_path / "report.txt").exists()
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "report.png").exists()

    def test_evaluate_deterministic_bytes(self, trained_run, tmp_path):
        manifest = trained_run / "data" / "manifest.json"
        for name in ("r1", "r2"):
            main(["evaluate", "--model", str(trained_run / "run"),
                  "--manifest", str(manifest), "--out", str(tmp_path / name)])
        assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
        assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()

    def test_train_resume_flag(self, trained_run):
        code = main(["train", "--config", str(trained_run / "run" / "config.json"),
                     "--resume"])
        assert code == 0

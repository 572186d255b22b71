"""Staged training: checkpoint layout, bit-reproducibility, and resume semantics."""

import json

import numpy as np
import pytest
import torch

import skygan.orchestrator as orch
from skygan.checkpoint import load_container
from skygan.errors import CheckpointError
from skygan.i2i import dehaze
from skygan.imagecore import ImageTensor
from skygan.orchestrator import (
    RunConfig,
    load_h2h,
    load_pipeline,
    resume,
    train,
)

from conftest import make_toy_config, make_toy_dataset


class TestRunConfig:
    def test_stage_order_enforced(self, toy_manifest, tmp_path):
        with pytest.raises(ValueError, match="subsequence"):
            make_toy_config(toy_manifest, tmp_path / "run", stages=("hsc", "h2h"))

    def test_duplicate_stage_rejected(self, toy_manifest, tmp_path):
        with pytest.raises(ValueError, match="subsequence"):
            make_toy_config(toy_manifest, tmp_path / "run", stages=("h2h", "h2h"))

    def test_missing_manifest_rejected(self, tmp_path):
        config = make_toy_config(tmp_path / "nope.json", tmp_path / "run")
        with pytest.raises(ValueError, match="manifest"):
            config.validate_paths()

    def test_json_round_trip(self, toy_manifest, tmp_path):
        config = make_toy_config(toy_manifest, tmp_path / "run")
        again = RunConfig.from_json(config.to_json())
        assert again.to_json() == config.to_json()


class TestSingleStage:
    def test_h2h_only_checkpoints_one_bundle(self, toy_manifest, tmp_path):
        config = make_toy_config(toy_manifest, tmp_path / "run", stages=("h2h",))
        result = train(config)
        assert set(result.checkpoints) == {"h2h"}
        assert (tmp_path / "run" / "h2h.ckpt").exists()
        assert not (tmp_path / "run" / "hsc.ckpt").exists()
        meta = load_container(tmp_path / "run" / "h2h.ckpt").meta
        assert meta["status"] == "complete"
        assert meta["step"] == 4

    def test_loss_log_rows(self, toy_manifest, tmp_path):
        config = make_toy_config(toy_manifest, tmp_path / "run", stages=("h2h",))
        result = train(config)
        rows = [json.loads(line) for line in result.log_path.read_text().splitlines()]
        assert len(rows) == 4
        assert [r["step"] for r in rows] == [1, 2, 3, 4]
        for row in rows:
            assert row["l_gan"] == row["l_x"] + row["l_h"]

    def test_checkpoint_round_trip_preserves_parameters(self, toy_manifest, tmp_path):
        config = make_toy_config(toy_manifest, tmp_path / "run", stages=("h2h",))
        train(config)
        container = load_container(tmp_path / "run" / "h2h.ckpt")
        bundle, _ = load_h2h(tmp_path / "run" / "h2h.ckpt")
        for name, mod in bundle.modules().items():
            for pname, tensor in mod.state_dict().items():
                stored = container.tensors[f"model.{name}.{pname}"]
                assert np.array_equal(tensor.numpy(), stored)


class TestFullRun:
    def test_three_stages_and_pipeline(self, toy_manifest, tmp_path):
        config = make_toy_config(toy_manifest, tmp_path / "run")
        result = train(config)
        assert set(result.checkpoints) == {"h2h", "hsc", "i2i"}
        assert result.figure_path.exists()
        rows = [json.loads(line) for line in result.log_path.read_text().splitlines()]
        assert {r["stage"] for r in rows} == {"h2h", "hsc", "i2i"}

        bundle, cat_net, g_z = load_pipeline(tmp_path / "run")
        img = ImageTensor(np.random.default_rng(0).random((16, 16, 3)))
        out = dehaze(bundle, cat_net, g_z, img)
        assert out.dehazed.data.shape == (16, 16, 3)


class TestDeterminism:
    def test_identical_config_and_seed_bit_identical(self, tmp_path):
        manifest = make_toy_dataset(tmp_path)
        config_a = make_toy_config(manifest, tmp_path / "run_a")
        config_b = make_toy_config(manifest, tmp_path / "run_b")
        train(config_a)
        train(config_b)
        for stage in ("h2h", "hsc", "i2i"):
            a = (tmp_path / "run_a" / f"{stage}.ckpt").read_bytes()
            b = (tmp_path / "run_b" / f"{stage}.ckpt").read_bytes()
            assert a == b, f"{stage} checkpoints differ"

    def test_different_seed_differs(self, tmp_path):
        manifest = make_toy_dataset(tmp_path)
        config_a = make_toy_config(manifest, tmp_path / "run_a", stages=("h2h",), seed=1)
        config_b = make_toy_config(manifest, tmp_path / "run_b", stages=("h2h",), seed=2)
        train(config_a)
        train(config_b)
        a = (tmp_path / "run_a" / "h2h.ckpt").read_bytes()
        b = (tmp_path / "run_b" / "h2h.ckpt").read_bytes()
        assert a != b


class TestResume:
    def test_interrupted_run_matches_uninterrupted(self, tmp_path, monkeypatch):
        manifest = make_toy_dataset(tmp_path)
        config_a = make_toy_config(manifest, tmp_path / "run_a", steps=(6, 2, 2),
                                   checkpoint_every=3)
        train(config_a)

        # Interrupt run B inside h2h step 5, after the step-3 periodic checkpoint.
        config_b = make_toy_config(manifest, tmp_path / "run_b", steps=(6, 2, 2),
                                   checkpoint_every=3)
        real_step = orch.train_h2h_step
        calls = {"n": 0}

        def exploding_step(bundle, batch, step):
            calls["n"] += 1
            if calls["n"] == 5:
                raise RuntimeError("simulated crash")
            return real_step(bundle, batch, step)

        monkeypatch.setattr(orch, "train_h2h_step", exploding_step)
        with pytest.raises(RuntimeError):
            train(config_b)
        monkeypatch.setattr(orch, "train_h2h_step", real_step)

        meta = load_container(tmp_path / "run_b" / "h2h.ckpt").meta
        assert meta == {**meta, "step": 3, "status": "in_progress"}

        resume(tmp_path / "run_b")
        for stage in ("h2h", "hsc", "i2i"):
            a = (tmp_path / "run_a" / f"{stage}.ckpt").read_bytes()
            b = (tmp_path / "run_b" / f"{stage}.ckpt").read_bytes()
            assert a == b, f"{stage} checkpoints differ after resume"

    def test_resume_immediately_after_save_replays_next_loss(self, tmp_path, monkeypatch):
        manifest = make_toy_dataset(tmp_path)
        config_a = make_toy_config(manifest, tmp_path / "run_a", stages=("h2h",),
                                   steps=(4, 0, 0), checkpoint_every=2)
        result_a = train(config_a)
        rows_a = [json.loads(l) for l in result_a.log_path.read_text().splitlines()]

        config_b = make_toy_config(manifest, tmp_path / "run_b", stages=("h2h",),
                                   steps=(4, 0, 0), checkpoint_every=2)
        real_step = orch.train_h2h_step
        calls = {"n": 0}

        def exploding_step(bundle, batch, step):
            calls["n"] += 1
            if calls["n"] == 3:
                raise RuntimeError("simulated crash")
            return real_step(bundle, batch, step)

        monkeypatch.setattr(orch, "train_h2h_step", exploding_step)
        with pytest.raises(RuntimeError):
            train(config_b)
        monkeypatch.setattr(orch, "train_h2h_step", real_step)

        result_b = resume(tmp_path / "run_b")
        rows_b = [json.loads(l) for l in result_b.log_path.read_text().splitlines()]
        # Steps 3 and 4 of the resumed run equal the uninterrupted run's rows.
        by_step_b = {r["step"]: r for r in rows_b}
        for step in (3, 4):
            assert by_step_b[step] == rows_a[step - 1]

    def test_resume_without_config_errors(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(CheckpointError, match="config.json"):
            resume(tmp_path / "empty")

    def test_resume_with_mismatched_spec_errors(self, tmp_path):
        manifest = make_toy_dataset(tmp_path)
        config = make_toy_config(manifest, tmp_path / "run", stages=("h2h",),
                                 steps=(4, 0, 0), checkpoint_every=2)
        train(config)
        # Corrupt the stored config: a wider network than the checkpoint holds.
        stored = json.loads((tmp_path / "run" / "config.json").read_text())
        stored["network"]["base_width"] = 8
        stored["stage_options"]["h2h"]["steps"] = 8
        (tmp_path / "run" / "config.json").write_text(json.dumps(stored))
        with pytest.raises(CheckpointError, match="spec"):
            resume(tmp_path / "run")

    def test_resume_after_completion_is_noop(self, tmp_path):
        manifest = make_toy_dataset(tmp_path)
        config = make_toy_config(manifest, tmp_path / "run", stages=("h2h",))
        train(config)
        before = (tmp_path / "run" / "h2h.ckpt").read_bytes()
        resume(tmp_path / "run")
        assert (tmp_path / "run" / "h2h.ckpt").read_bytes() == before

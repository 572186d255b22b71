"""Shared builders for toy datasets and training configs."""

import numpy as np
import pytest

from skygan.hazegen import build_dataset
from skygan.imagecore import ImageTensor, save_image
from skygan.orchestrator import RunConfig


def make_toy_dataset(root, n_sources=2, size=16, levels=(2, 4), seed=11):
    """A tiny hazy/clean dataset; returns the manifest path."""
    src = root / "src"
    src.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_sources):
        base = rng.random((size, size, 3)) * 0.55 + 0.1
        save_image(ImageTensor(base), src / f"s{i}.png")
    build_dataset(src, root / "data", set(levels), size, size, seed=seed)
    return root / "data" / "manifest.json"


def make_toy_config(manifest_path, run_dir, steps=(4, 3, 4), batch=2, seed=5,
                    checkpoint_every=0, stages=("h2h", "hsc", "i2i")):
    """A fast-running config: depth-2 width-4 nets on 16×16 data."""
    return RunConfig(
        manifest=str(manifest_path),
        checkpoint_dir=str(run_dir),
        spectral={"fixture_count": 3, "fixture_seed": 13},
        stages=stages,
        stage_options={
            "h2h": {"steps": steps[0], "batch_size": batch, "lr": 2e-4},
            "hsc": {"steps": steps[1], "batch_size": batch, "lr": 2e-4},
            "i2i": {"steps": steps[2], "batch_size": batch, "lr": 2e-4},
        },
        network={"depth": 2, "base_width": 4, "disc_layers": 1,
                 "hsc_blocks": 1, "hsc_width": 8},
        seed=seed,
        checkpoint_every=checkpoint_every,
    )


@pytest.fixture
def toy_manifest(tmp_path):
    return make_toy_dataset(tmp_path)

"""Staged training schedule: H2H first, then the catalyst net against the
frozen H2H, then the conditional dehazer against both. Handles configuration,
checkpointing, resume, and single-worker bit-reproducibility.

Determinism contract: all randomness derives from the config seed. Stage
seeds are hashed from (seed, stage name); batch sampling uses a per-stage
PCG64 generator whose state is captured in every checkpoint, so a resumed
run replays the exact batch sequence of an uninterrupted one. Batches are
drawn without replacement while batch_size fits the pool (with replacement
otherwise).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import hsc as hsc_mod
from .checkpoint import Container, load_container, save_container
from .colorcue import assemble_multicue
from .cubeio import load_cube
from .errors import CheckpointError
from .evalkit import make_spectral_fixtures
from .figures import save_loss_curves
from .h2h import DEFAULT_ADAM_BETAS, H2HBundle, train_h2h_step
from .hazegen import load_manifest
from .i2i import DEFAULT_LAMBDA_L1, train_i2i_step
from .imagecore import load_image
from .networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    PatchDiscriminator,
    ResNetCatalyst,
    UNetGenerator,
    span_rgb,
    to_torch,
)
from .state import (
    load_module_tensors,
    load_optimizer_tensors,
    load_rng_tensors,
    module_tensors,
    optimizer_tensors,
    rng_tensors,
)

STAGES = ("h2h", "hsc", "i2i")

DEFAULT_STAGE_OPTIONS = {
    "h2h": {"steps": 500, "batch_size": 4, "lr": 2e-4},
    "hsc": {"steps": 300, "batch_size": 4, "lr": 2e-4},
    "i2i": {"steps": 500, "batch_size": 4, "lr": 2e-4},
}

DEFAULT_NETWORK = {
    "depth": 4,
    "base_width": 32,
    "disc_layers": 3,
    "hsc_blocks": 4,
    "hsc_width": 64,
}

DEFAULT_LOSS_WEIGHTS = {"gan": 1.0, "cyc": 10.0, "idt": 5.0, "cls": 1.0,
                        "l1": DEFAULT_LAMBDA_L1}


@dataclass
class RunConfig:
    manifest: str
    checkpoint_dir: str
    spectral: dict = field(default_factory=lambda: {"fixture_count": 8, "fixture_seed": 7})
    stages: tuple[str, ...] = STAGES
    stage_options: dict = field(default_factory=dict)
    loss_weights: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    seed: int = 0
    checkpoint_every: int = 100

    def __post_init__(self):
        self.stages = tuple(self.stages)
        order = [s for s in STAGES if s in self.stages]
        if tuple(order) != self.stages or len(set(self.stages)) != len(self.stages):
            raise ValueError(f"stages must be a subsequence of {list(STAGES)}, got {self.stages}")
        self.stage_options = {
            stage: {**DEFAULT_STAGE_OPTIONS[stage], **self.stage_options.get(stage, {})}
            for stage in STAGES
        }
        self.loss_weights = {**DEFAULT_LOSS_WEIGHTS, **self.loss_weights}
        self.network = {**DEFAULT_NETWORK, **self.network}

    def validate_paths(self):
        if not Path(self.manifest).exists():
            raise ValueError(f"manifest does not exist: {self.manifest}")
        if "cube_dir" in self.spectral and not Path(self.spectral["cube_dir"]).is_dir():
            raise ValueError(f"cube directory does not exist: {self.spectral['cube_dir']}")

    def to_json(self) -> str:
        doc = {
            "manifest": self.manifest,
            "checkpoint_dir": self.checkpoint_dir,
            "spectral": self.spectral,
            "stages": list(self.stages),
            "stage_options": self.stage_options,
            "loss_weights": self.loss_weights,
            "network": self.network,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        doc = json.loads(text)
        doc["stages"] = tuple(doc.get("stages", STAGES))
        return cls(**doc)


def load_config(path) -> RunConfig:
    return RunConfig.from_json(Path(path).read_text())


def derive_seed(global_seed: int, *parts) -> int:
    entropy = [int(global_seed)]
    for part in parts:
        digest = hashlib.sha256(str(part).encode()).digest()
        entropy.append(int.from_bytes(digest[:8], "little"))
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


class TrainingData:
    """In-memory dataset: paired hazy/clean tensors plus unpaired spectral cubes."""

    def __init__(self, config: RunConfig):
        manifest_path = Path(config.manifest)
        manifest = load_manifest(manifest_path)
        root = manifest_path.parent
        self.hazy_rgb = []
        self.clean_rgb = []
        self.hazy_images = []
        for pair in manifest.pairs:
            hazy = load_image(root / pair.hazy_path)
            clean = load_image(root / pair.clean_path)
            self.hazy_images.append(hazy)
            self.hazy_rgb.append(to_torch(hazy).squeeze(0))
            self.clean_rgb.append(to_torch(clean).squeeze(0))
        if not self.hazy_rgb:
            raise ValueError(f"manifest {manifest_path} lists no pairs")

        spectral = config.spectral
        if "cube_dir" in spectral:
            cube_paths = sorted(Path(spectral["cube_dir"]).glob("*.hsc"))
            if not cube_paths:
                raise ValueError(f"no .hsc cubes in {spectral['cube_dir']}")
            self.cubes = [to_torch(load_cube(p)).squeeze(0) for p in cube_paths]
        else:
            h = spectral.get("fixture_height", self.hazy_rgb[0].shape[-2])
            w = spectral.get("fixture_width", self.hazy_rgb[0].shape[-1])
            fixtures = make_spectral_fixtures(
                spectral.get("fixture_count", 8), h, w, spectral.get("fixture_seed", 7)
            )
            self.cubes = [to_torch(f.cube).squeeze(0) for f in fixtures]
        self.multicue = None

    def __len__(self):
        return len(self.hazy_rgb)

    def multicue_tensors(self):
        if self.multicue is None:
            self.multicue = [
                to_torch(assemble_multicue(img)).squeeze(0) for img in self.hazy_images
            ]
        return self.multicue


def _np_rng(state: dict | None, fallback_seed: int) -> np.random.Generator:
    rng = np.random.Generator(np.random.PCG64(fallback_seed))
    if state is not None:
        rng.bit_generator.state = state
    return rng


def _save_stage(path, kind, spec, loss_weights, meta, tensor_groups):
    tensors = dict(rng_tensors())
    for group in tensor_groups:
        tensors.update(group)
    save_container(path, Container(kind=kind, spec=spec, loss_weights=loss_weights,
                                   meta=meta, tensors=tensors))


def _load_stage(path, kind, expected_spec) -> Container:
    container = load_container(path)
    if container.kind != kind:
        raise CheckpointError(f"{path}: kind {container.kind!r}, expected {kind!r}")
    if expected_spec is not None and container.spec != expected_spec:
        raise CheckpointError(
            f"{path}: checkpoint spec {container.spec} does not match run spec {expected_spec}"
        )
    return container


def build_h2h(config: RunConfig) -> H2HBundle:
    net = config.network
    weights = {k: config.loss_weights[k] for k in ("gan", "cyc", "idt", "cls")}
    return H2HBundle(
        depth=net["depth"],
        base_width=net["base_width"],
        disc_layers=net["disc_layers"],
        loss_weights=weights,
        lr=config.stage_options["h2h"]["lr"],
        betas=DEFAULT_ADAM_BETAS,
    )


def _h2h_spec(config: RunConfig) -> dict:
    net = config.network
    return {
        "depth": net["depth"],
        "base_width": net["base_width"],
        "disc_layers": net["disc_layers"],
        "lr": config.stage_options["h2h"]["lr"],
        "betas": list(DEFAULT_ADAM_BETAS),
    }


def _h2h_checkpoint(bundle: H2HBundle, meta: dict, path):
    groups = [module_tensors(f"model.{name}", mod) for name, mod in bundle.modules().items()]
    groups.append(optimizer_tensors("opt.g", bundle.opt_g))
    groups.append(optimizer_tensors("opt.d", bundle.opt_d))
    _save_stage(path, "h2h", bundle.spec_dict(), bundle.loss_weights, meta, groups)


def load_h2h(path, config: RunConfig | None = None,
             with_optimizer: bool = False) -> tuple[H2HBundle, dict]:
    expected = _h2h_spec(config) if config is not None else None
    container = _load_stage(path, "h2h", expected)
    spec = container.spec
    bundle = H2HBundle(
        depth=spec["depth"],
        base_width=spec["base_width"],
        disc_layers=spec["disc_layers"],
        loss_weights=container.loss_weights,
        lr=spec["lr"],
        betas=tuple(spec["betas"]),
    )
    for name, mod in bundle.modules().items():
        load_module_tensors(f"model.{name}", mod, container.tensors)
    if with_optimizer:
        load_optimizer_tensors("opt.g", bundle.opt_g, container.tensors)
        load_optimizer_tensors("opt.d", bundle.opt_d, container.tensors)
        load_rng_tensors(container.tensors)
    return bundle, container.meta


def build_hsc(config: RunConfig) -> ResNetCatalyst:
    net = config.network
    return ResNetCatalyst(residual_blocks=net["hsc_blocks"], width=net["hsc_width"])


def _hsc_spec(config: RunConfig) -> dict:
    return {**build_hsc(config).to_dict(), "lr": config.stage_options["hsc"]["lr"]}


def load_hsc(path, config: RunConfig | None = None,
             with_optimizer: bool = False):
    expected = _hsc_spec(config) if config is not None else None
    container = _load_stage(path, "hsc", expected)
    spec = dict(container.spec)
    lr = spec.pop("lr")
    net = ResNetCatalyst(**spec)
    load_module_tensors("model.g_r", net, container.tensors)
    opt = torch.optim.Adam(net.parameters(), lr=lr, betas=DEFAULT_ADAM_BETAS)
    if with_optimizer:
        load_optimizer_tensors("opt", opt, container.tensors)
        load_rng_tensors(container.tensors)
    return net, opt, container.meta


def build_i2i(config: RunConfig):
    net = config.network
    g_z = UNetGenerator(GeneratorSpec(15, 3, net["depth"], net["base_width"]))
    d_z = PatchDiscriminator(DiscriminatorSpec(18, net["disc_layers"], net["base_width"]))
    return g_z, d_z


def _i2i_spec(config: RunConfig) -> dict:
    net = config.network
    return {
        "depth": net["depth"],
        "base_width": net["base_width"],
        "disc_layers": net["disc_layers"],
        "lambda_l1": config.loss_weights["l1"],
        "lr": config.stage_options["i2i"]["lr"],
    }


def load_i2i(path, config: RunConfig | None = None, with_optimizer: bool = False):
    expected = _i2i_spec(config) if config is not None else None
    container = _load_stage(path, "i2i", expected)
    spec = container.spec
    g_z = UNetGenerator(GeneratorSpec(15, 3, spec["depth"], spec["base_width"]))
    d_z = PatchDiscriminator(DiscriminatorSpec(18, spec["disc_layers"], spec["base_width"]))
    load_module_tensors("model.g_z", g_z, container.tensors)
    load_module_tensors("model.d_z", d_z, container.tensors)
    opt_g = torch.optim.Adam(g_z.parameters(), lr=spec["lr"], betas=DEFAULT_ADAM_BETAS)
    opt_d = torch.optim.Adam(d_z.parameters(), lr=spec["lr"], betas=DEFAULT_ADAM_BETAS)
    if with_optimizer:
        load_optimizer_tensors("opt.g", opt_g, container.tensors)
        load_optimizer_tensors("opt.d", opt_d, container.tensors)
        load_rng_tensors(container.tensors)
    return g_z, d_z, opt_g, opt_d, container.meta


@dataclass
class TrainResult:
    checkpoints: dict
    log_path: Path
    figure_path: Path | None


def _append_log(log_path, row: dict):
    with open(log_path, "a") as fh:
        fh.write(json.dumps(row, sort_keys=True) + "\n")


def train(config: RunConfig, resume: bool = False) -> TrainResult:
    """Run the configured stages in order; see the module docstring for the
    determinism contract. A non-finite loss aborts the stage, leaving the last
    written checkpoint in place."""
    config.validate_paths()
    run_dir = Path(config.checkpoint_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    config_path = run_dir / "config.json"
    if not resume or not config_path.exists():
        config_path.write_text(config.to_json())
    log_path = run_dir / "losses.jsonl"
    if not resume and log_path.exists():
        log_path.unlink()

    data = TrainingData(config)
    checkpoints = {}
    h2h_bundle = None
    hsc_net = None

    for stage in config.stages:
        ckpt_path = run_dir / f"{stage}.ckpt"
        options = config.stage_options[stage]
        steps = options["steps"]
        batch_size = options["batch_size"]

        start_step = 0
        np_state = None
        if resume and ckpt_path.exists():
            if stage == "h2h":
                h2h_bundle, meta = load_h2h(ckpt_path, config, with_optimizer=True)
            elif stage == "hsc":
                hsc_net, hsc_opt, meta = load_hsc(ckpt_path, config, with_optimizer=True)
            else:
                g_z, d_z, opt_gz, opt_dz, meta = load_i2i(ckpt_path, config, with_optimizer=True)
            start_step = meta["step"]
            np_state = meta.get("np_rng")
            checkpoints[stage] = ckpt_path
            if meta["status"] == "complete":
                continue
        else:
            torch.manual_seed(derive_seed(config.seed, "init", stage))
            if stage == "h2h":
                h2h_bundle = build_h2h(config)
            elif stage == "hsc":
                hsc_net = build_hsc(config)
                hsc_opt = torch.optim.Adam(
                    hsc_net.parameters(), lr=options["lr"], betas=DEFAULT_ADAM_BETAS
                )
            else:
                g_z, d_z = build_i2i(config)
                opt_gz = torch.optim.Adam(g_z.parameters(), lr=options["lr"],
                                          betas=DEFAULT_ADAM_BETAS)
                opt_dz = torch.optim.Adam(d_z.parameters(), lr=options["lr"],
                                          betas=DEFAULT_ADAM_BETAS)

        rng = _np_rng(np_state, derive_seed(config.seed, "batch", stage))

        # Upstream bundles: reuse in-memory ones, else load completed checkpoints.
        if stage in ("hsc", "i2i") and h2h_bundle is None:
            h2h_bundle, _ = load_h2h(run_dir / "h2h.ckpt")
        if stage == "i2i" and hsc_net is None:
            hsc_net, _, _ = load_hsc(run_dir / "hsc.ckpt")

        if stage == "hsc":
            with torch.no_grad():
                cached_cubes = [
                    h2h_bundle.g_x(span_rgb(rgb.unsqueeze(0))).squeeze(0)
                    for rgb in data.hazy_rgb
                ]
        if stage == "i2i":
            with torch.no_grad():
                cached_cond = []
                for rgb, mc in zip(data.hazy_rgb, data.multicue_tensors()):
                    cube = h2h_bundle.g_x(span_rgb(rgb.unsqueeze(0)))
                    cat = hsc_net(cube).squeeze(0)
                    cached_cond.append(torch.cat([mc, cat], dim=0))

        def _checkpoint(step, status):
            meta = {
                "stage": stage,
                "step": step,
                "status": status,
                "np_rng": rng.bit_generator.state,
            }
            if stage == "h2h":
                _h2h_checkpoint(h2h_bundle, meta, ckpt_path)
            elif stage == "hsc":
                _save_stage(
                    ckpt_path, "hsc", _hsc_spec(config), {}, meta,
                    [module_tensors("model.g_r", hsc_net), optimizer_tensors("opt", hsc_opt)],
                )
            else:
                _save_stage(
                    ckpt_path, "i2i", _i2i_spec(config),
                    {"l1": config.loss_weights["l1"]}, meta,
                    [
                        module_tensors("model.g_z", g_z),
                        module_tensors("model.d_z", d_z),
                        optimizer_tensors("opt.g", opt_gz),
                        optimizer_tensors("opt.d", opt_dz),
                    ],
                )
            checkpoints[stage] = ckpt_path

        def _sample(pool_size):
            return rng.choice(pool_size, size=batch_size, replace=batch_size > pool_size)

        for step in range(start_step + 1, steps + 1):
            pair_idx = _sample(len(data))
            if stage == "h2h":
                cube_idx = _sample(len(data.cubes))
                batch = {
                    "x_spanned": span_rgb(torch.stack([data.hazy_rgb[i] for i in pair_idx])),
                    "y_clean": torch.stack([data.clean_rgb[i] for i in pair_idx]),
                    "h": torch.stack([data.cubes[j] for j in cube_idx]),
                }
                report = train_h2h_step(h2h_bundle, batch, step)
                _append_log(log_path, {"stage": stage, **report.to_dict()})
            elif stage == "hsc":
                batch = {
                    "h_hat": torch.stack([cached_cubes[i] for i in pair_idx]),
                    "y_clean": torch.stack([data.clean_rgb[i] for i in pair_idx]),
                }
                loss = hsc_mod.train_hsc_step(hsc_net, h2h_bundle, batch, hsc_opt)
                _append_log(log_path, {"stage": stage, "step": step, "l_r": loss})
            else:
                batch = {
                    "cond": torch.stack([cached_cond[i] for i in pair_idx]),
                    "y_clean": torch.stack([data.clean_rgb[i] for i in pair_idx]),
                }
                g_loss, d_loss = train_i2i_step(
                    g_z, d_z, batch, opt_gz, opt_dz, config.loss_weights["l1"]
                )
                _append_log(
                    log_path,
                    {"stage": stage, "step": step, "g_loss": g_loss, "d_loss": d_loss},
                )
            if config.checkpoint_every and step % config.checkpoint_every == 0 and step < steps:
                _checkpoint(step, "in_progress")

        _checkpoint(steps, "complete")

    figure_path = run_dir / "losses.png"
    if log_path.exists():
        save_loss_curves(log_path, figure_path)
    else:
        figure_path = None
    return TrainResult(checkpoints=checkpoints, log_path=log_path, figure_path=figure_path)


def resume(run_dir) -> TrainResult:
    """Continue an interrupted run from its last written checkpoints."""
    run_dir = Path(run_dir)
    config_path = run_dir / "config.json"
    if not config_path.exists():
        raise CheckpointError(f"{run_dir}: no config.json to resume from")
    config = RunConfig.from_json(config_path.read_text())
    return train(config, resume=True)


def load_pipeline(run_dir):
    """Load the frozen (h2h, hsc, i2i) triple for inference."""
    run_dir = Path(run_dir)
    bundle, _ = load_h2h(run_dir / "h2h.ckpt")
    net, _, _ = load_hsc(run_dir / "hsc.ckpt")
    g_z, _, _, _, _ = load_i2i(run_dir / "i2i.ckpt")
    return bundle, net, g_z

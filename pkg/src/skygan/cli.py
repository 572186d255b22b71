"""Single entry-point command wiring all modules for batch use.

Every subcommand is scriptable: no prompts, all behavior from flags and
config files. Failures map to category exit codes (see errors.py); messages
go to standard error. SKYGAN_SEED provides the seed when --seed is omitted.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import errors, hazegen, orchestrator
from .cubeio import save_cube
from .errors import CheckpointError, DecodeError, TrainingDiverged
from .evalkit import evaluate, make_spectral_fixtures
from .figures import write_report_files
from .i2i import dehaze
from .imagecore import load_image, save_image


def _default_seed() -> int:
    env = os.environ.get("SKYGAN_SEED")
    return int(env) if env else 0


def _parse_levels(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(part) for part in text.split(",") if part]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skygan", description="Aerial image dehazing pipeline tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="composite fractal haze onto one image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--level", type=int, required=True, choices=[1, 2, 3, 4, 5])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-dataset", help="tile sources and emit hazy/clean pairs")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", default="1..5", help="e.g. 1..5 or 1,3,5")
    p.add_argument("--tile", type=int, default=500)
    p.add_argument("--stride", type=int, default=500)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="run the staged training schedule")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", action="store_true",
                   help="continue from checkpoints in the config's checkpoint_dir")

    p = sub.add_parser("dehaze", help="dehaze one image with trained checkpoints")
    p.add_argument("--model", required=True, help="checkpoint directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-intermediates", default=None,
                   help="directory for spanned/cube (.hsc) and catalyst (.png)")

    p = sub.add_parser("evaluate", help="score a manifest with a model; write a report")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True,
                   help="report prefix; writes .json/.txt/.csv/.png")

    p = sub.add_parser("fixtures", help="emit synthetic spectral cubes")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)

    return parser


def _cmd_synthesize(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    clean = load_image(args.input)
    hazy = hazegen.synthesize_haze(clean, args.level, seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_image(hazy, args.out)
    return 0


def _cmd_build_dataset(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    manifest = hazegen.build_dataset(
        args.src, args.out, _parse_levels(args.levels), args.tile, args.stride, seed
    )
    print(f"wrote {len(manifest.pairs)} pairs to {args.out}")
    return 0


def _cmd_train(args) -> int:
    if args.resume:
        config = orchestrator.load_config(Path(args.config))
        result = orchestrator.train(config, resume=True)
    else:
        result = orchestrator.train(orchestrator.load_config(args.config))
    for stage, path in result.checkpoints.items():
        print(f"{stage}: {path}")
    return 0


def _cmd_dehaze(args) -> int:
    bundle, catalyst_net, g_z = orchestrator.load_pipeline(args.model)
    img = load_image(args.input)
    dump = args.dump_intermediates
    result = dehaze(bundle, catalyst_net, g_z, img, keep_intermediates=dump is not None)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_image(result.dehazed, args.out)
    if dump is not None:
        dump = Path(dump)
        dump.mkdir(parents=True, exist_ok=True)
        stem = Path(args.out).stem
        save_cube(result.spanned, dump / f"{stem}_spanned.hsc")
        save_cube(result.cube, dump / f"{stem}_cube.hsc")
        save_image(result.catalyst, dump / f"{stem}_catalyst.png")
    return 0


def _cmd_evaluate(args) -> int:
    bundle, catalyst_net, g_z = orchestrator.load_pipeline(args.model)
    manifest = hazegen.load_manifest(args.manifest)

    def dehaze_fn(hazy):
        return dehaze(bundle, catalyst_net, g_z, hazy).dehazed

    report = evaluate(manifest, dehaze_fn, root=Path(args.manifest).parent)
    for path in write_report_files(report, args.out):
        print(f"wrote {path}")
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_fixtures(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fixtures = make_spectral_fixtures(args.count, args.height, args.width, seed)
    for i, fixture in enumerate(fixtures):
        save_cube(fixture.cube, out / f"cube_{i:04d}.hsc")
    print(f"wrote {len(fixtures)} cubes to {out}")
    return 0


_COMMANDS = {
    "synthesize": _cmd_synthesize,
    "build-dataset": _cmd_build_dataset,
    "train": _cmd_train,
    "dehaze": _cmd_dehaze,
    "evaluate": _cmd_evaluate,
    "fixtures": _cmd_fixtures,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, DecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return errors.EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return errors.EXIT_DATA
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return errors.EXIT_CHECKPOINT
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return errors.EXIT_TRAINING
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return errors.EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

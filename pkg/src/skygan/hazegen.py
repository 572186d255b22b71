"""Diamond-square plasma-fractal haze synthesis, atmospheric compositing, and dataset builds.

RNG contract: every stochastic draw comes from a PCG64 generator seeded with
the given integer. The stream order is fixed so traces are reproducible:

1. corner values (0,0), (0,last), (last,0), (last,last), one ``random()``
   draw each (skipped entirely when explicit corners are supplied);
2. for each subdivision pass k = 1..n with noise radius r_k = roughness * 2**-k:
   first all diamond-step points (square centers) in row-major order, then all
   square-step points (edge midpoints) in row-major order, one
   ``uniform(-r_k, r_k)`` draw per point.

Averages accumulate in a fixed order (diamond: TL, TR, BL, BR; square: N, W,
E, S) so traces are bit-reproducible. Square-step points on the border average
their three in-bounds neighbors.
Per-tile dataset seeds derive from SeedSequence([global_seed, sha256(source_id),
tile_index, level]) so builds are reproducible and parallelizable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .imagecore import ImageTensor, crop_tiles, load_image, save_image


@dataclass(frozen=True)
class HazeLevelParams:
    """Per-level haze synthesis parameters."""

    level: int
    grid_exponent: int
    roughness: float
    density_scale: float
    airlight: tuple[float, float, float]


# Level table: coarser grids (smaller n) give blobbier, denser-looking haze
# while density_scale drives mean opacity strictly upward.
DEFAULT_LEVEL_TABLE = {
    1: HazeLevelParams(1, 7, 1.0, 0.40, (0.95, 0.95, 0.98)),
    2: HazeLevelParams(2, 6, 1.0, 0.55, (0.95, 0.95, 0.98)),
    3: HazeLevelParams(3, 5, 1.0, 0.70, (0.95, 0.95, 0.98)),
    4: HazeLevelParams(4, 4, 1.0, 0.85, (0.95, 0.95, 0.98)),
    5: HazeLevelParams(5, 3, 1.0, 1.00, (0.95, 0.95, 0.98)),
}


def diamond_square(
    n: int,
    roughness: float,
    seed: int,
    corners: tuple[float, float, float, float] | None = None,
) -> np.ndarray:
    """Classic diamond-square field on a (2^n+1)² grid, min-max normalized to [0,1].

    A constant field (e.g. roughness 0 with equal corners) is left unchanged
    by the normalization. See the module docstring for the RNG stream order.
    """
    if not 1 <= n <= 12:
        raise ValueError(f"grid exponent must be in 1..12, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    size = (1 << n) + 1
    last = size - 1
    field = np.zeros((size, size), dtype=np.float64)

    if corners is None:
        for y, x in ((0, 0), (0, last), (last, 0), (last, last)):
            field[y, x] = rng.random()
    else:
        if len(corners) != 4 or any(not 0.0 <= c <= 1.0 for c in corners):
            raise ValueError("corners must be four values in [0,1]")
        field[0, 0], field[0, last], field[last, 0], field[last, last] = corners

    step = last
    for k in range(1, n + 1):
        half = step // 2
        r_k = roughness * 2.0**-k
        # Diamond step: centers of the current squares.
        for y in range(half, size, step):
            for x in range(half, size, step):
                avg = (
                    field[y - half, x - half]
                    + field[y - half, x + half]
                    + field[y + half, x - half]
                    + field[y + half, x + half]
                ) / 4.0
                field[y, x] = avg + rng.uniform(-r_k, r_k)
        # Square step: edge midpoints (exactly one of the half-indices odd).
        for y in range(0, size, half):
            for x in range(0, size, half):
                if (y // half + x // half) % 2 == 0:
                    continue
                total, count = 0.0, 0
                for dy, dx in ((-half, 0), (0, -half), (0, half), (half, 0)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < size and 0 <= nx < size:
                        total += field[ny, nx]
                        count += 1
                field[y, x] = total / count + rng.uniform(-r_k, r_k)
        step = half

    lo, hi = field.min(), field.max()
    if hi > lo:
        field = (field - lo) / (hi - lo)
    return field


def resample_field(field: np.ndarray, h: int, w: int) -> ImageTensor:
    """Bilinear resample of a square field to h×w (corner-aligned sampling).

    Resampling to the native size is the identity; the [0,1] range is
    preserved because outputs are convex combinations of inputs.
    """
    if h < 1 or w < 1:
        raise ValueError("target dimensions must be >= 1")
    field = np.asarray(field, dtype=np.float64)
    src_h, src_w = field.shape
    rows = np.linspace(0.0, src_h - 1.0, h)
    cols = np.linspace(0.0, src_w - 1.0, w)
    y0 = np.floor(rows).astype(int)
    x0 = np.floor(cols).astype(int)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    wy = (rows - y0)[:, None]
    wx = (cols - x0)[None, :]
    out = (
        field[np.ix_(y0, x0)] * (1 - wy) * (1 - wx)
        + field[np.ix_(y0, x1)] * (1 - wy) * wx
        + field[np.ix_(y1, x0)] * wy * (1 - wx)
        + field[np.ix_(y1, x1)] * wy * wx
    )
    return ImageTensor(np.clip(out, 0.0, 1.0)[..., None])


def composite_haze(
    clean: ImageTensor, field: ImageTensor, params: HazeLevelParams
) -> ImageTensor:
    """Blend haze into a clean image: I = J*t + A*(1-t) with t = 1 - d*field."""
    if clean.height != field.height or clean.width != field.width:
        raise ValueError(
            f"clean {clean.height}×{clean.width} and field "
            f"{field.height}×{field.width} dimensions differ"
        )
    t = 1.0 - params.density_scale * field.data.astype(np.float64)
    airlight = np.asarray(params.airlight, dtype=np.float64)
    hazy = clean.data.astype(np.float64) * t + airlight * (1.0 - t)
    return ImageTensor(np.clip(hazy, 0.0, 1.0))


def synthesize_haze(
    clean: ImageTensor,
    level: int,
    seed: int,
    table: dict[int, HazeLevelParams] = DEFAULT_LEVEL_TABLE,
) -> ImageTensor:
    """One hazy variant of an image at the given level, fully seed-determined."""
    params = table[level]
    field = diamond_square(params.grid_exponent, params.roughness, seed)
    return composite_haze(clean, resample_field(field, clean.height, clean.width), params)


@dataclass(frozen=True)
class PairRecord:
    """Manifest row pointing at one clean/hazy pair on disk."""

    clean_path: str
    hazy_path: str
    level: int
    source_id: str


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    seed: int
    tile: int
    stride: int
    levels: tuple[int, ...]
    level_table: dict[int, HazeLevelParams]
    pairs: tuple[PairRecord, ...]

    def to_json(self) -> str:
        doc = {
            "name": self.name,
            "seed": self.seed,
            "tile": self.tile,
            "stride": self.stride,
            "levels": list(self.levels),
            "level_table": {str(k): asdict(v) for k, v in self.level_table.items()},
            "pairs": [asdict(p) for p in self.pairs],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        table = {}
        for key, row in doc["level_table"].items():
            row = dict(row)
            row["airlight"] = tuple(row["airlight"])
            table[int(key)] = HazeLevelParams(**row)
        return cls(
            name=doc["name"],
            seed=doc["seed"],
            tile=doc["tile"],
            stride=doc["stride"],
            levels=tuple(doc["levels"]),
            level_table=table,
            pairs=tuple(PairRecord(**p) for p in doc["pairs"]),
        )


def load_manifest(path) -> DatasetManifest:
    return DatasetManifest.from_json(Path(path).read_text())


def _tile_seed(global_seed: int, source_id: str, tile_index: int, level: int) -> int:
    src_hash = int.from_bytes(hashlib.sha256(source_id.encode()).digest()[:8], "little")
    seq = np.random.SeedSequence([global_seed, src_hash, tile_index, level])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def build_dataset(
    src_dir,
    out_dir,
    levels,
    tile: int,
    stride: int,
    seed: int,
    table: dict[int, HazeLevelParams] = DEFAULT_LEVEL_TABLE,
) -> DatasetManifest:
    """Tile every source image and composite one hazy variant per level per tile.

    Writes clean/hazy PNG pairs plus manifest.json under out_dir and returns
    the manifest. Fully determined by (sources, levels, tile, stride, seed).
    """
    src_dir, out_dir = Path(src_dir), Path(out_dir)
    levels = sorted(set(levels))
    if any(lv not in table for lv in levels):
        raise ValueError(f"levels must be a subset of {sorted(table)}, got {levels}")
    sources = sorted(p for p in src_dir.glob("*.png"))
    if not sources:
        raise ValueError(f"no PNG source images in {src_dir}")

    (out_dir / "clean").mkdir(parents=True, exist_ok=True)
    (out_dir / "hazy").mkdir(parents=True, exist_ok=True)

    records = []
    for src_path in sources:
        source = load_image(src_path)
        stem = src_path.stem
        for tile_index, clean_tile in enumerate(crop_tiles(source, tile, stride)):
            tile_id = f"{stem}_{tile_index:04d}"
            clean_rel = f"clean/{tile_id}.png"
            save_image(clean_tile, out_dir / clean_rel)
            for level in levels:
                params = table[level]
                field = diamond_square(
                    params.grid_exponent,
                    params.roughness,
                    _tile_seed(seed, stem, tile_index, level),
                )
                hazy = composite_haze(clean_tile, resample_field(field, tile, tile), params)
                hazy_rel = f"hazy/{tile_id}_L{level}.png"
                save_image(hazy, out_dir / hazy_rel)
                records.append(PairRecord(clean_rel, hazy_rel, level, tile_id))

    manifest = DatasetManifest(
        name=out_dir.name,
        seed=seed,
        tile=tile,
        stride=stride,
        levels=tuple(levels),
        level_table={lv: table[lv] for lv in levels},
        pairs=tuple(records),
    )
    (out_dir / "manifest.json").write_text(manifest.to_json())
    return manifest

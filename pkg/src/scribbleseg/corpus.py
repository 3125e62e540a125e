"""Deterministic synthetic two-region corpus for tests and demos.

Each case is a bright disk on a darker background with a graded amount of
noise, a slightly soft edge (so an uncertainty band exists), a ground-truth
trimap whose unclassified band straddles the true contour, and scripted
sparse strokes: one short foreground stroke inside the disk, one background
stroke near a corner.  Everything is derived from fixed seeds, so repeated
generation is bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .formats import (
    TRIMAP_BACKGROUND,
    TRIMAP_FOREGROUND,
    TRIMAP_UNCLASSIFIED,
    SeedMask,
    Trimap,
    save_seed_mask,
    save_trimap,
)
from .graph import ImageGrid
from .strokes import LABEL_BACKGROUND, LABEL_FOREGROUND, OP_DRAW, StrokeOp, replay_journal
from .walks import SeedState

NOISE_GRADES = (0.0, 0.04, 0.08, 0.12, 0.16)
_BAND_HALF_WIDTH = 2.5
_EDGE_SOFTNESS = 0.8

# Documented run parameters for this corpus.  The contrast scale matters:
# the boundary trade-off must stay within [0, min edge weight], and with
# max-difference normalization the smallest weight is exp(-beta) + floor.
# beta = 4 keeps that at ~0.019, comfortably above lambda = 0.005, while
# still weighting cross-contour edges ~50x below in-region ones.
RUN_PARAMS = {
    "beta": 4.0,
    "lambda": 0.005,
    "delta": 0.1,
    "epsilon": 0.1,
}


@dataclass(frozen=True)
class CorpusCase:
    name: str
    image: ImageGrid
    seeds: SeedState
    trimap: Trimap
    noise: float


def _disk_case(size: int, noise: float, rng_seed: int, name: str) -> CorpusCase:
    rng = np.random.default_rng(rng_seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = cx = (size - 1) / 2.0
    radius = size * 0.30
    dist = np.hypot(yy - cy, xx - cx)

    # Soft-edged disk: 0.7 inside, 0.3 outside, a ~2 px transition ramp.
    membership = 1.0 / (1.0 + np.exp((dist - radius) / _EDGE_SOFTNESS))
    clean = 0.3 + 0.4 * membership
    img = np.clip(clean + rng.normal(0.0, noise, clean.shape), 0.0, 1.0)
    # Quantize to 8-bit levels so the in-memory case and its PNG agree exactly.
    img = np.floor(img * 255.0 + 0.5) / 255.0

    codes = np.full(clean.shape, TRIMAP_BACKGROUND, dtype=np.uint8)
    codes[dist < radius] = TRIMAP_FOREGROUND
    codes[np.abs(dist - radius) <= _BAND_HALF_WIDTH] = TRIMAP_UNCLASSIFIED
    trimap = Trimap(codes=codes)

    # Scripted strokes mimic the usual scribble protocol: a short foreground
    # bar inside the object, a thin background loop drawn around it midway to
    # the border.
    span = size * 0.10
    ring = (radius + (size / 2.0)) / 2.0
    journal = [
        StrokeOp(op=OP_DRAW, label=LABEL_FOREGROUND, radius=1.0,
                 points=((cx - span, cy), (cx + span, cy))),
        StrokeOp(op=OP_DRAW, label=LABEL_BACKGROUND, radius=1.0,
                 points=((cx - ring, cy - ring), (cx + ring, cy - ring),
                         (cx + ring, cy + ring), (cx - ring, cy + ring),
                         (cx - ring, cy - ring))),
    ]
    seeds = replay_journal(journal, clean.shape).to_seed_state()
    return CorpusCase(name=name, image=ImageGrid(intensity=img), seeds=seeds, trimap=trimap, noise=noise)


def synthetic_cases(size: int = 48, rng_seed: int = 2024) -> list[CorpusCase]:
    """The bundled corpus: one case per noise grade, deterministic."""
    return [
        _disk_case(size, noise, rng_seed + i, f"disk_noise{int(round(noise * 100)):02d}")
        for i, noise in enumerate(NOISE_GRADES)
    ]


def write_corpus(out_dir, size: int = 48, rng_seed: int = 2024) -> list[Path]:
    """Materialize the corpus for the CLI: image/seeds/trimap PNGs per case."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dirs = []
    manifest = []
    for case in synthetic_cases(size=size, rng_seed=rng_seed):
        case_dir = out_dir / case.name
        case_dir.mkdir(exist_ok=True)
        gray = np.floor(case.image.intensity * 255.0 + 0.5).astype(np.uint8)
        Image.fromarray(gray, mode="L").save(case_dir / "image.png", format="PNG")
        save_seed_mask(SeedMask.from_seed_state(case.seeds, case.image.shape), case_dir / "seeds.png")
        save_trimap(case.trimap, case_dir / "trimap.png")
        manifest.append({"name": case.name, "noise": case.noise, "size": size,
                         "run_params": dict(RUN_PARAMS)})
        dirs.append(case_dir)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return dirs

"""Stroke journal and round-brush rasterization onto seed masks.

A stroke is a polyline plus a brush radius; rasterizing stamps a disk at
densely sampled points along each segment.  Strokes are kept as vector ops in
a journal so a session replays deterministically and brush edits (draw,
erase, undo) compose in order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .formats import SEED_BACKGROUND, SEED_FOREGROUND, SEED_NONE, SeedMask

OP_DRAW = "draw"
OP_ERASE = "erase"
OP_UNDO = "undo"

LABEL_FOREGROUND = "foreground"
LABEL_BACKGROUND = "background"


@dataclass(frozen=True)
class StrokeOp:
    """One journal entry: draw a labeled stroke, erase under a brush, or undo."""

    op: str
    points: tuple[tuple[float, float], ...] = ()
    radius: float = 0.0
    label: str | None = None

    def __post_init__(self):
        if self.op not in (OP_DRAW, OP_ERASE, OP_UNDO):
            raise InvalidInputError(f"unknown stroke op {self.op!r}")
        if self.op == OP_UNDO:
            return
        if not self.points:
            raise InvalidInputError("stroke needs at least one point")
        if self.radius < 0:
            raise InvalidInputError("brush radius must be nonnegative")
        if self.op == OP_DRAW and self.label not in (LABEL_FOREGROUND, LABEL_BACKGROUND):
            raise InvalidInputError(f"stroke label must be foreground or background, got {self.label!r}")

    def to_dict(self) -> dict:
        return {
            "op": self.op,
            "points": [list(p) for p in self.points],
            "radius": self.radius,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StrokeOp":
        points = tuple((float(x), float(y)) for x, y in payload.get("points", ()))
        return cls(
            op=payload.get("op", OP_DRAW),
            points=points,
            radius=float(payload.get("radius", 0.0)),
            label=payload.get("label"),
        )


def _disk_offsets(radius: float) -> np.ndarray:
    r = int(np.floor(radius))
    span = np.arange(-r, r + 1)
    dx, dy = np.meshgrid(span, span)
    keep = dx * dx + dy * dy <= radius * radius
    return np.stack([dy[keep], dx[keep]], axis=1)


def _polyline_pixels(points, shape: tuple[int, int]) -> np.ndarray:
    """Integer pixel centers sampled at sub-pixel steps along the polyline."""
    h, w = shape
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if ((pts[:, 0] < 0) | (pts[:, 0] >= w) | (pts[:, 1] < 0) | (pts[:, 1] >= h)).any():
        raise InvalidInputError("stroke point outside image bounds")
    samples = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        steps = max(int(np.ceil(np.hypot(*(b - a)) * 2)), 1)
        t = np.linspace(0.0, 1.0, steps + 1)[1:]
        samples.append(a + t[:, None] * (b - a))
    xy = np.concatenate([np.atleast_2d(s) for s in samples], axis=0)
    return np.unique(np.round(xy).astype(np.int64), axis=0)


def stamp_stroke(codes: np.ndarray, stroke: StrokeOp) -> None:
    """Apply one draw/erase op to a seed-code raster in place."""
    h, w = codes.shape
    centers = _polyline_pixels(stroke.points, (h, w))
    offsets = _disk_offsets(stroke.radius)
    ys = (centers[:, 1][:, None] + offsets[None, :, 0]).ravel()
    xs = (centers[:, 0][:, None] + offsets[None, :, 1]).ravel()
    keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    if stroke.op == OP_ERASE:
        value = SEED_NONE
    else:
        value = SEED_FOREGROUND if stroke.label == LABEL_FOREGROUND else SEED_BACKGROUND
    codes[ys[keep], xs[keep]] = value


def effective_ops(journal: list[StrokeOp]) -> list[StrokeOp]:
    """Resolve undo entries: each one pops the most recent surviving op."""
    effective: list[StrokeOp] = []
    for op in journal:
        if op.op == OP_UNDO:
            if effective:
                effective.pop()
        else:
            effective.append(op)
    return effective


def replay_journal(journal: list[StrokeOp], shape: tuple[int, int]) -> SeedMask:
    """Rasterize a stroke journal from scratch."""
    codes = np.zeros(shape, dtype=np.uint8)
    for op in effective_ops(journal):
        stamp_stroke(codes, op)
    return SeedMask(codes=codes)

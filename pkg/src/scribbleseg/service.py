"""Session-based HTTP API for the interactive scribble loop.

One session per uploaded image.  Strokes accumulate in a journal (draw,
erase, undo) and are replayed into a seed mask; ``/segment`` runs one of the
walk algorithms synchronously and stores the result for the GET endpoints.
Mutating requests on one session are mutually exclusive: a second concurrent
mutation is rejected with 409, never queued.  Distinct sessions are fully
independent.
"""

from __future__ import annotations

import io
import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, File, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .errors import (
    ConvexityViolationError,
    InvalidInputError,
    NotPositiveDefiniteError,
    ScribbleSegError,
    SolverFailureError,
)
from .feedback import ALGORITHMS, FeedbackParams, IterationTrace, run_algorithm
from .formats import (
    SEED_BACKGROUND,
    SEED_FOREGROUND,
    SeedMask,
    encode_labels_png,
    encode_probability_png,
    image_from_bytes,
)
from .graph import DEFAULT_BETA, DEFAULT_WEIGHT_FLOOR, ImageGrid
from .solver import SolveOptions
from .strokes import LABEL_BACKGROUND, LABEL_FOREGROUND, StrokeOp, effective_ops, replay_journal
from .walks import ProbabilityMap, boundary_set

DEFAULT_MAX_PIXELS = 1 << 20

# Band pixels in the boundary overlay; everything else is fully transparent.
_BAND_RGBA = (0, 255, 0, 160)

_LABEL_ALIASES = {
    "F": LABEL_FOREGROUND,
    "B": LABEL_BACKGROUND,
    LABEL_FOREGROUND: LABEL_FOREGROUND,
    LABEL_BACKGROUND: LABEL_BACKGROUND,
}


class StrokePayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    op: Literal["draw", "erase", "undo"] = "draw"
    points: list[tuple[float, float]] = []
    radius: float = 1.0
    label: str | None = None


class SegmentPayload(BaseModel):
    """Algorithm choice plus overrides; defaults mirror FeedbackParams."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    algorithm: Literal["rw", "brw", "irw", "ibrw"] = "ibrw"
    beta: float = DEFAULT_BETA
    weight_floor: float = DEFAULT_WEIGHT_FLOOR
    epsilon: float = 0.1
    delta: float = 0.1
    lam: float = Field(0.005, alias="lambda")
    xi: float | None = None
    max_iter: int = 10
    sample_fraction: float = 1.0
    rng_seed: int = 0
    tolerance: float = 1e-8

    def feedback_params(self) -> FeedbackParams:
        return FeedbackParams(
            epsilon_seed=self.epsilon,
            delta=self.delta,
            lam=self.lam,
            xi=self.xi,
            max_outer_iterations=self.max_iter,
            sample_fraction=self.sample_fraction,
            rng_seed=self.rng_seed,
        )


@dataclass
class RunResult:
    algorithm: str
    params: FeedbackParams
    pmap: ProbabilityMap
    trace: IterationTrace
    elapsed_seconds: float


@dataclass
class Session:
    id: str
    image: ImageGrid
    image_bytes: bytes
    mask: SeedMask
    journal: list[StrokeOp] = field(default_factory=list)
    last_run: RunResult | None = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    def seed_counts(self) -> dict:
        codes = self.mask.codes
        return {
            "foreground_pixels": int(np.count_nonzero(codes == SEED_FOREGROUND)),
            "background_pixels": int(np.count_nonzero(codes == SEED_BACKGROUND)),
        }


class SessionStore:
    """In-memory sessions with optional write-through for crash recovery.

    With a session directory configured, the uploaded image and the stroke
    journal are mirrored to disk on every mutation and read back on startup;
    run results are recomputed, not persisted.
    """

    def __init__(self, session_dir: str | None = None):
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()
        self.session_dir = Path(session_dir) if session_dir else None
        if self.session_dir is not None:
            self.session_dir.mkdir(parents=True, exist_ok=True)
            self._recover()

    def create(self, image: ImageGrid, image_bytes: bytes, session_id: str | None = None) -> Session:
        sid = session_id or secrets.token_hex(8)
        session = Session(
            id=sid,
            image=image,
            image_bytes=image_bytes,
            mask=SeedMask(np.zeros(image.shape, dtype=np.uint8)),
        )
        with self._registry_lock:
            self._sessions[sid] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    def remove(self, session_id: str) -> None:
        with self._registry_lock:
            self._sessions.pop(session_id, None)
        if self.session_dir is not None:
            base = self.session_dir / session_id
            for name in ("image.bin", "journal.json"):
                (base / name).unlink(missing_ok=True)
            if base.is_dir():
                try:
                    base.rmdir()
                except OSError:
                    pass

    def ids(self) -> list[str]:
        with self._registry_lock:
            return sorted(self._sessions)

    def write_through(self, session: Session) -> None:
        if self.session_dir is None:
            return
        base = self.session_dir / session.id
        base.mkdir(parents=True, exist_ok=True)
        image_path = base / "image.bin"
        if not image_path.exists():
            image_path.write_bytes(session.image_bytes)
        journal = [op.to_dict() for op in session.journal]
        (base / "journal.json").write_text(json.dumps(journal, indent=2) + "\n")

    def _recover(self) -> None:
        for base in sorted(self.session_dir.iterdir()):
            image_path = base / "image.bin"
            if not (base.is_dir() and image_path.is_file()):
                continue
            data = image_path.read_bytes()
            try:
                image = image_from_bytes(data, origin=str(image_path))
            except ScribbleSegError:
                continue
            session = self.create(image, data, session_id=base.name)
            journal_path = base / "journal.json"
            if journal_path.is_file():
                try:
                    ops = [StrokeOp.from_dict(d) for d in json.loads(journal_path.read_text())]
                    session.journal = ops
                    session.mask = replay_journal(ops, image.shape)
                except (ValueError, ScribbleSegError):
                    continue


def _mutation_guard(session: Session):
    """Non-blocking per-session exclusion; a busy session answers 409."""
    if not session.lock.acquire(blocking=False):
        raise HTTPException(
            status_code=409,
            detail=f"a mutating request is already in progress for session {session.id!r}",
        )
    return session.lock


def _boundary_overlay_png(run: RunResult) -> bytes:
    band = boundary_set(run.pmap, run.trace.final_seeds, run.params.delta)
    h, w = run.pmap.shape
    rgba = np.zeros((h * w, 4), dtype=np.uint8)
    rgba[band] = _BAND_RGBA
    buf = io.BytesIO()
    Image.fromarray(rgba.reshape(h, w, 4), mode="RGBA").save(buf, format="PNG")
    return buf.getvalue()


def _require_run(session: Session) -> RunResult:
    run = session.last_run
    if run is None:
        raise HTTPException(status_code=404, detail=f"session {session.id!r} has no segmentation run yet")
    return run


def create_app(session_dir: str | None = None, max_pixels: int = DEFAULT_MAX_PIXELS) -> FastAPI:
    app = FastAPI(title="scribbleseg", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(session_dir=session_dir)
    app.state.store = store

    @app.get("/")
    def root() -> dict:
        return {
            "service": "scribbleseg",
            "version": __version__,
            "algorithms": list(ALGORITHMS),
            "sessions": store.ids(),
        }

    @app.post("/sessions", status_code=201)
    def create_session(image: UploadFile = File(...)) -> dict:
        data = image.file.read()
        try:
            grid = image_from_bytes(data, origin=image.filename or "upload")
        except ScribbleSegError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        h, w = grid.shape
        if h * w > max_pixels:
            raise HTTPException(
                status_code=422,
                detail=f"image has {h * w} pixels, limit is {max_pixels}",
            )
        session = store.create(grid, data)
        store.write_through(session)
        return {"session_id": session.id, "width": w, "height": h}

    @app.post("/sessions/{session_id}/strokes")
    def post_stroke(session_id: str, payload: StrokePayload) -> dict:
        session = store.get(session_id)
        lock = _mutation_guard(session)
        try:
            label = None
            if payload.label is not None:
                label = _LABEL_ALIASES.get(payload.label)
                if label is None:
                    raise HTTPException(
                        status_code=422,
                        detail=f"unknown stroke label {payload.label!r}; use F/B",
                    )
            try:
                op = StrokeOp(
                    op=payload.op,
                    points=tuple((float(x), float(y)) for x, y in payload.points),
                    radius=payload.radius,
                    label=label,
                )
                trial = session.journal + [op]
                mask = replay_journal(trial, session.shape)
            except ScribbleSegError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            session.journal = trial
            session.mask = mask
            session.updated_at = time.time()
            store.write_through(session)
            return {
                "session_id": session.id,
                "journal_length": len(session.journal),
                "effective_strokes": len(effective_ops(session.journal)),
                **session.seed_counts(),
            }
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/segment")
    def post_segment(session_id: str, payload: SegmentPayload) -> dict:
        session = store.get(session_id)
        lock = _mutation_guard(session)
        try:
            try:
                params = payload.feedback_params()
                opts = SolveOptions(tolerance=payload.tolerance)
            except ScribbleSegError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            seeds = session.mask.to_seed_state()
            started = time.perf_counter()
            try:
                pmap, trace = run_algorithm(
                    payload.algorithm, session.image, seeds, params,
                    opts, beta=payload.beta, floor=payload.weight_floor,
                )
            except (ConvexityViolationError, InvalidInputError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            except (SolverFailureError, NotPositiveDefiniteError) as exc:
                raise HTTPException(status_code=500, detail=str(exc))
            elapsed = time.perf_counter() - started
            run = RunResult(
                algorithm=payload.algorithm,
                params=params,
                pmap=pmap,
                trace=trace,
                elapsed_seconds=elapsed,
            )
            session.last_run = run
            session.updated_at = time.time()
            final = trace.final_seeds
            return {
                "session_id": session.id,
                "algorithm": payload.algorithm,
                "iterations": trace.iterations,
                "stop_reason": trace.stop_reason,
                "degraded": trace.degraded,
                "potentials": trace.potentials,
                "elapsed_seconds": elapsed,
                "seed_counts": {
                    **session.seed_counts(),
                    "auto_foreground": int(final.foreground_auto.size),
                    "auto_background": int(final.background_auto.size),
                    "boundary": int(final.boundary.size),
                },
                "trace": trace.record_dicts(),
            }
        finally:
            lock.release()

    @app.get("/sessions/{session_id}/probability.png")
    def get_probability(session_id: str) -> Response:
        run = _require_run(store.get(session_id))
        return Response(content=encode_probability_png(run.pmap), media_type="image/png")

    @app.get("/sessions/{session_id}/labels.png")
    def get_labels(session_id: str) -> Response:
        run = _require_run(store.get(session_id))
        return Response(content=encode_labels_png(run.pmap.labels), media_type="image/png")

    @app.get("/sessions/{session_id}/boundary.png")
    def get_boundary(session_id: str) -> Response:
        run = _require_run(store.get(session_id))
        return Response(content=_boundary_overlay_png(run), media_type="image/png")

    @app.get("/sessions/{session_id}/trace.json")
    def get_trace(session_id: str) -> Response:
        run = _require_run(store.get(session_id))
        return Response(
            content=json.dumps(run.trace.record_dicts()), media_type="application/json"
        )

    @app.delete("/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> Response:
        session = store.get(session_id)
        lock = _mutation_guard(session)
        try:
            store.remove(session_id)
        finally:
            lock.release()
        return Response(status_code=204)

    return app

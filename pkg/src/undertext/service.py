"""Local HTTP service driving the browser workbench.

One loaded page per session (multi-session opt-in), label submission,
asynchronous enhancement jobs with a model/result cache, and synchronous
threshold previews on downsampled tiles. All numerics go through the same
pipeline core as the CLI, so identical configurations produce byte-identical
images.
"""

from __future__ import annotations

import logging
import queue
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import evalrank, pngio, render
from .cube import (
    LabelMask,
    SpectralCube,
    load_cube,
    polygons_from_json,
    polygons_to_json,
    rasterize_labels,
)
from .errors import ConfigError, DataError, NumericError, UndertextError
from .pipeline import (
    SUPERVISED_METHODS,
    PipelineConfig,
    config_fingerprint,
    run_enhance,
    write_image_atomic,
)
from .threshold import ThresholdParams, apply_double_threshold, suggest_thresholds

log = logging.getLogger("undertext.service")

PREVIEW_STRETCH = (2.0, 98.0)


class SessionRequest(BaseModel):
    manifest_path: str


class EnhanceRequest(BaseModel):
    method: str
    params: dict = {}
    q: int = 3
    seed: int = 0
    stretch: tuple[float, float] = (2.0, 98.0)
    invert: bool = False
    band_subset: list[int] | None = None
    caps: dict = {}
    supervised_classes: tuple[int, ...] = (1, 2)
    score_classes: tuple[int, int] = (1, 2)
    export_bit_depth: int = 8


class ThresholdRequest(BaseModel):
    source: int | str
    t1: float
    t2: float
    alpha: float = 0.5
    max_px: int = 1_000_000


@dataclass
class Job:
    id: str
    status: str = "queued"  # queued | running | done | failed
    error: str | None = None
    result_id: str | None = None


@dataclass
class ResultRecord:
    path: Path
    raw_channels: np.ndarray
    entry: dict


@dataclass
class Session:
    id: str
    manifest_path: str
    cube: SpectralCube
    out_dir: Path
    labels: LabelMask | None = None
    polygons: list = field(default_factory=list)
    jobs: dict[str, Job] = field(default_factory=dict)
    results: dict[str, ResultRecord] = field(default_factory=dict)
    cache: dict[str, str] = field(default_factory=dict)  # params hash -> result id
    counter: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    work: "queue.Queue[tuple[Job, PipelineConfig, LabelMask | None]]" = field(
        default_factory=queue.Queue
    )
    worker: threading.Thread | None = None

    def next_id(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}-{self.counter}"

    def ensure_worker(self) -> None:
        if self.worker is None or not self.worker.is_alive():
            self.worker = threading.Thread(target=self._run_jobs, daemon=True)
            self.worker.start()

    def _run_jobs(self) -> None:
        # one heavy fit at a time per session; further jobs wait in the queue
        while True:
            job, config, labels = self.work.get()
            job.status = "running"
            try:
                result = run_enhance(self.cube, labels, config, write=False)
                result_id = job.id.replace("job", "result")
                path = self.out_dir / f"{result_id}.png"
                write_image_atomic(result.image, path, config.export_bit_depth)
                with self.lock:
                    self.results[result_id] = ResultRecord(
                        path=path, raw_channels=result.raw_channels, entry=result.entry
                    )
                    self.cache[result.fingerprint] = result_id
                    job.result_id = result_id
                    job.status = "done"
            except Exception as exc:  # failures land in the job table, not the log
                job.error = f"{type(exc).__name__}: {exc}"
                job.status = "failed"


def _error_response(status: int, code: str, message: str, detail=None) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"code": code, "message": message, "detail": detail}
    )


def create_app(out_dir: str | None = None, multi_session: bool = False) -> FastAPI:
    app = FastAPI(title="undertext service")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    base_dir = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="undertext-"))
    base_dir.mkdir(parents=True, exist_ok=True)

    sessions: dict[str, Session] = {}
    state_lock = threading.Lock()

    def get_session(session_id: str | None = None) -> Session:
        with state_lock:
            if session_id is None:
                if not sessions:
                    raise ConfigError("no session open; POST /api/session first")
                return next(iter(sessions.values()))
            if session_id not in sessions:
                raise DataError(f"unknown session {session_id!r}")
            return sessions[session_id]

    @app.exception_handler(UndertextError)
    async def _handle_domain_error(request: Request, exc: UndertextError):
        if isinstance(exc, ConfigError):
            return _error_response(422, "config_error", str(exc))
        if isinstance(exc, DataError):
            return _error_response(400, "data_error", str(exc))
        if isinstance(exc, NumericError):
            return _error_response(500, "numeric_error", str(exc))
        return _error_response(500, "internal_error", str(exc))

    @app.post("/api/session")
    def open_session(body: SessionRequest):
        try:
            cube = load_cube(body.manifest_path)
        except DataError as exc:
            return _error_response(400, "data_error", str(exc))
        with state_lock:
            if not multi_session:
                sessions.clear()
            session_id = f"session-{len(sessions) + 1}-{int(time.time() * 1000)}"
            session_dir = base_dir / session_id
            session_dir.mkdir(parents=True, exist_ok=True)
            sessions[session_id] = Session(
                id=session_id, manifest_path=body.manifest_path, cube=cube, out_dir=session_dir
            )
        return {
            "session_id": session_id,
            "width": cube.width,
            "height": cube.height,
            "bands": [
                {
                    "band_id": b.band_id,
                    "file": b.file_name,
                    "wavelength_nm": b.wavelength_nm,
                    "illumination": b.illumination,
                    "filter_code": b.filter_code,
                }
                for b in cube.bands
            ],
        }

    @app.get("/api/band/{index}/preview")
    def band_preview(index: int, max_px: int = 1_000_000, session: str | None = None):
        sess = get_session(session)
        plane = sess.cube.band_plane(index)
        plane = render.stretch(plane, *PREVIEW_STRETCH)
        plane = render.downsample(plane, max_px)
        return _png_response(plane)

    @app.put("/api/labels")
    def put_labels(doc: dict, session: str | None = None):
        sess = get_session(session)
        try:
            polygons = polygons_from_json(doc)
            mask = rasterize_labels(polygons, sess.cube.width, sess.cube.height)
        except DataError as exc:
            return _error_response(422, "invalid_labels", str(exc))
        with sess.lock:
            sess.labels = mask
            sess.polygons = polygons
        return {"counts": {str(k): v for k, v in mask.class_counts().items()}}

    @app.get("/api/labels")
    def get_labels(session: str | None = None):
        sess = get_session(session)
        with sess.lock:
            polygons = list(sess.polygons)
            mask = sess.labels
        counts = {} if mask is None else {str(k): v for k, v in mask.class_counts().items()}
        return {**polygons_to_json(polygons), "counts": counts}

    @app.post("/api/enhance")
    def enhance(body: EnhanceRequest, session: str | None = None):
        sess = get_session(session)
        if body.method in SUPERVISED_METHODS and sess.labels is None:
            return _error_response(
                409, "labels_required", f"method {body.method!r} needs labels first"
            )
        config = PipelineConfig(
            manifest=sess.manifest_path,
            labels=None,
            method=body.method,
            q=body.q,
            params=dict(body.params),
            band_subset=body.band_subset,
            caps=dict(body.caps),
            seed=body.seed,
            out_dir=str(sess.out_dir),
            stretch=tuple(body.stretch),
            invert=body.invert,
            supervised_classes=tuple(body.supervised_classes),
            score_classes=tuple(body.score_classes),
            export_bit_depth=body.export_bit_depth,
        )
        # validate eagerly so the caller gets a 4xx rather than a failed job
        config.validate(require_labels_path=False)
        with sess.lock:
            labels = sess.labels
            job = Job(id=sess.next_id("job"))
            sess.jobs[job.id] = job
            cached = sess.cache.get(config_fingerprint(config, labels))
            if cached is not None and cached in sess.results:
                job.status = "done"
                job.result_id = cached
                return {"job_id": job.id}
        sess.ensure_worker()
        sess.work.put((job, config, labels))
        return {"job_id": job.id}

    @app.get("/api/job/{job_id}")
    def job_status(job_id: str, session: str | None = None):
        sess = get_session(session)
        job = sess.jobs.get(job_id)
        if job is None:
            return _error_response(404, "not_found", f"no job {job_id!r}")
        doc = {"job_id": job.id, "status": job.status}
        if job.error:
            doc["error"] = job.error
        if job.result_id:
            doc["result_id"] = job.result_id
        return doc

    @app.get("/api/result/{result_id}.png")
    def result_png(result_id: str, session: str | None = None):
        sess = get_session(session)
        record = sess.results.get(result_id)
        if record is None or not record.path.is_file():
            return _error_response(404, "not_found", f"no result {result_id!r}")
        return Response(content=record.path.read_bytes(), media_type="image/png")

    @app.post("/api/threshold")
    def threshold_preview(body: ThresholdRequest, session: str | None = None):
        sess = get_session(session)
        started = time.perf_counter()
        plane = _resolve_source(sess, body.source)
        plane = render.downsample(plane, body.max_px)
        params = ThresholdParams(t1=body.t1, t2=body.t2, alpha=body.alpha)
        out = apply_double_threshold(plane, params)
        response = _png_response(out)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        log.info("threshold preview %.1f ms (%d px)", elapsed_ms, out.size)
        return response

    @app.get("/api/suggest_thresholds")
    def suggest(source: str, session: str | None = None):
        sess = get_session(session)
        if sess.labels is None:
            return _error_response(409, "labels_required", "upload labels first")
        parsed: int | str = int(source) if source.lstrip("-").isdigit() else source
        plane = _resolve_source(sess, parsed)
        if plane.shape != sess.labels.labels.shape:
            raise DataError("threshold source does not match the label mask dimensions")
        params = suggest_thresholds(plane, sess.labels)
        return {"t1": params.t1, "t2": params.t2, "alpha": params.alpha}

    @app.get("/api/score")
    def score(result: str, classes: str = "1,2", session: str | None = None):
        sess = get_session(session)
        if sess.labels is None:
            return _error_response(409, "labels_required", "upload labels first")
        record = sess.results.get(result)
        if record is None:
            return _error_response(404, "not_found", f"no result {result!r}")
        a, b = (int(c) for c in classes.split(","))
        fisher = evalrank.fisher_score(record.raw_channels, sess.labels, classes=(a, b))
        return {
            "metric": "fisher",
            "note": evalrank.METRIC_NOTE,
            "result": result,
            "per_channel": fisher.per_channel,
            "best": fisher.best,
            "best_channel": fisher.best_channel,
            "pixel_counts": fisher.counts,
        }

    def _resolve_source(sess: Session, source: int | str) -> np.ndarray:
        """Band index -> stretched band plane; result id -> its single channel."""
        if isinstance(source, int):
            plane = sess.cube.band_plane(source)
            return render.stretch(plane, *PREVIEW_STRETCH)
        record = sess.results.get(source)
        if record is None:
            raise DataError(f"unknown threshold source {source!r}")
        img = render.import_png(record.path)
        if img.n_channels != 1:
            raise ConfigError("threshold preview needs a single-channel source")
        return img.planes[:, :, 0]

    return app


def _png_response(plane: np.ndarray) -> Response:
    quantized = np.floor(np.clip(plane, 0.0, 1.0) * 255 + 0.5).astype(np.uint8)
    return Response(content=pngio.encode_png(quantized, 8), media_type="image/png")

"""HTTP facade over the segmentation pipeline.

Endpoints (JSON over HTTP, CORS enabled):
  POST /api/v1/images    upload a PNG body, returns {"image_id": ...}
  POST /api/v1/segment   run segmentation, returns the contour document
  GET  /api/v1/models    capability document
  GET  /api/v1/health    liveness probe

Uploads live in an in-memory store with a one hour TTL.  Segmentations run
on a bounded worker pool (size GEOKONVEX_THREADS, default cpu count); a
per-request compute budget returns 504 with the partial iteration trace.
"""

from __future__ import annotations

import base64
import binascii
import io
import os
import secrets
import threading
import time
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import fileio
from .constraints import Annotation, auto_z, validate
from .errors import GeokonvexError, SolverError, ValidationError
from .evolution import EvolutionConfig, EvolutionTrace, evolve, initial_contour
from .grid import GridSpec
from .models import ModelFamily, ModelKind, ModelParams

MAX_IMAGE_BYTES = 32 * 1024 * 1024
STORE_TTL = 3600.0
DEFAULT_BUDGET = 60.0
SCHEMA_VERSION = "1"


def worker_count() -> int:
    env = os.environ.get("GEOKONVEX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


class ImageStore:
    """TTL-bounded in-memory image store behind a lock."""

    def __init__(self, ttl: float = STORE_TTL):
        self._ttl = ttl
        self._lock = threading.Lock()
        self._items: dict[str, tuple[float, np.ndarray]] = {}

    def put(self, image: np.ndarray) -> str:
        image_id = secrets.token_hex(16)
        now = time.monotonic()
        with self._lock:
            self._evict(now)
            self._items[image_id] = (now, image)
        return image_id

    def get(self, image_id: str) -> np.ndarray | None:
        now = time.monotonic()
        with self._lock:
            self._evict(now)
            entry = self._items.get(image_id)
        return None if entry is None else entry[1]

    def _evict(self, now: float) -> None:
        dead = [k for k, (t, _) in self._items.items() if now - t > self._ttl]
        for k in dead:
            del self._items[k]


def _decode_png(data: bytes) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode in ("L",):
                return np.asarray(im, dtype=float) / 255.0
            return np.asarray(im.convert("RGB"), dtype=float) / 255.0
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValidationError(f"image bytes not decodable: {exc}",
                              "image.undecodable") from exc


def _config_from_params(params: dict) -> EvolutionConfig:
    fam_tag = params.get("model", "em")
    fam = {f.value: f for f in ModelFamily}.get(fam_tag)
    if fam is None:
        raise ValidationError(f"unknown model {fam_tag!r}", "params.model")
    model = ModelKind(fam, bool(params.get("convexity", True)))
    try:
        mp = ModelParams(beta=float(params.get("beta", 1.0)),
                         eps_relax=float(params.get("eps_relax", 0.1)),
                         quad_points=int(params.get("quad_points", 5)))
        return EvolutionConfig(
            model=model, params=mp,
            ntheta=int(params.get("ntheta", 60)),
            alpha=float(params.get("alpha", 3.0)),
            mu=float(params.get("mu", 0.1)),
            tube_radius=float(params.get("tube_radius", 10.0)),
            max_iters=int(params.get("max_iters", 10)),
            convergence_tol=float(params.get("tol", 0.5)),
            appearance=str(params.get("appearance", "gmm")),
            gmm_components=int(params.get("gmm_components", 5)))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad parameters: {exc}", "params.invalid") from exc


def _trace_summary(trace_records) -> list[dict]:
    out = []
    for rec in trace_records:
        d = rec.contour.diagnostics
        out.append({
            "index": rec.index,
            "arrival_value": rec.arrival_value,
            "displacement": (None if rec.displacement == float("inf")
                             else rec.displacement),
            "is_simple": d.is_simple,
            "is_convex": d.is_convex,
            "encloses_z": d.encloses_z,
            "total_curvature": d.total_curvature,
        })
    return out


def create_app() -> FastAPI:
    app = FastAPI(title="geokonvex", version=SCHEMA_VERSION)
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    store = ImageStore()
    pool = ThreadPoolExecutor(max_workers=worker_count(),
                              thread_name_prefix="geokonvex")

    @app.get("/api/v1/health")
    def health():
        return Response(content="ok", media_type="text/plain")

    @app.post("/api/v1/images", status_code=201)
    async def upload_image(request: Request):
        data = await request.body()
        if len(data) > MAX_IMAGE_BYTES:
            return JSONResponse(status_code=413, content={
                "error": {"code": "image.too_large",
                          "message": "image exceeds 32 MiB"}})
        try:
            image = _decode_png(data)
        except ValidationError as exc:
            return JSONResponse(status_code=400, content={
                "error": {"code": exc.code, "message": str(exc)}})
        return {"image_id": store.put(image)}

    @app.get("/api/v1/models")
    def models():
        variants = []
        for fam in ModelFamily:
            for convex in (True, False):
                variants.append({
                    "model": fam.value,
                    "convexity": convex,
                    "name": ModelKind(fam, convex).name,
                })
        return {
            "schema_version": SCHEMA_VERSION,
            "variants": variants,
            "defaults": {"model": "em", "convexity": True, "beta": 1.0,
                         "alpha": 3.0, "mu": 0.1, "ntheta": 60,
                         "eps_relax": 0.1, "quad_points": 5,
                         "tube_radius": 10.0, "max_iters": 10, "tol": 0.5,
                         "appearance": "gmm", "gmm_components": 5},
            "ranges": {"beta": [0.25, 32.0], "alpha": [0.5, 8.0],
                       "mu": [0.0, 2.0], "ntheta": [12, 180]},
        }

    @app.post("/api/v1/segment")
    async def segment(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error_response(422, "request.malformed",
                                   "body is not valid JSON")
        if not isinstance(body, dict):
            return _error_response(422, "request.malformed",
                                   "body must be a JSON object")
        has_image = body.get("image") is not None
        has_id = body.get("image_id") is not None
        if has_image == has_id:
            return _error_response(
                422, "request.image.ambiguous",
                "provide exactly one of image (base64 PNG) or image_id")
        try:
            if has_image:
                try:
                    raw = base64.b64decode(body["image"], validate=True)
                except (binascii.Error, TypeError) as exc:
                    raise ValidationError(f"image is not valid base64: {exc}",
                                          "image.base64") from exc
                image = _decode_png(raw)
            else:
                image = store.get(str(body["image_id"]))
                if image is None:
                    raise ValidationError("unknown or expired image_id",
                                          "image.unknown_id")
            ann = fileio.annotation_from_dict(body.get("annotation") or {})
            params = body.get("params") or {}
            cfg = _config_from_params(params)
            if ann.z is None:
                ann = Annotation(ann.source_xy, ann.source_theta, auto_z(ann),
                                 ann.fg_scribbles, ann.bg_scribbles,
                                 ann.landmarks)
            ny, nx = image.shape[:2]
            errors = validate(ann, ann.z, GridSpec(nx, ny, cfg.ntheta))
            if errors:
                raise errors[0]
        except ValidationError as exc:
            return _error_response(422, exc.code, str(exc))

        budget = float(params.get("budget_seconds", DEFAULT_BUDGET))
        edge_only = bool(params.get("edge_only", False))
        partial: list = []
        t0 = time.perf_counter()

        def run():
            if edge_only:
                contour, path, _ = initial_contour(image, ann, cfg)
                trace = None
            else:
                contour, trace = evolve(image, ann, cfg,
                                        on_iteration=partial.append)
                path = trace.iterations[-1].path
            return contour, path, trace

        future = pool.submit(run)
        try:
            contour, path, trace = future.result(timeout=budget)
        except FutureTimeout:
            return JSONResponse(status_code=504, content={
                "error": {"code": "compute.budget_exceeded",
                          "message": f"exceeded {budget} s"},
                "trace": _trace_summary(list(partial)),
            })
        except ValidationError as exc:
            return _error_response(422, exc.code, str(exc))
        except GeokonvexError as exc:
            return JSONResponse(status_code=500, content={
                "error": {"code": exc.code, "message": str(exc)}})

        echo = dict(params)
        echo.setdefault("model", cfg.model.family.value)
        echo.setdefault("convexity", cfg.model.convexity_constrained)
        doc = fileio.contour_to_dict(contour, path, echo)
        doc["trace"] = ([] if trace is None
                        else _trace_summary(trace.iterations))
        if trace is not None:
            doc["converged"] = trace.converged
            doc["degraded"] = trace.degraded
        doc["timing"] = {"wall_time": time.perf_counter() - t0}
        return doc

    return app


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})

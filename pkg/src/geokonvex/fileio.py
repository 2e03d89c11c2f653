"""File formats: images, annotation JSON, contour JSON, distance dumps.

Annotations and contours are UTF-8 JSON documents; the distance dump is one
JSON header line followed by raw little-endian float64 values, x fastest,
then y, then the angular axis.  All (de)serialization here is loss-free for
round trips.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np
from PIL import Image

from .constraints import Annotation
from .eikonal import DistanceField
from .errors import ValidationError
from .geodesic import ClosedContour, GeodesicPath
from .grid import GridSpec
from .models import ModelFamily, ModelKind, ModelParams

DUMP_MAGIC = "geokonvex-distance"
SCHEMA_VERSION = "1"

# Published JSON schema for annotation files; the browser front-end embeds
# the same structure so round trips are lossless across tools.
ANNOTATION_SCHEMA = {
    "$id": "geokonvex-annotation-v1",
    "type": "object",
    "required": ["source"],
    "properties": {
        "source": {
            "type": "object",
            "required": ["x", "y", "theta"],
            "properties": {"x": {"type": "number"},
                           "y": {"type": "number"},
                           "theta": {"type": "number"}},
        },
        "z": {"type": ["object", "null"],
              "required": ["x", "y"],
              "properties": {"x": {"type": "number"}, "y": {"type": "number"}}},
        "fg_scribbles": {"type": "array", "items": {
            "type": "array", "items": {
                "type": "object", "required": ["x", "y"],
                "properties": {"x": {"type": "number"}, "y": {"type": "number"}}}}},
        "bg_scribbles": {"$ref": "#/properties/fg_scribbles"},
        "landmarks": {"type": "array", "items": {
            "type": "object", "required": ["x", "y"],
            "properties": {"x": {"type": "number"}, "y": {"type": "number"}}}},
    },
}


# ---------------------------------------------------------------------------
# images


def load_image(path: str | Path) -> np.ndarray:
    """8-bit grayscale or RGB image (PNG or NetPBM) as floats in [0, 1]."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"), dtype=float) / 255.0
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=float) / 255.0
        else:
            converted = im.convert("RGB" if "A" in im.mode or im.mode == "P"
                                   else "L")
            arr = np.asarray(converted, dtype=float) / 255.0
    return arr


def save_image(path: str | Path, image: np.ndarray) -> None:
    arr = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    data = (arr * 255.0).round().astype(np.uint8)
    Image.fromarray(data).save(path)


# ---------------------------------------------------------------------------
# annotation JSON


def _point_list(obj, code: str) -> list[tuple[float, float]]:
    pts = []
    for entry in obj:
        if not isinstance(entry, dict) or "x" not in entry or "y" not in entry:
            raise ValidationError(f"point entries need x and y ({code})", code)
        pts.append((float(entry["x"]), float(entry["y"])))
    return pts


def annotation_from_dict(doc: dict) -> Annotation:
    if not isinstance(doc, dict):
        raise ValidationError("annotation must be a JSON object",
                              "annotation.malformed")
    src = doc.get("source")
    if src is None:
        raise ValidationError("annotation has no source point",
                              "annotation.source.missing")
    for field_name in ("x", "y", "theta"):
        if not isinstance(src, dict) or field_name not in src:
            raise ValidationError(f"source.{field_name} missing",
                                  f"annotation.source.{field_name}.missing")
    z = doc.get("z")
    z_t = None
    if z is not None:
        if "x" not in z or "y" not in z:
            raise ValidationError("z needs x and y", "annotation.z.malformed")
        z_t = (float(z["x"]), float(z["y"]))
    fg = [np.array(_point_list(s, "annotation.fg_scribbles.malformed"))
          for s in doc.get("fg_scribbles", [])]
    bg = [np.array(_point_list(s, "annotation.bg_scribbles.malformed"))
          for s in doc.get("bg_scribbles", [])]
    lms = _point_list(doc.get("landmarks", []), "annotation.landmarks.malformed")
    for s in fg + bg:
        if len(s) == 0:
            raise ValidationError("empty scribble", "annotation.scribble.empty")
    return Annotation(
        source_xy=(float(src["x"]), float(src["y"])),
        source_theta=float(src["theta"]),
        z=z_t, fg_scribbles=fg, bg_scribbles=bg, landmarks=lms)


def annotation_to_dict(ann: Annotation) -> dict:
    doc = {
        "source": {"x": ann.source_xy[0], "y": ann.source_xy[1],
                   "theta": ann.source_theta},
        "z": None if ann.z is None else {"x": ann.z[0], "y": ann.z[1]},
        "fg_scribbles": [[{"x": float(x), "y": float(y)} for x, y in s]
                         for s in ann.fg_scribbles],
        "bg_scribbles": [[{"x": float(x), "y": float(y)} for x, y in s]
                         for s in ann.bg_scribbles],
        "landmarks": [{"x": float(x), "y": float(y)} for x, y in ann.landmarks],
    }
    return doc


def load_annotation(path: str | Path) -> Annotation:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"annotation is not valid JSON: {exc}",
                                  "annotation.malformed") from exc
    return annotation_from_dict(doc)


def save_annotation(path: str | Path, ann: Annotation) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(annotation_to_dict(ann), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# contour JSON


def contour_to_dict(contour: ClosedContour, path: GeodesicPath | None = None,
                    params: dict | None = None,
                    jaccard_score: float | None = None) -> dict:
    d = contour.diagnostics
    doc = {
        "schema_version": SCHEMA_VERSION,
        "vertices": [{"x": float(x), "y": float(y)}
                     for x, y in contour.vertices],
        "diagnostics": {
            "total_curvature": d.total_curvature,
            "is_simple": d.is_simple,
            "is_convex": d.is_convex,
            "encloses_z": d.encloses_z,
            "winding": d.winding,
            "min_turn_angle": d.min_turn_angle,
        },
        "turning_angle_profile": [],
        "params": params or {},
    }
    if jaccard_score is not None:
        doc["diagnostics"]["jaccard"] = jaccard_score
    if path is not None:
        doc["turning_angle_profile"] = [
            {"arc_length": float(s), "eta": float(e)}
            for s, e in zip(path.arc_lengths, path.turning_angles)]
    return doc


def save_contour(path: str | Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_contour(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# distance dumps


def psi_hash(psi_arr: np.ndarray, blocked: np.ndarray | None) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(psi_arr, dtype=np.float64).tobytes())
    if blocked is not None:
        h.update(np.packbits(np.asarray(blocked, dtype=bool)).tobytes())
    return h.hexdigest()


def model_tag(model: ModelKind) -> str:
    return model.name


def model_from_tag(tag: str) -> ModelKind:
    fam_tag, _, suffix = tag.partition("-")
    fam = {f.value: f for f in ModelFamily}.get(fam_tag)
    if fam is None or suffix not in ("convexity", "classical"):
        raise ValidationError(f"unknown model tag {tag!r}", "dump.model")
    return ModelKind(fam, suffix == "convexity")


def dump_distance(path: str | Path, dist: DistanceField, model: ModelKind,
                  params: ModelParams, psi_digest: str,
                  target: tuple[int, int, int] | None = None,
                  extra: dict | None = None) -> None:
    """Header line + float64 grid; never-accepted nodes are written as +inf
    so that finite values coincide with the accepted set."""
    spec = dist.spec
    header = {
        "magic": DUMP_MAGIC,
        "version": 1,
        "nx": spec.nx, "ny": spec.ny, "ntheta": spec.ntheta, "hx": spec.hx,
        "model": model_tag(model),
        "beta": params.beta,
        "eps_relax": params.eps_relax,
        "quad_points": params.quad_points,
        "psi_hash": psi_digest,
        "seed": list(dist.seed),
        "target": None if target is None else list(target),
    }
    if extra:
        header.update(extra)
    values = np.where(dist.accepted_order >= 0, dist.values, math.inf)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(values.astype("<f8").tobytes())


def load_distance(path: str | Path) -> tuple[DistanceField, dict]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError("distance dump header is not valid JSON",
                              "dump.header") from exc
    if header.get("magic") != DUMP_MAGIC:
        raise ValidationError("not a distance dump", "dump.magic")
    spec = GridSpec(nx=int(header["nx"]), ny=int(header["ny"]),
                    ntheta=int(header["ntheta"]), hx=float(header["hx"]))
    expected = spec.num_nodes * 8
    if len(payload) != expected:
        raise ValidationError(
            f"dump payload has {len(payload)} bytes, header implies {expected}",
            "dump.size")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    values = values.reshape(spec.shape)
    order = np.where(np.isfinite(values), 0, -1).astype(np.int64)
    seed = tuple(int(v) for v in header["seed"])
    dist = DistanceField(values=values.copy(), accepted_order=order,
                         seed=seed, spec=spec)
    return dist, header

import base64
import io
import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import ellipse_annotation, make_two_tone_ellipse
from geokonvex import fileio
from geokonvex.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def fixture_case():
    img, truth = make_two_tone_ellipse(size=96, axes=(32.0, 26.0),
                                       gaps=(2.2,), gap_radius=5.0,
                                       noise=0.03, distractor=False)
    ann = ellipse_annotation(size=96, axes=(32.0, 26.0), scribble_scale=0.9)
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray((np.clip(img, 0, 1) * 255).round().astype(np.uint8)) \
        .save(buf, format="PNG")
    return buf.getvalue(), fileio.annotation_to_dict(ann), img


PARAMS = {"model": "em", "convexity": True, "beta": 1.0, "alpha": 3.0,
          "mu": 0.1, "ntheta": 36, "edge_only": True}


def test_health(client):
    r = client.get("/api/v1/health")
    assert r.status_code == 200
    assert r.text == "ok"


def test_models_capabilities(client):
    r = client.get("/api/v1/models")
    assert r.status_code == 200
    doc = r.json()
    assert len(doc["variants"]) == 6
    assert doc["defaults"]["beta"] == 1.0
    assert doc["defaults"]["ntheta"] == 60
    assert "schema_version" in doc


def test_image_upload_roundtrip(client, fixture_case):
    png, _, _ = fixture_case
    r = client.post("/api/v1/images", content=png)
    assert r.status_code == 201
    first = r.json()["image_id"]
    r2 = client.post("/api/v1/images", content=png)
    assert r2.json()["image_id"] != first  # no dedup contract
    r3 = client.post("/api/v1/images", content=png[:100])
    assert r3.status_code == 400
    r4 = client.post("/api/v1/images", content=b"\x00" * (33 * 1024 * 1024))
    assert r4.status_code == 413


def test_segment_happy_path_and_determinism(client, fixture_case):
    png, ann, _ = fixture_case
    body = {"image": base64.b64encode(png).decode(), "annotation": ann,
            "params": PARAMS}
    r1 = client.post("/api/v1/segment", json=body)
    assert r1.status_code == 200, r1.text
    doc = r1.json()
    d = doc["diagnostics"]
    assert d["is_simple"] and d["is_convex"] and d["encloses_z"]
    assert "timing" in doc
    r2 = client.post("/api/v1/segment", json=body)
    assert r2.json()["vertices"] == doc["vertices"]


def test_segment_by_image_id_matches_inline(client, fixture_case):
    png, ann, _ = fixture_case
    image_id = client.post("/api/v1/images", content=png).json()["image_id"]
    inline = client.post("/api/v1/segment", json={
        "image": base64.b64encode(png).decode(), "annotation": ann,
        "params": PARAMS}).json()
    by_id = client.post("/api/v1/segment", json={
        "image_id": image_id, "annotation": ann, "params": PARAMS}).json()
    assert by_id["vertices"] == inline["vertices"]


def test_segment_validation_errors(client, fixture_case):
    png, ann, _ = fixture_case
    b64 = base64.b64encode(png).decode()
    r = client.post("/api/v1/segment", json={"annotation": ann})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "request.image.ambiguous"
    flipped = dict(ann)
    flipped["source"] = dict(ann["source"])
    flipped["source"]["theta"] = ann["source"]["theta"] + math.pi
    r = client.post("/api/v1/segment", json={
        "image": b64, "annotation": flipped, "params": PARAMS})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "source.orientation.incompatible"
    r = client.post("/api/v1/segment", json={
        "image": b64, "annotation": {}, "params": PARAMS})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "annotation.source.missing"
    r = client.post("/api/v1/segment", json={
        "image_id": "doesnotexist", "annotation": ann, "params": PARAMS})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "image.unknown_id"


def test_segment_budget_timeout(client, fixture_case):
    png, ann, _ = fixture_case
    params = dict(PARAMS)
    params["budget_seconds"] = 1e-4
    params["edge_only"] = False
    r = client.post("/api/v1/segment", json={
        "image": base64.b64encode(png).decode(), "annotation": ann,
        "params": params})
    assert r.status_code == 504
    assert r.json()["error"]["code"] == "compute.budget_exceeded"
    assert "trace" in r.json()


def test_segment_matches_cli_edge_only(client, fixture_case, tmp_path):
    from geokonvex.cli import main

    png, ann, img = fixture_case
    fileio.save_image(tmp_path / "img.png", img)
    with open(tmp_path / "ann.json", "w") as fh:
        json.dump(ann, fh)
    out = tmp_path / "contour.json"
    rc = main(["segment", "--model", "em", "--convexity", "--beta", "1",
               "--alpha", "3", "--mu", "0.1", "--ntheta", "36",
               "--edge-only", str(tmp_path / "img.png"),
               str(tmp_path / "ann.json"), "-o", str(out)])
    assert rc == 0
    cli_doc = json.loads(out.read_text())
    srv_doc = client.post("/api/v1/segment", json={
        "image": base64.b64encode(png).decode(), "annotation": ann,
        "params": PARAMS}).json()
    # PNG round trips quantize to 8 bits in both paths, so the pipelines see
    # identical pixels and produce identical vertices
    assert srv_doc["vertices"] == cli_doc["vertices"]

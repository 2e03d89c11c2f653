import json
import math

import numpy as np
import pytest

from conftest import ellipse_annotation, make_two_tone_ellipse
from geokonvex import fileio
from geokonvex.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    img, truth = make_two_tone_ellipse(size=96, axes=(32.0, 26.0),
                                       gaps=(2.2,), gap_radius=5.0,
                                       noise=0.03, distractor=False)
    fileio.save_image(root / "img.png", img)
    ann = ellipse_annotation(size=96, axes=(32.0, 26.0), scribble_scale=0.9)
    fileio.save_annotation(root / "ann.json", ann)
    return root


COMMON = ["--model", "em", "--convexity", "--beta", "1", "--ntheta", "36"]


def test_segment_edge_only_happy_path(workdir, capsys):
    out = workdir / "contour.json"
    rc = main(["segment", *COMMON, "--alpha", "3", "--mu", "0.1",
               "--edge-only", str(workdir / "img.png"),
               str(workdir / "ann.json"), "-o", str(out)])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert len(doc["vertices"]) >= 3
    assert doc["diagnostics"]["is_simple"]
    assert doc["diagnostics"]["is_convex"]
    assert doc["diagnostics"]["encloses_z"]
    assert doc["params"]["model"] == "em-convexity"
    assert len(doc["turning_angle_profile"]) > 10


def test_segment_missing_source_field(workdir, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"landmarks": []}))
    rc = main(["segment", *COMMON, str(workdir / "img.png"), str(bad)])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["code"] == "annotation.source.missing"


def test_segment_unreachable_dubins(workdir, tmp_path, capsys):
    # a turn radius far wider than the landmark gaps makes the closed loop
    # infeasible: the front cannot thread the walls with admissible turns
    from geokonvex.constraints import Annotation

    lms = [(48 + 20 * math.cos(a), 48 + 20 * math.sin(a))
           for a in np.linspace(0.3, 2 * math.pi + 0.3, 7)[:-1]]
    ann = Annotation(source_xy=(74.0, 48.0), source_theta=math.pi / 2,
                     z=(48.0, 48.0), landmarks=lms)
    ann_path = tmp_path / "lm.json"
    fileio.save_annotation(ann_path, ann)
    rc = main(["segment", "--model", "dubins", "--convexity",
               "--beta", "30", "--ntheta", "24", "--edge-only",
               str(workdir / "img.png"), str(ann_path),
               "-o", str(workdir / "never.json")])
    assert rc == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["code"] == "unreachable_target"


def test_distance_then_backtrack_matches_segment(workdir):
    contour_direct = workdir / "direct.json"
    rc = main(["segment", *COMMON, "--edge-only",
               str(workdir / "img.png"), str(workdir / "ann.json"),
               "-o", str(contour_direct)])
    assert rc == 0
    dump = workdir / "u.bin"
    rc = main(["distance", *COMMON, str(workdir / "img.png"),
               str(workdir / "ann.json"), "-o", str(dump)])
    assert rc == 0
    contour_two_step = workdir / "twostep.json"
    rc = main(["backtrack", str(dump), str(workdir / "ann.json"),
               "-o", str(contour_two_step)])
    assert rc == 0
    a = json.loads(contour_direct.read_text())
    b = json.loads(contour_two_step.read_text())
    assert a["vertices"] == b["vertices"]
    assert a["turning_angle_profile"] == b["turning_angle_profile"]


def test_distance_header_metadata(workdir):
    dump = workdir / "u_meta.bin"
    rc = main(["distance", *COMMON, str(workdir / "img.png"),
               str(workdir / "ann.json"), "-o", str(dump)])
    assert rc == 0
    with open(dump, "rb") as fh:
        header = json.loads(fh.readline())
    for key in ("nx", "ny", "ntheta", "model", "beta", "eps_relax",
                "quad_points", "psi_hash", "seed", "target"):
        assert key in header
    assert header["model"] == "em-convexity"


def test_report_and_svg_outputs(workdir):
    report_dir = workdir / "report"
    svg = workdir / "overlay.svg"
    rc = main(["segment", *COMMON, "--edge-only",
               "--svg", str(svg), "--report", str(report_dir),
               str(workdir / "img.png"), str(workdir / "ann.json"),
               "-o", str(workdir / "rep.json")])
    assert rc == 0
    for name in ("vertices.csv", "turning_profile.csv", "overlay.png",
                 "turning_profile.png"):
        assert (report_dir / name).exists()
    # the SVG polygon carries the same vertex list as the JSON result
    doc = json.loads((workdir / "rep.json").read_text())
    svg_text = svg.read_text()
    points = svg_text.split('points="')[1].split('"')[0].split()
    assert len(points) == len(doc["vertices"])
    x0, y0 = map(float, points[0].split(","))
    assert x0 == pytest.approx(doc["vertices"][0]["x"], abs=5e-4)
    assert y0 == pytest.approx(doc["vertices"][0]["y"], abs=5e-4)


def test_missing_image_file(workdir, capsys):
    rc = main(["segment", *COMMON, "nonexistent.png",
               str(workdir / "ann.json")])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["code"] == "io.missing"

"""Command line interface.

Subcommands:
  segment    full segmentation (contour evolution, or edge-only single pass)
  distance   solve the lifted distance problem and dump the value grid
  backtrack  extract the contour from a previously dumped value grid
  serve      run the HTTP service

Exit status 1 marks invalid inputs, 2 solver failures; both print one
machine-readable JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fileio, randers, report
from .constraints import Annotation, auto_z, build_search_space
from .eikonal import solve
from .errors import SolverError, ValidationError
from .evolution import EvolutionConfig, evolve, initial_contour
from .geodesic import backtrack as backtrack_path
from .geodesic import close_and_diagnose
from .grid import GridSpec
from .models import (ModelFamily, ModelKind, ModelParams, build_stencil_cache)


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=[f.value for f in ModelFamily],
                        default="em", help="geodesic model family")
    parser.add_argument("--convexity", action=argparse.BooleanOptionalAction,
                        default=True,
                        help="constrain the contour to convex shapes")
    parser.add_argument("--beta", type=float, default=1.0,
                        help="curvature radius scale in pixels")
    parser.add_argument("--eps-relax", type=float, default=0.1,
                        help="stencil relaxation parameter")
    parser.add_argument("--quad-points", type=int, default=5,
                        help="quadrature nodes for the elastica models")
    parser.add_argument("--ntheta", type=int, default=60,
                        help="number of discrete orientations")


def _model_from_args(args) -> tuple[ModelKind, ModelParams]:
    fam = {f.value: f for f in ModelFamily}[args.model]
    model = ModelKind(fam, bool(args.convexity))
    params = ModelParams(beta=args.beta, eps_relax=args.eps_relax,
                         quad_points=args.quad_points)
    return model, params


def _params_echo(args, model: ModelKind) -> dict:
    return {
        "model": model.name,
        "beta": args.beta,
        "eps_relax": args.eps_relax,
        "quad_points": args.quad_points,
        "ntheta": args.ntheta,
        "alpha": getattr(args, "alpha", None),
        "mu": getattr(args, "mu", None),
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geokonvex",
        description="convex closed contours from curvature-penalized "
                    "geodesics on images")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment an image")
    _add_model_args(seg)
    seg.add_argument("--alpha", type=float, default=3.0)
    seg.add_argument("--mu", type=float, default=0.1)
    seg.add_argument("--tube-radius", type=float, default=10.0)
    seg.add_argument("--max-iters", type=int, default=10)
    seg.add_argument("--tol", type=float, default=0.5,
                     help="convergence displacement in pixels")
    seg.add_argument("--edge-only", action="store_true",
                     help="single edge-driven pass, no region evolution")
    seg.add_argument("--appearance", choices=["gmm", "pc"], default="gmm")
    seg.add_argument("--gmm-components", type=int, default=5)
    seg.add_argument("--svg", metavar="PATH",
                     help="also write an SVG overlay of the contour")
    seg.add_argument("--report", metavar="DIR",
                     help="render figures and CSV tables into a directory")
    seg.add_argument("-o", "--output", default="contour.json")
    seg.add_argument("image")
    seg.add_argument("annotation")

    dist = sub.add_parser("distance",
                          help="solve the edge-driven distance problem and "
                               "dump the value grid")
    _add_model_args(dist)
    dist.add_argument("--full", action="store_true",
                      help="solve the whole grid instead of stopping at the "
                           "arrival point")
    dist.add_argument("-o", "--output", default="distance.bin")
    dist.add_argument("image")
    dist.add_argument("annotation")

    bt = sub.add_parser("backtrack",
                        help="extract the contour from a distance dump")
    bt.add_argument("-o", "--output", default="contour.json")
    bt.add_argument("dump")
    bt.add_argument("annotation")

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8077)
    return parser


def _evolution_config(args, model, params) -> EvolutionConfig:
    return EvolutionConfig(
        model=model, params=params, ntheta=args.ntheta,
        alpha=args.alpha, mu=args.mu, tube_radius=args.tube_radius,
        max_iters=args.max_iters, convergence_tol=args.tol,
        appearance=args.appearance, gmm_components=args.gmm_components)


def _cmd_segment(args) -> int:
    model, params = _model_from_args(args)
    image = fileio.load_image(args.image)
    ann = fileio.load_annotation(args.annotation)
    if ann.z is None:
        ann = Annotation(ann.source_xy, ann.source_theta, auto_z(ann),
                         ann.fg_scribbles, ann.bg_scribbles, ann.landmarks)
    cfg = _evolution_config(args, model, params)
    if args.edge_only:
        contour, path, _ = initial_contour(image, ann, cfg)
    else:
        contour, trace = evolve(image, ann, cfg)
        path = trace.iterations[-1].path
    doc = fileio.contour_to_dict(contour, path, _params_echo(args, model))
    fileio.save_contour(args.output, doc)
    if args.svg:
        report.write_svg_overlay(args.svg, contour, image.shape[:2])
    if args.report:
        report.write_report(args.report, image, contour, path, ann, ann.z)
    return 0


def _edge_problem(args, model, params):
    image = fileio.load_image(args.image)
    ann = fileio.load_annotation(args.annotation)
    if ann.z is None:
        ann = Annotation(ann.source_xy, ann.source_theta, auto_z(ann),
                         ann.fg_scribbles, ann.bg_scribbles, ann.landmarks)
    ny, nx = image.shape[:2]
    spec = GridSpec(nx=nx, ny=ny, ntheta=args.ntheta)
    obstacles, endpoints = build_search_space(
        ann, spec, include_angular_wall=model.convexity_constrained)
    tensors = randers.edge_tensor(image)
    velocity = randers.build_edge_velocity(tensors, spec)
    stencils = build_stencil_cache(model, params, spec)
    return image, ann, spec, obstacles, endpoints, velocity, stencils


def _cmd_distance(args) -> int:
    model, params = _model_from_args(args)
    (_, ann, spec, obstacles, endpoints, velocity,
     stencils) = _edge_problem(args, model, params)
    target = None if args.full else endpoints.p1
    dist, rep = solve(spec, stencils, velocity, obstacles,
                      seed=endpoints.p0, target=target)
    digest = fileio.psi_hash(velocity.psi, velocity.blocked)
    fileio.dump_distance(
        args.output, dist, model, params, digest, target=endpoints.p1,
        extra={"stop_reason": rep.stop_reason,
               "accepted_count": rep.accepted_count})
    return 0


def _cmd_backtrack(args) -> int:
    dist, header = fileio.load_distance(args.dump)
    model = fileio.model_from_tag(header["model"])
    params = ModelParams(beta=float(header["beta"]),
                         eps_relax=float(header["eps_relax"]),
                         quad_points=int(header["quad_points"]))
    ann = fileio.load_annotation(args.annotation)
    if ann.z is None:
        ann = Annotation(ann.source_xy, ann.source_theta, auto_z(ann),
                         ann.fg_scribbles, ann.bg_scribbles, ann.landmarks)
    spec = dist.spec
    obstacles, endpoints = build_search_space(
        ann, spec, include_angular_wall=model.convexity_constrained)
    stencils = build_stencil_cache(model, params, spec)
    target = header.get("target")
    start = tuple(int(v) for v in target) if target else endpoints.p1
    path = backtrack_path(dist, stencils, start, dist.seed,
                          obstacles=obstacles,
                          forward_turn_only=model.convexity_constrained)
    contour = close_and_diagnose(path, ann.source_xy, ann.z, spec.hx,
                                 convex_prior=model.convexity_constrained)
    echo = {"model": model.name, "beta": params.beta,
            "eps_relax": params.eps_relax,
            "quad_points": params.quad_points, "ntheta": spec.ntheta,
            "alpha": None, "mu": None}
    fileio.save_contour(args.output,
                        fileio.contour_to_dict(contour, path, echo))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"segment": _cmd_segment, "distance": _cmd_distance,
                "backtrack": _cmd_backtrack, "serve": _cmd_serve}
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        json.dump({"error": {"code": exc.code, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1
    except SolverError as exc:
        json.dump({"error": {"code": exc.code, "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2
    except FileNotFoundError as exc:
        json.dump({"error": {"code": "io.missing", "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())

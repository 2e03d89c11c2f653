"""Shared fixtures: synthetic images and standard annotations."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geokonvex.constraints import Annotation  # noqa: E402


def make_two_tone_ellipse(seed=0, size=200, axes=(70.0, 50.0),
                          gaps=(0.5, 2.2, 4.3), gap_radius=7.0,
                          noise=0.05, distractor=True):
    """Two-tone ellipse with boundary gaps, a distractor blob and noise."""
    ny = nx = size
    cy = cx = size / 2.0
    a, b = axes
    yy, xx = np.mgrid[0:ny, 0:nx]
    truth = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
    img = np.where(truth, 0.75, 0.25)
    for ga in gaps:
        gx, gy = cx + a * math.cos(ga), cy + b * math.sin(ga)
        img = np.where((xx - gx) ** 2 + (yy - gy) ** 2 <= gap_radius ** 2,
                       0.5, img)
    if distractor:
        dx = cx + (a - 12) * math.cos(gaps[0])
        dy = cy + (b - 12) * math.sin(gaps[0])
        img = np.where((xx - dx) ** 2 + (yy - dy) ** 2 <= 25.0, 0.15, img)
    rng = np.random.default_rng(seed)
    img = np.clip(img + noise * rng.standard_normal(img.shape), 0.0, 1.0)
    return img, truth


def ellipse_annotation(size=200, axes=(70.0, 50.0), source_angle=3.6,
                       scribble_scale=0.75):
    """Source on the ellipse boundary plus an interior tracing scribble."""
    c = size / 2.0
    a, b = axes
    p = (c + a * math.cos(source_angle), c + b * math.sin(source_angle))
    tangent = math.atan2(b * math.cos(source_angle),
                         -a * math.sin(source_angle))
    ring = np.array([[c + scribble_scale * a * math.cos(t),
                      c + scribble_scale * b * math.sin(t)]
                     for t in np.linspace(0.0, 2.0 * math.pi, 50)])
    return Annotation(source_xy=p, source_theta=tangent, fg_scribbles=[ring])


@pytest.fixture(scope="session")
def ellipse_case():
    img, truth = make_two_tone_ellipse()
    return img, truth, ellipse_annotation()


@pytest.fixture(scope="session")
def ring_annotation_factory():
    """Constant-cost closed-curve cases: interior ring scribble plus a
    source placed on a circle around the center."""

    def build(angle, radius, center=64.0, ring_radius=12.0):
        ring = np.array([[center + ring_radius * math.cos(t),
                          center + ring_radius * math.sin(t)]
                         for t in np.linspace(0.0, 2.0 * math.pi, 25)])
        p = (center + radius * math.cos(angle),
             center + radius * math.sin(angle))
        return Annotation(source_xy=p, source_theta=angle + math.pi / 2,
                          z=(center, center), fg_scribbles=[ring])

    return build

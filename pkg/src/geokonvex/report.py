"""Report rendering: contour overlays, turning-angle plots, CSV tables, SVG.

The CLI's report path drops these next to the JSON result so a run can be
inspected without any further tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .constraints import Annotation  # noqa: E402
from .geodesic import ClosedContour, GeodesicPath  # noqa: E402


def write_vertices_csv(path: str | Path, contour: ClosedContour) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in contour.vertices:
            writer.writerow([f"{x:.6f}", f"{y:.6f}"])


def write_profile_csv(path: str | Path, geodesic: GeodesicPath) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arc_length", "eta"])
        for s, e in zip(geodesic.arc_lengths, geodesic.turning_angles):
            writer.writerow([f"{s:.6f}", f"{e:.6f}"])


def render_overlay(path: str | Path, image: np.ndarray,
                   contour: ClosedContour,
                   annotation: Annotation | None = None,
                   z: tuple[float, float] | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    if image.ndim == 2:
        ax.imshow(image, cmap="gray", vmin=0.0, vmax=1.0)
    else:
        ax.imshow(np.clip(image, 0.0, 1.0))
    loop = np.concatenate([contour.vertices, contour.vertices[:1]], axis=0)
    ax.plot(loop[:, 0], loop[:, 1], "r-", lw=1.5, label="contour")
    if annotation is not None:
        px, py = annotation.source_xy
        ax.plot(px, py, "co", ms=6)
        ax.annotate("", xy=(px + 8 * np.cos(annotation.source_theta),
                            py + 8 * np.sin(annotation.source_theta)),
                    xytext=(px, py),
                    arrowprops=dict(color="c", arrowstyle="->"))
        for s in annotation.fg_scribbles:
            ax.plot(s[:, 0], s[:, 1], "b-", lw=1.0)
        for s in annotation.bg_scribbles:
            ax.plot(s[:, 0], s[:, 1], "-", color="orange", lw=1.0)
        for lx, ly in annotation.landmarks:
            ax.plot(lx, ly, "b+", ms=8)
    if z is not None:
        ax.plot(z[0], z[1], "r.", ms=8)
    ax.set_xlim(-0.5, image.shape[1] - 0.5)
    ax.set_ylim(image.shape[0] - 0.5, -0.5)
    ax.set_title("segmentation contour")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_turning_profile(path: str | Path, geodesic: GeodesicPath) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(geodesic.arc_lengths, geodesic.turning_angles, "b-", lw=1.2)
    ax.set_xlabel("arc length (px)")
    ax.set_ylabel("turning angle (rad)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def write_svg_overlay(path: str | Path, contour: ClosedContour,
                      size: tuple[int, int],
                      image_href: str | None = None) -> None:
    """Standalone SVG carrying the same vertex list as the JSON result."""
    ny, nx = size
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in contour.vertices)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{nx}" height="{ny}" '
        f'viewBox="0 0 {nx} {ny}">'
    ]
    if image_href:
        parts.append(f'<image href="{image_href}" width="{nx}" height="{ny}"/>')
    parts.append(f'<polygon points="{pts}" fill="none" stroke="red" '
                 f'stroke-width="1"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts), encoding="utf-8")


def write_report(directory: str | Path, image: np.ndarray,
                 contour: ClosedContour, geodesic: GeodesicPath,
                 annotation: Annotation | None = None,
                 z: tuple[float, float] | None = None) -> list[str]:
    """Render every report artifact into a directory; returns file names."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_vertices_csv(directory / "vertices.csv", contour)
    write_profile_csv(directory / "turning_profile.csv", geodesic)
    render_overlay(directory / "overlay.png", image, contour, annotation, z)
    render_turning_profile(directory / "turning_profile.png", geodesic)
    return ["vertices.csv", "turning_profile.csv", "overlay.png",
            "turning_profile.png"]

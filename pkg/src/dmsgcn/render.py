"""Stick-figure SVG export: one orthographic front view per frame."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionError
from .skeleton import Skeleton

WIDTH = 400
HEIGHT = 400
SCALE = 0.2  # pixels per millimetre
AXES = (0, 2)  # x to the right, z up


def project(pose: np.ndarray, scale: float = SCALE, width: int = WIDTH, height: int = HEIGHT,
            axes=AXES) -> np.ndarray:
    """Canvas coordinates of a ``V x 3`` pose; the world origin maps to the centre."""
    pose = np.asarray(pose, dtype=np.float64)
    u = width / 2 + scale * pose[:, axes[0]]
    v = height / 2 - scale * pose[:, axes[1]]
    return np.stack([u, v], axis=1)


def frame_svg(pose: np.ndarray, skel: Skeleton, scale: float = SCALE, width: int = WIDTH,
              height: int = HEIGHT, axes=AXES, title: str = "") -> str:
    if pose.shape != (skel.V, 3):
        raise DimensionError(f"pose has shape {pose.shape}, skeleton needs ({skel.V}, 3)")
    pts = project(pose, scale, width, height, axes)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if title:
        out.append(f"<title>{title}</title>")
    out.append('<g stroke="#1f4e79" stroke-width="2" stroke-linecap="round">')
    for i, j in skel.edges:
        (x1, y1), (x2, y2) = pts[i], pts[j]
        out.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}"/>')
    out.append("</g>")
    out.append('<g fill="#c0392b">')
    for x, y in pts:
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_frames(frames: np.ndarray, skel: Skeleton, out_dir, which=None, prefix="frame",
                  **kw) -> list[Path]:
    """Write ``<prefix>_<index>.svg`` for each requested frame of an ``F x V x 3`` array."""
    frames = np.asarray(frames)
    if frames.ndim != 3 or frames.shape[1] != skel.V:
        raise DimensionError(f"frames have shape {frames.shape}; skeleton has {skel.V} joints")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    which = range(frames.shape[0]) if which is None else which
    paths = []
    for f in which:
        path = out_dir / f"{prefix}_{f:04d}.svg"
        path.write_text(frame_svg(frames[f], skel, title=f"{prefix} {f}", **kw))
        paths.append(path)
    return paths

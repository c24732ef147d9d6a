"""Seeded synthetic microcirculation frames for benchmarking.

Frames show a smooth reddish tissue background with dark capillary
loops drawn as thick parametric curves. Each frame is generated from
``numpy.random.default_rng([seed, index])`` (PCG64), so frame ``i`` of a
corpus does not depend on how many frames are generated.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from .core import Frame, list_frame_files, load_frame, save_frame

MANIFEST = "manifest.json"

_TISSUE = np.array([205.0, 125.0, 115.0])
_VESSEL = np.array([115.0, 30.0, 45.0])


def _loop_points(rng, cx, cy, scale) -> np.ndarray:
    """Sample a hairpin-like loop: a stretched, bent ellipse arc."""
    t = np.linspace(0.0, rng.uniform(1.2, 2.0) * np.pi, 240)
    a = scale * rng.uniform(0.3, 0.6)
    b = scale * rng.uniform(0.8, 1.4)
    bend = rng.uniform(-0.4, 0.4) * scale
    x = a * np.cos(t) + bend * np.sin(t / 2) ** 2
    y = b * np.sin(t)
    theta = rng.uniform(0, np.pi)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([cx + c * x - s * y, cy + s * x + c * y], axis=1)


def _vessel_alpha(points: np.ndarray, radius: float, width: int, height: int):
    """Soft coverage in [0, 1] of a tube of ``radius`` around ``points``."""
    pad = int(np.ceil(radius)) + 2
    x0 = max(int(points[:, 0].min()) - pad, 0)
    x1 = min(int(points[:, 0].max()) + pad + 1, width)
    y0 = max(int(points[:, 1].min()) - pad, 0)
    y1 = min(int(points[:, 1].max()) + pad + 1, height)
    if x1 <= x0 or y1 <= y0:
        return None
    hit = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    px = np.clip(np.rint(points[:, 0]).astype(int) - x0, 0, x1 - x0 - 1)
    py = np.clip(np.rint(points[:, 1]).astype(int) - y0, 0, y1 - y0 - 1)
    hit[py, px] = True
    dist = ndimage.distance_transform_edt(~hit)
    alpha = np.clip(radius + 0.5 - dist, 0.0, 1.0)
    return (slice(y0, y1), slice(x0, x1)), alpha


def generate_frame(seed: int, index: int, width: int = 1920, height: int = 1080,
                   vessels: Tuple[int, int] = (12, 28)) -> Frame:
    rng = np.random.default_rng([seed, index])
    # low-frequency illumination field
    coarse = rng.normal(0.0, 1.0, (max(height // 120, 2), max(width // 120, 2)))
    zoom = (height / coarse.shape[0], width / coarse.shape[1])
    shade = ndimage.zoom(coarse, zoom, order=1)[:height, :width]
    shade = np.pad(shade, ((0, height - shade.shape[0]), (0, width - shade.shape[1])), mode="edge")
    img = _TISSUE[None, None, :] * (1.0 + 0.04 * shade[:, :, None])

    scale_hi = max(min(width, height) / 12.0, 4.0)
    for _ in range(int(rng.integers(vessels[0], vessels[1] + 1))):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        pts = _loop_points(rng, cx, cy, rng.uniform(scale_hi / 3, scale_hi))
        drawn = _vessel_alpha(pts, rng.uniform(2.5, 5.0), width, height)
        if drawn is None:
            continue
        sl, alpha = drawn
        strength = rng.uniform(0.6, 1.0)
        a = (alpha * strength)[:, :, None]
        img[sl] = img[sl] * (1 - a) + _VESSEL * a

    img += rng.normal(0.0, 2.0, img.shape)
    return Frame(f"frame_{index:04d}", np.clip(np.rint(img), 0, 255).astype(np.uint8))


def generate_corpus(seed: int, count: int, width: int = 1920, height: int = 1080) -> List[Frame]:
    return [generate_frame(seed, i, width, height) for i in range(count)]


def write_corpus(out_dir, seed: int, count: int, width: int = 1920, height: int = 1080) -> dict:
    """Write ``count`` PNG frames plus ``manifest.json`` to ``out_dir``."""
    if count < 1:
        raise ValueError("corpus count must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i in range(count):
        frame = generate_frame(seed, i, width, height)
        name = f"{frame.id}.png"
        save_frame(frame, out / name)
        files.append(name)
    manifest = {"seed": seed, "count": count, "width": width, "height": height, "files": files}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def read_manifest(out_dir):
    path = Path(out_dir) / MANIFEST
    if not path.is_file():
        return None
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError:
        return None


def ensure_corpus(out_dir, seed: int, count: int, width: int = 1920, height: int = 1080) -> List[Frame]:
    """Load a cached corpus if its manifest matches, otherwise (re)generate it."""
    want = {"seed": seed, "count": count, "width": width, "height": height}
    have = read_manifest(out_dir)
    if not (have and all(have.get(k) == v for k, v in want.items())
            and all((Path(out_dir) / f).is_file() for f in have.get("files", []))):
        write_corpus(out_dir, seed, count, width, height)
        have = read_manifest(out_dir)
    return [load_frame(Path(out_dir) / f) for f in have["files"]]


__all__ = ["generate_frame", "generate_corpus", "write_corpus", "ensure_corpus",
           "read_manifest", "list_frame_files", "MANIFEST"]

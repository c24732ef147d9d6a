"""Domain types, raster I/O and colour conversion used across capx.

Images are held as read-only ``uint8`` numpy arrays in row-major order:
``(height, width, channels)`` for a :class:`Frame` and ``(height, width)``
for a :class:`GrayImage`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatch, FormatError

logger = logging.getLogger(__name__)

CAPILLARY = "capillary"
NOT_CAPILLARY = "not-capillary"
LABELS = (CAPILLARY, NOT_CAPILLARY)

SUPPORTED_SUFFIXES = (".png", ".pgm", ".ppm", ".pnm")

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def _frozen_u8(arr) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.uint8)
    if out is arr:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Frame:
    id: str
    data: np.ndarray  # (H, W, C) uint8, read-only

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise FormatError(f"frame {self.id!r}: expected 1 or 3 channels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FormatError(f"frame {self.id!r}: empty image")
        object.__setattr__(self, "data", _frozen_u8(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_bytes(cls, frame_id: str, width: int, height: int, channels: int, raw: bytes) -> "Frame":
        """Build a frame from a flat row-major sample buffer."""
        if width < 1 or height < 1:
            raise FormatError("frame dimensions must be positive")
        if len(raw) != width * height * channels:
            raise FormatError(
                f"data length {len(raw)} does not match {width}x{height}x{channels}"
            )
        arr = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels)
        return cls(frame_id, arr)


@dataclass(frozen=True, eq=False)
class GrayImage:
    data: np.ndarray  # (H, W) uint8, read-only

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise FormatError(f"grayscale image must be a non-empty 2-D array, got {arr.shape}")
        object.__setattr__(self, "data", _frozen_u8(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"bounding box extent must be positive: {self}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"bounding box origin must be non-negative: {self}")

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    @property
    def slices(self) -> Tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


@dataclass(frozen=True, eq=False)
class RegionResult:
    """A classified candidate region.

    ``mask`` is a boolean bitmap with the extent of ``bbox``; it is kept
    in memory for density and annotation but not serialized.
    """

    bbox: BoundingBox
    label: str
    confidence: float
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != (self.bbox.h, self.bbox.w):
                raise DimensionMismatch(
                    f"mask shape {mask.shape} != bbox extent {(self.bbox.h, self.bbox.w)}"
                )
            mask = mask.copy()
            mask.flags.writeable = False
            object.__setattr__(self, "mask", mask)

    @property
    def is_capillary(self) -> bool:
        return self.label == CAPILLARY

    def to_dict(self) -> dict:
        b = self.bbox
        return {"x": b.x, "y": b.y, "w": b.w, "h": b.h,
                "label": self.label, "confidence": self.confidence}

    @classmethod
    def from_dict(cls, d: dict) -> "RegionResult":
        return cls(BoundingBox(d["x"], d["y"], d["w"], d["h"]), d["label"], float(d["confidence"]))


@dataclass(frozen=True, eq=False)
class DensityResult:
    frame_id: str
    density: float
    regions: Tuple[RegionResult, ...] = field(default_factory=tuple)
    elapsed: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.density <= 1.0:
            raise ValueError(f"density {self.density} outside [0, 1]")
        object.__setattr__(self, "regions", tuple(self.regions))

    def signature(self) -> tuple:
        """Everything except timing, in a form that compares with ``==``."""
        return (
            self.frame_id,
            self.density,
            tuple(
                (r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.label, r.confidence,
                 None if r.mask is None else r.mask.tobytes())
                for r in self.regions
            ),
        )

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "density": self.density,
            "elapsed_s": self.elapsed,
            "regions": [r.to_dict() for r in self.regions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DensityResult":
        return cls(
            frame_id=d["frame_id"],
            density=float(d["density"]),
            regions=tuple(RegionResult.from_dict(r) for r in d["regions"]),
            elapsed=float(d["elapsed_s"]),
        )


def to_grayscale(frame: Frame) -> GrayImage:
    """Convert a frame to 8-bit luma; single-channel frames pass through."""
    if frame.channels == 1:
        return GrayImage(frame.data[:, :, 0])
    luma = frame.data.astype(np.float64) @ _LUMA
    # round-half-up on non-negative values
    return GrayImage(np.floor(luma + 0.5).clip(0, 255).astype(np.uint8))


def frame_id_for(path) -> str:
    return Path(path).stem


def load_frame(path) -> Frame:
    """Decode a PNG or binary PGM/PPM file into a :class:`Frame`.

    Raises ``FileNotFoundError`` for a missing file and
    :class:`FormatError` when the contents cannot be decoded.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("1", "L"):
                arr = np.asarray(im.convert("L"))
            elif im.mode == "RGB":
                arr = np.asarray(im)
            elif im.mode in ("P", "RGBA", "LA", "CMYK", "YCbCr"):
                arr = np.asarray(im.convert("RGB"))
            else:
                raise FormatError(f"{path}: unsupported pixel mode {im.mode!r}")
    except FormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise FormatError(f"{path}: cannot decode image ({exc})") from exc
    return Frame(frame_id_for(path), arr)


def list_frame_files(directory) -> List[Path]:
    """Supported images in ``directory``, ordered by (stem, full path)."""
    directory = Path(directory)
    files = [p for p in directory.iterdir()
             if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES]
    return sorted(files, key=lambda p: (p.stem, str(p)))


def save_frame(frame: Frame, path) -> None:
    arr = frame.data[:, :, 0] if frame.channels == 1 else frame.data
    Image.fromarray(arr).save(Path(path), format="PNG")


def contour_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one 4-neighbour outside the mask."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1]
                & padded[1:-1, :-2] & padded[1:-1, 2:])
    return mask & ~interior


def annotate(frame: Frame, regions: Iterable[RegionResult]) -> np.ndarray:
    """Return an RGB copy of ``frame`` with capillary regions drawn.

    Mask contours are painted black first, then a 1-px green border is
    drawn on the bounding box, so box edges are always green.
    """
    if frame.channels == 1:
        out = np.repeat(frame.data, 3, axis=2)
    else:
        out = frame.data.copy()
    for region in regions:
        if not region.is_capillary:
            continue
        b = region.bbox
        if not b.fits(frame.width, frame.height):
            raise DimensionMismatch(f"box {b} outside {frame.width}x{frame.height} frame")
        if region.mask is not None:
            ys, xs = np.nonzero(contour_pixels(region.mask))
            out[ys + b.y, xs + b.x] = (0, 0, 0)
        ys, xs = b.slices
        out[b.y, xs] = (0, 255, 0)
        out[b.y + b.h - 1, xs] = (0, 255, 0)
        out[ys, b.x] = (0, 255, 0)
        out[ys, b.x + b.w - 1] = (0, 255, 0)
    return out


def save_annotated(frame: Frame, result: DensityResult, path) -> None:
    """Write ``frame`` with the capillary regions of ``result`` drawn, as PNG."""
    Image.fromarray(annotate(frame, result.regions)).save(Path(path), format="PNG")

"""End-to-end capillary density for one frame.

gray -> background -> SSIM map -> candidate mask -> regions -> CNN -> density
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Iterator, List, Optional

import numpy as np

from . import segmentation as seg
from .cnn.model import CnnModel, classify_probs
from .core import DensityResult, Frame, GrayImage, RegionResult, to_grayscale
from .errors import CapxError, ConfigError, DimensionMismatch, FrameError

BACKGROUND_MODES = ("still", "sequence")


@dataclass(frozen=True)
class PipelineConfig:
    ssim_threshold: float = 0.75
    ssim_window: int = 7
    ssim_c1: float = seg.SSIM_C1
    ssim_c2: float = seg.SSIM_C2
    min_area: int = 25
    max_regions: int = 512
    background_mode: str = "still"
    blur_radius: int = 12
    gmm: seg.GmmConfig = field(default_factory=seg.GmmConfig)
    input_size: int = 64
    cnn_batch: int = 64
    weights_path: Optional[str] = None

    def validate(self) -> "PipelineConfig":
        if not -1.0 <= self.ssim_threshold <= 1.0:
            raise ConfigError("ssim_threshold must be in [-1, 1]")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ConfigError("ssim_window must be odd and >= 3")
        if self.ssim_c1 <= 0 or self.ssim_c2 <= 0:
            raise ConfigError("SSIM constants must be positive")
        if self.min_area < 1:
            raise ConfigError("min_area must be >= 1")
        if self.max_regions < 0:
            raise ConfigError("max_regions must be >= 0")
        if self.background_mode not in BACKGROUND_MODES:
            raise ConfigError(f"background_mode must be one of {BACKGROUND_MODES}")
        if self.blur_radius < 1:
            raise ConfigError("blur_radius must be >= 1")
        if self.input_size < 1 or self.cnn_batch < 1:
            raise ConfigError("input_size and cnn_batch must be positive")
        self.gmm.validate()
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "gmm" in d:
            gmm = d["gmm"]
            if isinstance(gmm, dict):
                gmm_known = {f.name for f in fields(seg.GmmConfig)}
                bad = set(gmm) - gmm_known
                if bad:
                    raise ConfigError(f"unknown gmm keys: {sorted(bad)}")
                d["gmm"] = seg.GmmConfig(**gmm)
        return cls(**d).validate()

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def merged(self, **overrides) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None}).validate()


def compute_density(regions: Iterable[RegionResult], width: int, height: int) -> float:
    """Fraction of frame pixels inside the union of capillary region masks."""
    canvas = np.zeros((height, width), dtype=bool)
    for r in regions:
        if not r.is_capillary:
            continue
        b = r.bbox
        if not b.fits(width, height):
            raise DimensionMismatch(f"region {b} outside {width}x{height} frame")
        if r.mask is None:
            canvas[b.slices] = True
        else:
            canvas[b.slices] |= r.mask
    return int(canvas.sum()) / (width * height)


def propose_regions(gray: GrayImage, background: GrayImage,
                    config: PipelineConfig) -> List[seg.CandidateRegion]:
    sim = seg.ssim_map(gray, background, config.ssim_window, config.ssim_c1, config.ssim_c2)
    mask = seg.candidate_mask(sim, config.ssim_threshold)
    return seg.extract_regions(mask, config.min_area, config.max_regions)


def classify_regions(gray: GrayImage, candidates: List[seg.CandidateRegion],
                     model: CnnModel, config: PipelineConfig) -> List[RegionResult]:
    out: List[RegionResult] = []
    size = model.input_shape[0]
    for start in range(0, len(candidates), config.cnn_batch):
        chunk = candidates[start:start + config.cnn_batch]
        patches = np.stack([seg.crop_patch(gray, c, size) for c in chunk])
        probs = model.forward_batch(patches)
        for cand, p in zip(chunk, probs):
            cls = classify_probs(p)
            out.append(RegionResult(cand.bbox, cls.label, cls.confidence, cand.mask))
    return out


def _check_model(model: CnnModel, config: PipelineConfig) -> None:
    if model.input_shape != (config.input_size, config.input_size, 1):
        raise ConfigError(
            f"model input {model.input_shape} does not match input_size {config.input_size}"
        )


def analyze_frame(frame: Frame, model: CnnModel, config: PipelineConfig = PipelineConfig(),
                  background: Optional[GrayImage] = None) -> DensityResult:
    """Capillary density of one frame.

    ``background`` overrides the background estimate (used by the
    sequence path); otherwise the still-image blur is used.
    """
    t0 = time.perf_counter()
    try:
        _check_model(model, config)
        gray = to_grayscale(frame)
        if background is None:
            background = seg.estimate_background_static(gray, config.blur_radius)
        candidates = propose_regions(gray, background, config)
        regions = classify_regions(gray, candidates, model, config)
        density = compute_density(regions, frame.width, frame.height)
    except FrameError:
        raise
    except (CapxError, ValueError) as exc:
        raise FrameError(frame.id, f"{type(exc).__name__}: {exc}") from exc
    return DensityResult(frame.id, density, tuple(regions), time.perf_counter() - t0)


def analyze_sequence(frames: Iterable[Frame], model: CnnModel,
                     config: PipelineConfig = PipelineConfig()) -> Iterator[DensityResult]:
    """Analyse a video-like sequence against an adaptive mixture background.

    Each frame first updates the mixture, then is compared with the
    resulting background image. The mixture is single-writer, so this
    path is inherently sequential.
    """
    bg_model = None
    for frame in frames:
        gray = to_grayscale(frame)
        if bg_model is None:
            bg_model = seg.init_background_model(gray.width, gray.height, config.gmm)
        try:
            bg_model.update(gray)
        except DimensionMismatch as exc:
            raise FrameError(frame.id, str(exc)) from exc
        yield analyze_frame(frame, model, config, background=bg_model.background_image())

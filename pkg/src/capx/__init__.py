"""Parallel capillary-density analysis.

A two-stage pipeline (SSIM region proposal against an estimated
background, then CNN classification of each region) turns a
microcirculation frame into a capillary density. Frames can be run
serially, on a master-slave pool, or on a worker-per-core pool, and the
``bench`` module compares the three.
"""

from .core import (
    BoundingBox,
    DensityResult,
    Frame,
    GrayImage,
    RegionResult,
    load_frame,
    save_annotated,
    to_grayscale,
)
from .pipeline import PipelineConfig, analyze_frame, analyze_sequence, compute_density

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "DensityResult", "Frame", "GrayImage", "PipelineConfig",
    "RegionResult", "analyze_frame", "analyze_sequence", "compute_density",
    "load_frame", "save_annotated", "to_grayscale",
]

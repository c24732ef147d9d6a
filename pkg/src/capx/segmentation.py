"""Region proposal: background estimation, SSIM map and candidate regions.

Two background paths exist. :class:`BackgroundModel` is an adaptive
per-pixel Gaussian mixture updated frame by frame for video sequences;
:func:`estimate_background_static` blurs a single still. Either result is
compared against the frame with :func:`ssim_map`, and low-similarity
pixels are grouped into 8-connected :class:`CandidateRegion` objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import ndimage

from .core import BoundingBox, GrayImage
from .errors import ConfigError, DimensionMismatch

SSIM_C1 = (0.01 * 255) ** 2
SSIM_C2 = (0.03 * 255) ** 2


@dataclass(frozen=True)
class GmmConfig:
    components: int = 3
    learning_rate: float = 0.05
    match_threshold: float = 2.5
    background_ratio: float = 0.8
    initial_variance: float = 225.0
    variance_floor: float = 4.0
    low_weight: float = 0.05

    def validate(self) -> "GmmConfig":
        if self.components < 1:
            raise ConfigError(f"components must be >= 1, got {self.components}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.match_threshold <= 0:
            raise ConfigError("match_threshold must be positive")
        if not 0.0 < self.background_ratio <= 1.0:
            raise ConfigError("background_ratio must be in (0, 1]")
        if self.variance_floor <= 0 or self.initial_variance < self.variance_floor:
            raise ConfigError("need 0 < variance_floor <= initial_variance")
        if not 0.0 < self.low_weight < 1.0:
            raise ConfigError("low_weight must be in (0, 1)")
        return self


class BackgroundModel:
    """Per-pixel adaptive mixture of Gaussians over 8-bit luminance.

    Component arrays have shape ``(H, W, K)`` and are kept sorted per
    pixel by ``weight / sqrt(variance)``, highest first.
    """

    def __init__(self, width: int, height: int, config: GmmConfig = GmmConfig()):
        if width < 1 or height < 1:
            raise ConfigError("model dimensions must be positive")
        self.config = config.validate()
        self.width = width
        self.height = height
        k = config.components
        self.weights = np.zeros((height, width, k))
        self.weights[:, :, 0] = 1.0
        self.means = np.zeros((height, width, k))
        self.variances = np.full((height, width, k), float(config.initial_variance))
        self.updates = 0

    @property
    def components(self) -> int:
        return self.config.components

    def update(self, image: GrayImage) -> None:
        """Fold one image into the mixture (single writer only)."""
        if image.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"image {image.width}x{image.height} vs model {self.width}x{self.height}"
            )
        cfg = self.config
        alpha = cfg.learning_rate
        x = image.data.astype(np.float64)[:, :, None]
        w, mu, var = self.weights, self.means, self.variances

        diff = x - mu
        within = (np.abs(diff) <= cfg.match_threshold * np.sqrt(var)) & (w > 0)
        matched_any = within.any(axis=2)
        # first match in rank order
        first = np.argmax(within, axis=2)
        hit = np.zeros_like(within)
        np.put_along_axis(hit, first[:, :, None], matched_any[:, :, None], axis=2)

        w *= 1.0 - alpha
        w += alpha * hit
        rho = alpha / np.maximum(w, alpha)
        mu += np.where(hit, rho * diff, 0.0)
        var += np.where(hit, rho * (diff * diff - var), 0.0)
        np.maximum(var, cfg.variance_floor, out=var)

        # no match: replace the lowest-ranked component
        miss = ~matched_any
        if miss.any():
            last = cfg.components - 1
            mu[miss, last] = x[miss, 0]
            var[miss, last] = cfg.initial_variance
            w[miss, last] = cfg.low_weight

        w /= w.sum(axis=2, keepdims=True)
        self._sort()
        self.updates += 1

    def _sort(self) -> None:
        rank = -self.weights / np.sqrt(self.variances)
        order = np.argsort(rank, axis=2, kind="stable")
        self.weights = np.take_along_axis(self.weights, order, axis=2)
        self.means = np.take_along_axis(self.means, order, axis=2)
        self.variances = np.take_along_axis(self.variances, order, axis=2)

    def background_count(self) -> np.ndarray:
        """Per pixel, the smallest B whose cumulative weight exceeds T."""
        cum = np.cumsum(self.weights, axis=2)
        b = np.argmax(cum > self.config.background_ratio, axis=2) + 1
        # rounding can leave the total at T exactly; then all K are background
        return np.where((cum > self.config.background_ratio).any(axis=2), b, self.components)

    def background_image(self) -> GrayImage:
        # the highest-ranked of the first B components is always component 0
        top = self.means[:, :, 0]
        return GrayImage(np.floor(top + 0.5).clip(0, 255).astype(np.uint8))


def init_background_model(width: int, height: int, config: GmmConfig = GmmConfig()) -> BackgroundModel:
    return BackgroundModel(width, height, config)


def update_background_model(model: BackgroundModel, image: GrayImage) -> None:
    model.update(image)


def background_image(model: BackgroundModel) -> GrayImage:
    return model.background_image()


def gaussian_kernel(radius: int) -> np.ndarray:
    sigma = radius / 2.0
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def estimate_background_static(image: GrayImage, kernel_radius: int = 12) -> GrayImage:
    """Gaussian blur (sigma = radius / 2) with clamp-to-edge borders."""
    if kernel_radius < 1:
        raise ConfigError(f"kernel_radius must be >= 1, got {kernel_radius}")
    k = gaussian_kernel(kernel_radius)
    out = ndimage.correlate1d(image.data.astype(np.float64), k, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, k, axis=1, mode="nearest")
    return GrayImage(np.floor(out + 0.5).clip(0, 255).astype(np.uint8))


def _window_sums(values: np.ndarray, radius: int) -> np.ndarray:
    """Sum of ``values`` over the window clipped to the image, per pixel.

    Zero padding makes out-of-image taps contribute nothing; integer-valued
    inputs give exact float64 sums.
    """
    h, w = values.shape
    span = 2 * radius + 1
    padded = np.pad(values, radius)
    rows = padded[0:h].copy()
    for i in range(1, span):
        rows += padded[i:i + h]
    out = rows[:, 0:w].copy()
    for i in range(1, span):
        out += rows[:, i:i + w]
    return out


def _window_counts(h: int, w: int, radius: int) -> np.ndarray:
    def along(n):
        idx = np.arange(n)
        return (np.minimum(idx + radius, n - 1) - np.maximum(idx - radius, 0) + 1).astype(np.float64)
    return along(h)[:, None] * along(w)[None, :]


@dataclass(frozen=True, eq=False)
class SimilarityMap:
    values: np.ndarray  # (H, W) float64

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def ssim_map(a: GrayImage, b: GrayImage, window: int = 7,
             c1: float = SSIM_C1, c2: float = SSIM_C2) -> SimilarityMap:
    """Per-pixel SSIM over a uniform square window centred on each pixel.

    Windows are clipped at the image border and statistics are taken over
    the clipped area.
    """
    if a.shape != b.shape:
        raise DimensionMismatch(f"ssim inputs differ: {a.shape} vs {b.shape}")
    if window < 3 or window % 2 == 0:
        raise ConfigError(f"window must be odd and >= 3, got {window}")
    r = window // 2
    ia = a.data.astype(np.float64)
    ib = b.data.astype(np.float64)
    n = _window_counts(a.height, a.width, r)
    mu_a = _window_sums(ia, r) / n
    mu_b = _window_sums(ib, r) / n
    var_a = _window_sums(ia * ia, r) / n - mu_a * mu_a
    var_b = _window_sums(ib * ib, r) / n - mu_b * mu_b
    cov = _window_sums(ia * ib, r) / n - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return SimilarityMap(np.clip(num / den, -1.0, 1.0))


def candidate_mask(sim: SimilarityMap, threshold: float = 0.75) -> np.ndarray:
    if not -1.0 <= threshold <= 1.0:
        raise ConfigError(f"threshold must be in [-1, 1], got {threshold}")
    return sim.values < threshold


@dataclass(frozen=True, eq=False)
class CandidateRegion:
    bbox: BoundingBox
    mask: np.ndarray  # (h, w) bool

    @property
    def area(self) -> int:
        return int(self.mask.sum())


_EIGHT = np.ones((3, 3), dtype=bool)


def extract_regions(mask: np.ndarray, min_area: int = 25, max_regions: int = 512) -> List[CandidateRegion]:
    """8-connected components of ``mask`` as tight boxes plus masks.

    Components smaller than ``min_area`` are dropped. When more than
    ``max_regions`` remain, the largest win (ties keep sort order). The
    result is sorted by the (y, x) of each box's top-left corner.
    """
    if min_area < 1:
        raise ConfigError(f"min_area must be >= 1, got {min_area}")
    if max_regions < 0:
        raise ConfigError("max_regions must be non-negative")
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    found = []
    for label, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or areas[label] < min_area:
            continue
        ys, xs = sl
        bbox = BoundingBox(xs.start, ys.start, xs.stop - xs.start, ys.stop - ys.start)
        found.append((bbox.y, bbox.x, label, bbox, sl))
    # label numbers follow raster order of each component's first pixel
    found.sort(key=lambda t: (t[0], t[1], t[2]))
    if len(found) > max_regions:
        ranked = sorted(range(len(found)), key=lambda i: (-areas[found[i][2]], i))
        keep = sorted(ranked[:max_regions])
        found = [found[i] for i in keep]
    return [CandidateRegion(bbox, labels[sl] == label) for _, _, label, bbox, sl in found]


def crop_patch(image: GrayImage, region: CandidateRegion, out_size: int = 64) -> np.ndarray:
    """Bilinear resample of the region's box to ``(out_size, out_size, 1)`` in [0, 1].

    Pixel centres are aligned (``src = (dst + 0.5) * scale - 0.5``) and
    sample positions are clamped to the box.
    """
    b = region.bbox
    if not b.fits(image.width, image.height):
        raise DimensionMismatch(f"box {b} outside {image.width}x{image.height} image")
    if out_size < 1:
        raise ConfigError("out_size must be positive")
    src = image.data[b.slices].astype(np.float64)

    def axis(n_src):
        pos = (np.arange(out_size) + 0.5) * (n_src / out_size) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis(b.h)
    x0, x1, fx = axis(b.w)
    fy = fy[:, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return (out / 255.0).astype(np.float32)[:, :, None]

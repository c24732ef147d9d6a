"""
Capillary density of one frame, stage by stage
==============================================

Generates a synthetic microcirculation frame, then runs each pipeline
stage by hand so the intermediate arrays can be inspected.
"""

import tempfile
from pathlib import Path

import numpy as np

from capx import corpus, segmentation as seg
from capx.cnn import gen_random_weights
from capx.core import save_annotated, to_grayscale
from capx.pipeline import PipelineConfig, analyze_frame, classify_regions, compute_density

config = PipelineConfig()
frame = corpus.generate_frame(seed=7, index=0, width=640, height=360)
print("frame", frame.id, frame.width, "x", frame.height)

# one luminance plane
gray = to_grayscale(frame)
print("gray range", gray.data.min(), gray.data.max())

# still-image background: a wide blur removes thin dark vessels
background = seg.estimate_background_static(gray, config.blur_radius)

# vessels are where the frame stops looking like its background
sim = seg.ssim_map(gray, background, config.ssim_window)
mask = seg.candidate_mask(sim, config.ssim_threshold)
print("SSIM min %.3f, candidate pixels %.2f%%" % (sim.values.min(), 100 * mask.mean()))

candidates = seg.extract_regions(mask, config.min_area, config.max_regions)
print(len(candidates), "candidate regions; largest area", max(c.area for c in candidates))

# random weights exercise the same code path as trained ones
model = gen_random_weights(seed=3)
regions = classify_regions(gray, candidates, model, config)
labels = [r.label for r in regions]
print({k: labels.count(k) for k in set(labels)})

density = compute_density(regions, frame.width, frame.height)
print("density %.4f" % density)

# the one-call version gives the same number
result = analyze_frame(frame, model, config)
assert result.density == density
print("analyze_frame %.3fs" % result.elapsed)

out = Path(tempfile.mkdtemp()) / f"{frame.id}_annotated.png"
save_annotated(frame, result, out)
print("annotated image:", out)

# a background mixture learns the same thing from a video-like stream
model_bg = seg.init_background_model(gray.width, gray.height)
for _ in range(30):
    model_bg.update(gray)
diff = np.abs(model_bg.background_image().data.astype(int) - gray.data.astype(int))
print("mixture background after 30 identical frames: max |diff| =", diff.max())

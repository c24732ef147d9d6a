"""
Patch classifier: architecture, weights file and a forward pass
===============================================================
"""

import tempfile
from pathlib import Path

import numpy as np

from capx.cnn import build_paper_architecture, classify_patch, forward, gen_random_weights, load_weights, save_weights

arch = build_paper_architecture(64)
for layer in arch.layers:
    print(f"{layer.name:<12} {layer.kind:<10} {layer.in_shape} -> {layer.out_shape}")

n_params = sum(int(np.prod(s)) for l in arch.weighted_layers() for s in l.param_shapes())
print("parameters:", n_params)

model = gen_random_weights(seed=42)

# a diagonal stripe patch in [0, 1]
yy, xx = np.mgrid[0:64, 0:64]
patch = (((3 * xx + 5 * yy) % 64) / 63.0).astype(np.float32)[:, :, None]
probs = forward(model, patch)
print("softmax", probs, "->", classify_patch(model, patch))

# the weights file round-trips bit for bit
path = Path(tempfile.mkdtemp()) / "model.cxw"
save_weights(model, path)
again = load_weights(path)
print(path.stat().st_size, "bytes; same output:", forward(again, patch).tobytes() == probs.tobytes())

# different seeds lean different ways on the same patch
for seed in (2, 3, 4):
    print("seed", seed, forward(gen_random_weights(seed), patch))

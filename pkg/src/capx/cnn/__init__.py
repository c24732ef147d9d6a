"""From-scratch inference for the capillary classifier."""

from .layers import conv2d, dense, flatten, maxpool2d, relu, softmax
from .model import (
    Classification,
    CnnModel,
    Layer,
    Lcg64,
    build_paper_architecture,
    classify_patch,
    classify_probs,
    forward,
    gen_random_weights,
)
from .weights import load_weights, save_weights

__all__ = [
    "Classification", "CnnModel", "Layer", "Lcg64",
    "build_paper_architecture", "classify_patch", "classify_probs",
    "conv2d", "dense", "flatten", "forward", "gen_random_weights",
    "load_weights", "maxpool2d", "relu", "save_weights", "softmax",
]

"""Forward-only layer kernels on float32 numpy arrays.

Every kernel accepts optional leading batch axes, so a single patch
``(H, W, C)`` and a stack ``(N, H, W, C)`` go through the same code.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def conv2d(x, kernels, bias):
    """Valid, stride-1 2-D convolution (cross-correlation).

    ``out[y, x, f] = bias[f] + sum_{dy, dx, c} x[y+dy, x+dx, c] * kernels[dy, dx, c, f]``
    """
    x = np.asarray(x, dtype=np.float32)
    kernels = np.asarray(kernels, dtype=np.float32)
    bias = np.asarray(bias, dtype=np.float32)
    if x.ndim < 3:
        raise ShapeError(f"conv2d input must be (..., H, W, C), got {x.shape}")
    if kernels.ndim != 4 or kernels.shape[0] != kernels.shape[1]:
        raise ShapeError(f"kernels must be (k, k, C, F), got {kernels.shape}")
    k, _, c, f = kernels.shape
    h, w, cin = x.shape[-3:]
    if cin != c:
        raise ShapeError(f"conv2d channel mismatch: input {cin}, kernels {c}")
    if k > h or k > w:
        raise ShapeError(f"kernel {k}x{k} larger than input {h}x{w}")
    if bias.shape != (f,):
        raise ShapeError(f"bias must have shape ({f},), got {bias.shape}")
    # (..., H', W', C, k, k) -> (..., H', W', k, k, C)
    win = sliding_window_view(x, (k, k), axis=(-3, -2))
    win = np.moveaxis(win, -3, -1)
    cols = win.reshape(win.shape[:-3] + (k * k * c,))
    out = cols @ kernels.reshape(k * k * c, f)
    out += bias
    return out


def maxpool2d(x, pool=2, stride=2):
    """2x2/2 max pooling; a trailing odd row or column is dropped."""
    x = np.asarray(x, dtype=np.float32)
    if pool != 2 or stride != 2:
        raise ShapeError("only 2x2 pooling with stride 2 is supported")
    if x.ndim < 3:
        raise ShapeError(f"maxpool2d input must be (..., H, W, C), got {x.shape}")
    h, w, c = x.shape[-3:]
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2d needs H, W >= 2, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    x = x[..., : 2 * h2, : 2 * w2, :]
    x = x.reshape(x.shape[:-3] + (h2, 2, w2, 2, c))
    return x.max(axis=(-4, -2))


def dense(x, weights, bias):
    """``out[j] = bias[j] + sum_i x[i] * weights[i, j]``."""
    x = np.asarray(x, dtype=np.float32)
    weights = np.asarray(weights, dtype=np.float32)
    bias = np.asarray(bias, dtype=np.float32)
    if weights.ndim != 2:
        raise ShapeError(f"dense weights must be (N, M), got {weights.shape}")
    n, m = weights.shape
    if x.shape[-1:] != (n,):
        raise ShapeError(f"dense expects input length {n}, got shape {x.shape}")
    if bias.shape != (m,):
        raise ShapeError(f"dense bias must have shape ({m},), got {bias.shape}")
    out = x @ weights
    out += bias
    return out


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0))


def softmax(x):
    x = np.asarray(x, dtype=np.float32)
    if x.ndim < 1 or x.shape[-1] < 1:
        raise ShapeError("softmax needs at least one logit")
    z = x.astype(np.float64)
    z = np.exp(z - z.max(axis=-1, keepdims=True))
    return (z / z.sum(axis=-1, keepdims=True)).astype(np.float32)


def flatten(x, batched=False):
    x = np.asarray(x, dtype=np.float32)
    if batched:
        return x.reshape(x.shape[0], -1)
    return x.reshape(-1)

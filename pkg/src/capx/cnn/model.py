"""Layered CNN model, the capillary classifier architecture and its RNG."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import CAPILLARY, NOT_CAPILLARY
from ..errors import ConfigError, ShapeError
from . import layers as L

KINDS = ("conv2d", "maxpool2d", "flatten", "dense", "relu", "softmax")
WEIGHTED = ("conv2d", "dense")


@dataclass(frozen=True, eq=False)
class Layer:
    kind: str
    name: str
    in_shape: Tuple[int, ...]
    out_shape: Tuple[int, ...]
    # conv2d: kernel (k, k, C, F) + bias (F,); dense: kernel (N, M) + bias (M,)
    kernel: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")

    @property
    def weighted(self) -> bool:
        return self.kind in WEIGHTED

    def param_shapes(self) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        if self.kind == "conv2d":
            f = self.out_shape[-1]
            k = self.in_shape[0] - self.out_shape[0] + 1
            return (k, k, self.in_shape[-1], f), (f,)
        if self.kind == "dense":
            return (self.in_shape[0], self.out_shape[0]), (self.out_shape[0],)
        raise ValueError(f"{self.kind} layers carry no parameters")

    def apply(self, x: np.ndarray, batched: bool = False) -> np.ndarray:
        if self.kind == "conv2d":
            return L.conv2d(x, self.kernel, self.bias)
        if self.kind == "maxpool2d":
            return L.maxpool2d(x)
        if self.kind == "flatten":
            return L.flatten(x, batched)
        if self.kind == "dense":
            return L.dense(x, self.kernel, self.bias)
        if self.kind == "relu":
            return L.relu(x)
        return L.softmax(x)


@dataclass(frozen=True)
class Classification:
    label: str
    confidence: float


class CnnModel:
    """An ordered chain of layers whose declared shapes must line up."""

    def __init__(self, layers: Sequence[Layer]):
        self.layers: List[Layer] = list(layers)
        if not self.layers:
            raise ConfigError("a model needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_shape != nxt.in_shape:
                raise ConfigError(
                    f"layer {nxt.name} expects {nxt.in_shape}, previous layer "
                    f"{prev.name} produces {prev.out_shape}"
                )
        if self.layers[-1].out_shape != (2,):
            raise ConfigError(f"final layer must output 2 values, got {self.layers[-1].out_shape}")
        for layer in self.layers:
            if layer.weighted and (layer.kernel is None) != (layer.bias is None):
                raise ConfigError(f"layer {layer.name} is partially initialised")

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return self.layers[0].in_shape

    @property
    def initialized(self) -> bool:
        return all(l.kernel is not None for l in self.layers if l.weighted)

    def weighted_layers(self) -> List[Layer]:
        return [l for l in self.layers if l.weighted]

    def with_params(self, params: Dict[str, Tuple[np.ndarray, np.ndarray]]) -> "CnnModel":
        """Copy of this model with ``{layer name: (kernel, bias)}`` filled in."""
        new = []
        for layer in self.layers:
            if layer.weighted:
                try:
                    kernel, bias = params[layer.name]
                except KeyError:
                    raise ConfigError(f"no parameters for layer {layer.name}") from None
                kshape, bshape = layer.param_shapes()
                kernel = np.array(kernel, dtype=np.float32)
                bias = np.array(bias, dtype=np.float32)
                if kernel.shape != kshape or bias.shape != bshape:
                    raise ConfigError(
                        f"layer {layer.name}: expected {kshape}/{bshape}, "
                        f"got {kernel.shape}/{bias.shape}"
                    )
                if not (np.isfinite(kernel).all() and np.isfinite(bias).all()):
                    raise ConfigError(f"layer {layer.name} has non-finite weights")
                kernel.flags.writeable = False
                bias.flags.writeable = False
                layer = replace(layer, kernel=kernel, bias=bias)
            new.append(layer)
        return CnnModel(new)

    def forward_batch(self, patches: np.ndarray) -> np.ndarray:
        """Run ``(N, *input_shape)`` patches through the chain; returns ``(N, 2)``."""
        x = np.asarray(patches, dtype=np.float32)
        if not self.initialized:
            raise ConfigError("model weights are not initialised")
        for layer in self.layers:
            if x.shape[1:] != layer.in_shape:
                raise ShapeError(
                    f"layer {layer.name} ({layer.kind}) expects {layer.in_shape}, got {x.shape[1:]}"
                )
            x = layer.apply(x, batched=True)
        return x

    def __repr__(self):
        chain = " -> ".join(f"{l.name}{l.out_shape}" for l in self.layers)
        return f"CnnModel({self.input_shape} -> {chain})"


def forward(model: CnnModel, patch: np.ndarray) -> np.ndarray:
    """Two class probabilities for one patch."""
    patch = np.asarray(patch, dtype=np.float32)
    if patch.shape != model.input_shape:
        raise ShapeError(
            f"layer {model.layers[0].name} expects {model.input_shape}, got {patch.shape}"
        )
    return model.forward_batch(patch[None])[0]


def classify_probs(probs) -> Classification:
    """Index 0 is capillary; an exact tie is not-capillary."""
    p_cap, p_not = float(probs[0]), float(probs[1])
    if p_cap > p_not:
        return Classification(CAPILLARY, min(max(p_cap, 0.0), 1.0))
    return Classification(NOT_CAPILLARY, min(max(p_not, 0.0), 1.0))


def classify_patch(model: CnnModel, patch: np.ndarray) -> Classification:
    return classify_probs(forward(model, patch))


def build_paper_architecture(input_size: int = 64, channels: int = 1,
                             filters: Sequence[int] = (32, 64, 128),
                             hidden: Sequence[int] = (128, 64)) -> CnnModel:
    """Three conv(3x3)+ReLU+maxpool blocks, then dense 128 -> 64 -> 2 with softmax.

    The returned model has shapes only; see :func:`gen_random_weights`
    or :func:`capx.cnn.weights.load_weights` for parameters.
    """
    if input_size < 3:
        raise ConfigError(f"input_size {input_size} too small")
    layers: List[Layer] = []
    shape = (input_size, input_size, channels)
    for i, f in enumerate(filters, start=1):
        h, w, _ = shape
        if h < 3 or w < 3:
            raise ConfigError(f"input_size {input_size}: block {i} input {h}x{w} smaller than 3x3")
        conv_out = (h - 2, w - 2, f)
        pool_out = (conv_out[0] // 2, conv_out[1] // 2, f)
        if pool_out[0] < 1 or pool_out[1] < 1:
            raise ConfigError(f"input_size {input_size}: pooling in block {i} collapses to {pool_out}")
        layers += [
            Layer("conv2d", f"conv{i}", shape, conv_out),
            Layer("relu", f"conv{i}_relu", conv_out, conv_out),
            Layer("maxpool2d", f"pool{i}", conv_out, pool_out),
        ]
        shape = pool_out
    flat = (int(np.prod(shape)),)
    layers.append(Layer("flatten", "flatten", shape, flat))
    shape = flat
    for i, n in enumerate(list(hidden) + [2], start=1):
        out = (n,)
        layers.append(Layer("dense", f"dense{i}", shape, out))
        if i <= len(hidden):
            layers.append(Layer("relu", f"dense{i}_relu", out, out))
        else:
            layers.append(Layer("softmax", "softmax", out, out))
        shape = out
    return CnnModel(layers)


class Lcg64:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``state <- a * state + c  (mod 2**64)``; uniforms take the top 53 bits
    of each new state.
    """

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1
    BLOCK = 1024

    def __init__(self, seed: int):
        self.state = seed & self.MASK
        # jump-ahead constants for one block
        a_n, c_n = 1, 0
        for _ in range(self.BLOCK):
            a_n, c_n = (self.A * a_n) & self.MASK, (self.A * c_n + self.C) & self.MASK
        self._jump_a = np.uint64(a_n)
        self._jump_c = np.uint64(c_n)

    def next_u64(self) -> int:
        self.state = (self.A * self.state + self.C) & self.MASK
        return self.state

    def u64_array(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        if n == 0:
            return out
        head = min(n, self.BLOCK)
        out[:head] = [self.next_u64() for _ in range(head)]
        pos = head
        while pos < n:
            take = min(self.BLOCK, n - pos)
            out[pos:pos + take] = out[pos - self.BLOCK:pos - self.BLOCK + take] * self._jump_a + self._jump_c
            pos += take
        self.state = int(out[-1])
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` floats in [0, 1)."""
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def gen_random_weights(seed: int = 42, input_size: int = 64) -> CnnModel:
    """Deterministic He-scaled weights for the classifier architecture.

    Kernels are uniform with standard deviation ``sqrt(2 / fan_in)``,
    drawn from :class:`Lcg64` layer by layer; biases are zero.
    """
    model = build_paper_architecture(input_size)
    rng = Lcg64(seed)
    params = {}
    for layer in model.weighted_layers():
        kshape, bshape = layer.param_shapes()
        fan_in = int(np.prod(kshape[:-1]))
        limit = np.sqrt(3.0) * np.sqrt(2.0 / fan_in)
        u = rng.uniform(int(np.prod(kshape)))
        kernel = ((2.0 * u - 1.0) * limit).astype(np.float32).reshape(kshape)
        params[layer.name] = (kernel, np.zeros(bshape, dtype=np.float32))
    return model.with_params(params)

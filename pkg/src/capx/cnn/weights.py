"""CXW1 binary weight files.

Layout (all integers little-endian)::

    b"CXW1"
    u32  record count
    per record:
        u8   name length, then the UTF-8 name
        u8   rank
        rank x u32 dims
        prod(dims) x f32, row-major

Records are named ``<layer>.kernel`` / ``<layer>.bias`` for each
weighted layer, plus one leading ``input_shape`` record whose f32 values
give the model input ``(H, W, C)``. The layer chain is rebuilt from the
conv and dense records and validated against the classifier architecture.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from ..errors import ConfigError, FormatError
from .model import CnnModel, build_paper_architecture

MAGIC = b"CXW1"


def _records(model: CnnModel) -> List[Tuple[str, np.ndarray]]:
    recs = [("input_shape", np.array(model.input_shape, dtype=np.float32))]
    for layer in model.weighted_layers():
        recs.append((f"{layer.name}.kernel", layer.kernel))
        recs.append((f"{layer.name}.bias", layer.bias))
    return recs


def dumps(model: CnnModel) -> bytes:
    if not model.initialized:
        raise ConfigError("cannot serialise a model without weights")
    recs = _records(model)
    parts = [MAGIC, struct.pack("<I", len(recs))]
    for name, arr in recs:
        raw_name = name.encode("utf-8")
        if len(raw_name) > 255 or arr.ndim > 255:
            raise ConfigError(f"record {name!r} cannot be encoded")
        parts.append(struct.pack("<B", len(raw_name)) + raw_name)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def _parse(buf: bytes) -> Dict[str, np.ndarray]:
    if buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise FormatError("weight file truncated")
        chunk = buf[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    out: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<B", take(1))
        try:
            name = take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("record name is not UTF-8") from exc
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(take(4 * n), dtype="<f4").astype(np.float32).reshape(dims)
        if name in out:
            raise FormatError(f"duplicate record {name!r}")
        out[name] = arr
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after last record")
    return out


def loads(buf: bytes) -> CnnModel:
    recs = _parse(buf)
    shape = recs.pop("input_shape", None)
    if shape is None or shape.shape != (3,):
        raise FormatError("missing input_shape record")
    h, w, c = (int(v) for v in shape)
    if h != w or h < 1 or c < 1:
        raise FormatError(f"unsupported input shape {(h, w, c)}")

    names = []
    for key in recs:
        layer, _, part = key.rpartition(".")
        if part not in ("kernel", "bias") or not layer:
            raise FormatError(f"unexpected record {key!r}")
        if layer not in names:
            names.append(layer)
    convs = [recs[f"{n}.kernel"].shape[-1] for n in names
             if f"{n}.kernel" in recs and recs[f"{n}.kernel"].ndim == 4]
    denses = [recs[f"{n}.kernel"].shape[-1] for n in names
              if f"{n}.kernel" in recs and recs[f"{n}.kernel"].ndim == 2]
    if not convs or not denses:
        raise FormatError("weight file lacks conv or dense layers")
    try:
        skeleton = build_paper_architecture(h, c, filters=convs, hidden=denses[:-1])
    except ConfigError as exc:
        raise FormatError(f"shape chain invalid: {exc}") from exc
    expected = [l.name for l in skeleton.weighted_layers()]
    if expected != names:
        raise FormatError(f"layer records {names} do not match chain {expected}")
    params = {}
    for name in names:
        try:
            params[name] = (recs[f"{name}.kernel"], recs[f"{name}.bias"])
        except KeyError as exc:
            raise FormatError(f"missing record {exc.args[0]!r}") from None
    try:
        return skeleton.with_params(params)
    except ConfigError as exc:
        raise FormatError(str(exc)) from exc


def save_weights(model: CnnModel, path) -> None:
    Path(path).write_bytes(dumps(model))


def load_weights(path) -> CnnModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such weights file: {path}")
    return loads(path.read_bytes())

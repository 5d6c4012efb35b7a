"""Binary parameter checkpoints.

MLP record (all integers unsigned 32-bit little-endian, floats float64 LE)::

    magic       4 bytes  b"DXMP"
    version     u32      1
    layers      u32      layer count L
    L times:
        fan_in      u32
        fan_out     u32
        activation  u32  0=identity 1=relu 2=tanh
        weight      fan_in*fan_out float64, row-major
        bias        fan_out float64

Bundle (several named records in one file)::

    magic       4 bytes  b"DXCB"
    version     u32      1
    records     u32      record count R
    R times:
        name_len    u32
        name        utf-8 bytes
        MLP record  as above
"""

from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .mlp import Layer, MlpParams

MLP_MAGIC = b"DXMP"
BUNDLE_MAGIC = b"DXCB"
VERSION = 1
_ACT_CODES = {"identity": 0, "relu": 1, "tanh": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


class CheckpointError(ValueError):
    pass


def _read_exact(f: BinaryIO, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError("truncated checkpoint")
    return data


def _u32(f: BinaryIO) -> int:
    return struct.unpack("<I", _read_exact(f, 4))[0]


def write_mlp(f: BinaryIO, params: MlpParams) -> None:
    f.write(MLP_MAGIC)
    f.write(struct.pack("<II", VERSION, len(params.layers)))
    for layer in params.layers:
        w = np.asarray(layer.weight, dtype="<f8")
        b = np.asarray(layer.bias, dtype="<f8")
        f.write(struct.pack("<III", w.shape[0], w.shape[1], _ACT_CODES[layer.activation]))
        f.write(np.ascontiguousarray(w).tobytes())
        f.write(np.ascontiguousarray(b).tobytes())


def read_mlp(f: BinaryIO) -> MlpParams:
    if _read_exact(f, 4) != MLP_MAGIC:
        raise CheckpointError("bad MLP record magic")
    version = _u32(f)
    if version != VERSION:
        raise CheckpointError(f"unsupported MLP record version {version}")
    n_layers = _u32(f)
    layers = []
    for _ in range(n_layers):
        fan_in, fan_out, code = struct.unpack("<III", _read_exact(f, 12))
        if code not in _ACT_NAMES:
            raise CheckpointError(f"unknown activation code {code}")
        w = np.frombuffer(_read_exact(f, 8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out)
        b = np.frombuffer(_read_exact(f, 8 * fan_out), dtype="<f8")
        layers.append(Layer(w.astype(np.float64), b.astype(np.float64), _ACT_NAMES[code]))
    return MlpParams(tuple(layers))


def save_params(path: str | Path, params: MlpParams) -> None:
    with open(path, "wb") as f:
        write_mlp(f, params)


def load_params(path: str | Path) -> MlpParams:
    with open(path, "rb") as f:
        return read_mlp(f)


def dumps_bundle(records: dict[str, MlpParams]) -> bytes:
    buf = io.BytesIO()
    buf.write(BUNDLE_MAGIC)
    buf.write(struct.pack("<II", VERSION, len(records)))
    for name, params in records.items():
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        write_mlp(buf, params)
    return buf.getvalue()


def loads_bundle(data: bytes) -> dict[str, MlpParams]:
    f = io.BytesIO(data)
    if _read_exact(f, 4) != BUNDLE_MAGIC:
        raise CheckpointError("bad bundle magic")
    version = _u32(f)
    if version != VERSION:
        raise CheckpointError(f"unsupported bundle version {version}")
    out = {}
    for _ in range(_u32(f)):
        name = _read_exact(f, _u32(f)).decode("utf-8")
        out[name] = read_mlp(f)
    if f.read(1):
        raise CheckpointError("trailing bytes after last record")
    return out


def save_bundle(path: str | Path, records: dict[str, MlpParams]) -> None:
    Path(path).write_bytes(dumps_bundle(records))


def load_bundle(path: str | Path) -> dict[str, MlpParams]:
    return loads_bundle(Path(path).read_bytes())

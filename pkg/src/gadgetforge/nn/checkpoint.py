"""Binary checkpoint files.

Layout (little-endian):
    magic      b"GFCKPT01"
    u32        header length, then that many bytes of ``key=value`` lines
    u32        tensor count
    per tensor:
        u16 name length, name (utf-8)
        u8 ndim, ndim * u32 dims
        u8 dtype code (1 = float64, 2 = float32, 3 = int64)
        raw values in row-major order
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from ..corpus_io import atomic_write
from ..errors import DataError

MAGIC = b"GFCKPT01"
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<f4"), 3: np.dtype("<i8")}
_CODES = {v: k for k, v in _DTYPES.items()}


class CheckpointError(DataError):
    pass


def dumps(header: dict[str, str], tensors: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    text = "".join(f"{k}={v}\n" for k, v in sorted(header.items())).encode("utf-8")
    buf.write(struct.pack("<I", len(text)))
    buf.write(text)
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        dt = arr.dtype.newbyteorder("<")
        if dt not in _CODES:
            raise ValueError(f"{name}: unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(struct.pack("<B", _CODES[dt]))
        buf.write(np.ascontiguousarray(arr, dtype=dt).tobytes())
    return buf.getvalue()


def loads(data: bytes) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint (bad magic)")
    pos = len(MAGIC)

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointError("truncated checkpoint")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (hlen,) = struct.unpack("<I", take(4))
    header = {}
    for line in take(hlen).decode("utf-8").splitlines():
        k, _, v = line.partition("=")
        header[k] = v
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = take(nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim))
        (code,) = struct.unpack("<B", take(1))
        if code not in _DTYPES:
            raise CheckpointError(f"{name}: unknown dtype code {code}")
        dt = _DTYPES[code]
        n = int(np.prod(dims, dtype=np.int64))
        tensors[name] = np.frombuffer(take(n * dt.itemsize), dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
    if pos != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    return header, tensors


def save_model(model, path, extra: dict | None = None) -> None:
    header = {f"model.{k}": v for k, v in model.config.to_kv().items()}
    header.update(extra or {})
    atomic_write(path, dumps(header, model.params))


def load_model(path):
    from .models import ModelConfig, from_params

    header, tensors = loads(Path(path).read_bytes())
    kv = {k[len("model."):]: v for k, v in header.items() if k.startswith("model.")}
    model = from_params(ModelConfig.from_kv(kv), {k: v.copy() for k, v in tensors.items()})
    return model, header

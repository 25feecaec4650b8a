"""Binary weight files.

Layout, all integers little-endian u32::

    b"QEW1" | version (=1) | tensor count
    per tensor: name length | UTF-8 name | ndim | ndim extents | f32 LE values (row-major)
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from collections import OrderedDict
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import FormatError

MAGIC = b"QEW1"
VERSION = 1


class WeightStore(OrderedDict):
    """Ordered ``name -> float32 array`` mapping."""

    def __init__(self, items: Mapping[str, np.ndarray] | None = None):
        super().__init__()
        for k, v in (items or {}).items():
            self[k] = v

    def __setitem__(self, key: str, value) -> None:
        super().__setitem__(key, np.array(value, dtype="<f4", order="C"))

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<II", VERSION, len(self))]
        for name, arr in self.items():
            raw = name.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)))
            parts.append(raw)
            parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
            parts.append(arr.tobytes(order="C"))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "WeightStore":
        reader = _Reader(buf)
        if reader.take(4) != MAGIC:
            raise FormatError("not a weight file (bad magic)")
        version, count = reader.unpack("<II")
        if version != VERSION:
            raise FormatError(f"unsupported weight file version {version}")
        items: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (nlen,) = reader.unpack("<I")
            try:
                name = reader.take(nlen).decode("utf-8")
            except UnicodeDecodeError:
                raise FormatError("tensor name is not valid UTF-8") from None
            if name in items:
                raise FormatError(f"duplicate tensor name {name!r}")
            (ndim,) = reader.unpack("<I")
            shape = reader.unpack(f"<{ndim}I") if ndim else ()
            n = int(np.prod(shape, dtype=np.int64))
            items[name] = np.frombuffer(reader.take(4 * n), dtype="<f4").reshape(shape).copy()
        if reader.remaining():
            raise FormatError(f"{reader.remaining()} trailing bytes after last tensor")
        return cls(items)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError("weight file is truncated")
        out = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def remaining(self) -> int:
        return len(self.buf) - self.pos


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_weights(store: Mapping[str, np.ndarray], path: str | os.PathLike) -> None:
    if not isinstance(store, WeightStore):
        store = WeightStore(store)
    atomic_write_bytes(path, store.to_bytes())


def load_weights(path: str | os.PathLike) -> WeightStore:
    return WeightStore.from_bytes(Path(path).read_bytes())

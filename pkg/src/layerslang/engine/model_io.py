"""``LYRM`` model container.

Layout (all integers little-endian)::

    b"LYRM"  u32 version  u32 layer_count
    per layer:   u16 name_len, name (utf-8), u32 tensor_count
    per tensor:  u16 name_len, name (utf-8), u32 ndim, ndim x u32 dims,
                 prod(dims) float64 values
"""

import struct

import numpy as np

from ..diagnostics import EngineError

MAGIC = b"LYRM"
VERSION = 1


def _name(buf, text):
    raw = text.encode("utf-8")
    buf.append(struct.pack("<H", len(raw)))
    buf.append(raw)


def dump(layers):
    """Encode ``[(layer_name, [(tensor_name, array), ...]), ...]``."""
    buf = [MAGIC, struct.pack("<II", VERSION, len(layers))]
    for lname, tensors in layers:
        _name(buf, lname)
        buf.append(struct.pack("<I", len(tensors)))
        for tname, arr in tensors:
            arr = np.asarray(arr, dtype=np.float64)
            _name(buf, tname)
            buf.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
            buf.append(arr.astype("<f8").tobytes())
    return b"".join(buf)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise EngineError("model file is truncated")
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out

    def name(self):
        (n,) = self.take("<H")
        raw = self.data[self.pos:self.pos + n]
        if len(raw) != n:
            raise EngineError("model file is truncated")
        self.pos += n
        return raw.decode("utf-8")


def parse(data):
    if data[:4] != MAGIC:
        raise EngineError("not a model file (bad magic)")
    r = _Reader(data)
    r.pos = 4
    version, count = r.take("<II")
    if version != VERSION:
        raise EngineError(f"unsupported model version {version}")
    layers = []
    for _ in range(count):
        lname = r.name()
        (nt,) = r.take("<I")
        tensors = []
        for _ in range(nt):
            tname = r.name()
            (ndim,) = r.take("<I")
            shape = r.take(f"<{ndim}I") if ndim else ()
            size = int(np.prod(shape, dtype=np.int64))
            end = r.pos + 8 * size
            if end > len(data):
                raise EngineError("model file is truncated")
            vals = np.frombuffer(data, dtype="<f8", count=size, offset=r.pos)
            r.pos = end
            tensors.append((tname, vals.astype(np.float64).reshape(shape)))
        layers.append((lname, tensors))
    if r.pos != len(data):
        raise EngineError("trailing bytes after model data")
    return layers

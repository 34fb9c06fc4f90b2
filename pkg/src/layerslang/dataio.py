"""Dataset files and the data-level script transforms.

Two on-disk formats are supported, both documented in docs/data-format.md:

* ascii: a header line ``n d k`` followed by ``n`` rows.  With ``k > 0``
  each row holds ``d`` reals and one class index in ``[0, k)``.  With
  ``k == 0`` each row holds ``d`` reals and ``t`` real targets, ``t``
  being the same for every row (``t`` may be 0 for unlabeled data).
* binary: ``b"LYRD"``, a version byte, little-endian u32 ``n``, ``d``,
  ``k``, then ``n*d`` float64 samples, then either ``n`` u32 labels
  (``k > 0``) or ``n*t`` float64 targets (``k == 0``), ``t`` being implied
  by the remaining length.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import DataError

MAGIC = b"LYRD"
VERSION = 1
_HEADER = struct.Struct("<4sBIII")

# BT.601 analog YUV
YUV_MATRIX = np.array([
    [0.299, 0.587, 0.114],
    [-0.492 * 0.299, -0.492 * 0.587, 0.492 * (1 - 0.114)],
    [0.877 * (1 - 0.299), -0.877 * 0.587, -0.877 * 0.114],
])


@dataclass(frozen=True)
class DataInfo:
    n: int
    d: int
    k: int
    t: int = 0


@dataclass
class DataSet:
    x: np.ndarray                      # (n, d) float64
    labels: np.ndarray | None = None   # (n,) int64 when k > 0
    targets: np.ndarray | None = None  # (n, t) float64 when k == 0
    k: int = 0
    balance: bool = False
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.x.ndim != 2 or self.x.shape[0] < 1:
            raise DataError("a dataset needs at least one sample")
        n = self.x.shape[0]
        if self.k > 0:
            if self.labels is None:
                raise DataError("classification data needs labels")
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise DataError("one label per sample expected")
            if self.labels.min() < 0 or self.labels.max() >= self.k:
                raise DataError(f"label out of range [0, {self.k})")
            self.targets = None
        else:
            t = np.zeros((n, 0)) if self.targets is None else self.targets
            self.targets = np.asarray(t, dtype=np.float64).reshape(n, -1)
            self.labels = None

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    @property
    def info(self):
        t = 0 if self.targets is None else self.targets.shape[1]
        return DataInfo(self.n, self.d, self.k, t)

    def copy(self):
        return DataSet(self.x.copy(),
                       None if self.labels is None else self.labels.copy(),
                       None if self.targets is None else self.targets.copy(),
                       self.k, self.balance, dict(self.stats))


# -- reading -----------------------------------------------------------------

def _parse_int(text, line, what):
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"line {line}: {what} must be an integer, got {text!r}") from None
    return value


def load_ascii(path):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise DataError(f"{path}: empty file")
    lineno, header = rows[0]
    if len(header) != 3:
        raise DataError(f"{path}: line {lineno}: header must be 'n d k'")
    n, d, k = (_parse_int(v, lineno, "header field") for v in header)
    if n < 1 or d < 1 or k < 0:
        raise DataError(f"{path}: line {lineno}: invalid header {n} {d} {k}")
    body = rows[1:]
    if len(body) != n:
        raise DataError(f"{path}: header announces {n} samples, found {len(body)}")
    x = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64) if k > 0 else None
    t = None
    targets = []
    for i, (lineno, fields) in enumerate(body):
        if k > 0:
            if len(fields) != d + 1:
                raise DataError(f"{path}: line {lineno}: expected {d + 1} values, "
                                f"found {len(fields)}")
            label = _parse_int(fields[d], lineno, "label")
            if not 0 <= label < k:
                raise DataError(f"{path}: line {lineno}: label {label} out of range [0, {k})")
            labels[i] = label
        else:
            if t is None:
                t = len(fields) - d
            if len(fields) != d + t or t < 0:
                raise DataError(f"{path}: line {lineno}: expected {d + max(t, 0)} values, "
                                f"found {len(fields)}")
        try:
            values = [float(v) for v in fields[:d]]
            if k == 0:
                targets.append([float(v) for v in fields[d:]])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric value") from None
        x[i] = values
    tg = np.array(targets, dtype=np.float64).reshape(n, t) if k == 0 else None
    return DataSet(x, labels, tg, k)


def load_binary(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, version, n, d, k = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if n < 1 or d < 1:
        raise DataError(f"{path}: invalid header n={n} d={d}")
    off = _HEADER.size
    nx = n * d * 8
    if len(raw) < off + nx:
        raise DataError(f"{path}: truncated sample block")
    x = np.frombuffer(raw, dtype="<f8", count=n * d, offset=off).reshape(n, d).copy()
    off += nx
    rest = len(raw) - off
    if k > 0:
        if rest != 4 * n:
            raise DataError(f"{path}: expected {n} u32 labels")
        labels = np.frombuffer(raw, dtype="<u4", count=n, offset=off).astype(np.int64)
        if labels.max() >= k:
            raise DataError(f"{path}: label {labels.max()} out of range [0, {k})")
        return DataSet(x, labels, None, k)
    if rest % (8 * n):
        raise DataError(f"{path}: target block size {rest} is not a multiple of {8 * n}")
    t = rest // (8 * n)
    targets = np.frombuffer(raw, dtype="<f8", count=n * t, offset=off).reshape(n, t).copy()
    return DataSet(x, None, targets, 0)


def load(path, fmt="ascii"):
    """Read a dataset in ``ascii`` or ``binary`` format."""
    if fmt == "ascii":
        return load_ascii(path)
    if fmt == "binary":
        return load_binary(path)
    raise DataError(f"unknown data format {fmt!r}")


def probe(path, fmt="ascii"):
    return load(path, fmt).info


# -- writing -----------------------------------------------------------------

def write(ds, path, fmt="ascii"):
    if fmt == "binary":
        parts = [_HEADER.pack(MAGIC, VERSION, ds.n, ds.d, ds.k),
                 ds.x.astype("<f8").tobytes()]
        if ds.k > 0:
            parts.append(ds.labels.astype("<u4").tobytes())
        else:
            parts.append(ds.targets.astype("<f8").tobytes())
        Path(path).write_bytes(b"".join(parts))
    elif fmt == "ascii":
        lines = [f"{ds.n} {ds.d} {ds.k}"]
        for i in range(ds.n):
            vals = [repr(float(v)) for v in ds.x[i]]
            if ds.k > 0:
                vals.append(str(int(ds.labels[i])))
            else:
                vals.extend(repr(float(v)) for v in ds.targets[i])
            lines.append(" ".join(vals))
        Path(path).write_text("\n".join(lines) + "\n")
    else:
        raise DataError(f"unknown data format {fmt!r}")


def from_csv(path, label_column=-1, classes=True, delimiter=","):
    """Build a DataSet from a CSV file whose ``label_column`` holds the label.

    Header rows are not supported; every cell must be numeric.
    """
    table = np.loadtxt(path, delimiter=delimiter, ndmin=2)
    y = table[:, label_column]
    x = np.delete(table, label_column % table.shape[1], axis=1)
    if classes:
        labels = y.astype(np.int64)
        return DataSet(x, labels, None, int(labels.max()) + 1)
    return DataSet(x, None, y.reshape(-1, 1), 0)


# -- transforms ----------------------------------------------------------------

def _moments(ds):
    mean = ds.x.mean(axis=0)
    sd = ds.x.std(axis=0)
    # a constant column whose mean is inexact shows a rounding-level sd
    sd[sd <= 1e-12 * np.abs(ds.x).max(axis=0, initial=0.0)] = 0.0
    return mean, sd


def zscore(ds, ref=None):
    """Normalize every column to mean 0 and sd 1, in place.

    With ``ref`` the statistics come from that dataset (its cached ones if it
    was normalized earlier).  Columns with zero deviation (up to rounding) become 0.
    """
    if ref is None or ref is ds:
        mean, sd = _moments(ds)
        ds.stats["zscore"] = (mean, sd)
    elif "zscore" in ref.stats:
        mean, sd = ref.stats["zscore"]
    else:
        mean, sd = _moments(ref)
        ref.stats["zscore"] = (mean, sd)
    if mean.shape[0] != ds.d:
        raise DataError(f"reference dimension {mean.shape[0]} differs from {ds.d}")
    safe = np.where(sd > 0, sd, 1.0)
    ds.x = np.where(sd > 0, (ds.x - mean) / safe, 0.0)
    return ds


def center(ds, ref=None):
    if ref is None or ref is ds:
        mean = ds.x.mean(axis=0)
        ds.stats["center"] = mean
    elif "center" in ref.stats:
        mean = ref.stats["center"]
    else:
        mean = ref.x.mean(axis=0)
        ref.stats["center"] = mean
    if mean.shape[0] != ds.d:
        raise DataError(f"reference dimension {mean.shape[0]} differs from {ds.d}")
    ds.x = ds.x - mean
    return ds


def div(ds, value):
    if value == 0:
        raise DataError("division of data by zero")
    ds.x = ds.x / value
    ds.stats.clear()
    return ds


def yuv(ds):
    """Convert channel-major RGB maps (R plane, G plane, B plane) to YUV."""
    if ds.d % 3:
        raise DataError(f"yuv needs 3-channel data, dimension {ds.d} is not divisible by 3")
    planes = ds.x.reshape(ds.n, 3, ds.d // 3)
    ds.x = np.einsum("ij,njp->nip", YUV_MATRIX, planes).reshape(ds.n, ds.d)
    ds.stats.clear()
    return ds

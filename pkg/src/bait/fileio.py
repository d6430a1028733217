"""Embedding, probability, label and id-list files.

BAIT-F32 layout (little endian): b"BAIT", u32 version (1), u32 rows, u32 cols,
then rows*cols float32 values in row-major order.
"""
import csv
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError

MAGIC = b"BAIT"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_f32(path, array):
    a = np.asarray(array)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def is_f32(path):
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_f32(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: file too short for a BAIT-F32 header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported BAIT-F32 version {version}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise ConfigError(f"{path}: expected {expected} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size, count=rows * cols)
    return data.reshape(rows, cols).astype(np.float64)


def read_csv_matrix(path):
    """CSV with header f0,...,f{d-1} and one row per candidate."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty CSV") from None
        expected = [f"f{i}" for i in range(len(header))]
        if [h.strip() for h in header] != expected:
            raise ConfigError(f"{path}: header must be f0,...,f{len(header) - 1}")
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    if any(len(r) != len(header) for r in rows):
        raise ConfigError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


def write_csv_matrix(path, array):
    a = np.asarray(array, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(a.shape[1])])
        for row in a:
            w.writerow([repr(float(v)) for v in row])


def read_matrix(path):
    """Read BAIT-F32 or CSV, chosen by the magic bytes."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    return read_f32(path) if is_f32(path) else read_csv_matrix(path)


def read_ids(path):
    """Newline-separated non-negative integer ids; blank lines ignored."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    out = []
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            v = int(line)
        except ValueError:
            raise ConfigError(f"{path}:{ln}: not an integer id: {line!r}") from None
        if v < 0:
            raise ConfigError(f"{path}:{ln}: negative id")
        out.append(v)
    return out


def format_ids(ids):
    return "".join(f"{int(i)}\n" for i in ids)


def write_ids(path, ids):
    Path(path).write_text(format_ids(ids), encoding="utf-8")


def read_labels(path):
    """Integer class labels (one per line) or a real target matrix (BAIT-F32 / CSV).

    Returns an int64 vector for class labels, float64 (n, k) otherwise.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    if is_f32(path):
        return read_f32(path)
    text = path.read_text(encoding="utf-8")
    first = text.lstrip().split("\n", 1)[0]
    if first.startswith("f0"):
        return read_csv_matrix(path)
    try:
        return np.array([int(s) for s in text.split()], dtype=np.int64)
    except ValueError:
        raise ConfigError(f"{path}: labels must be integers, one per line") from None

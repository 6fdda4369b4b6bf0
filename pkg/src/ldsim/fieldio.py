"""Self-describing binary array files and CSV export.

Layout: magic "LDF1" | uint32 ndim | uint64 dims[ndim] | uint32 len | dtype
string (numpy .str, e.g. "<f8") | raw C-order bytes.  Round trips are exact.
"""
from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"LDF1"


def save_array(path: str | Path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    shape = arr.shape  # ascontiguousarray promotes 0-d to 1-d; keep the true shape
    arr = np.ascontiguousarray(arr)
    dtype_str = arr.dtype.str.encode("ascii")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(shape))
    blob += struct.pack(f"<{len(shape)}Q", *shape)
    blob += struct.pack("<I", len(dtype_str))
    blob += dtype_str
    blob += arr.tobytes(order="C")
    atomic_write_bytes(path, bytes(blob))


def load_array(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a field binary (bad magic)")
    off = 4
    (ndim,) = struct.unpack_from("<I", raw, off)
    off += 4
    dims = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    (dlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    dtype = np.dtype(raw[off : off + dlen].decode("ascii"))
    off += dlen
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) - off != expected:
        raise ValueError(f"{path}: payload size mismatch")
    return np.frombuffer(raw[off:], dtype=dtype).reshape(dims).copy()


def export_csv(path: str | Path, coords: list[np.ndarray], values: np.ndarray, name: str = "value") -> None:
    """One row per node: coordinates then value columns (re, im if complex)."""
    grids = np.meshgrid(*coords, indexing="ij")
    if values.shape != grids[0].shape:
        raise ValueError("field shape does not match the coordinate grid")
    axis_names = ["x", "y", "z"][: len(coords)]
    cols = [g.ravel() for g in grids]
    if np.iscomplexobj(values):
        header = axis_names + [f"{name}_re", f"{name}_im"]
        cols += [values.real.ravel(), values.imag.ravel()]
    else:
        header = axis_names + [name]
        cols += [values.ravel()]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))

"""Reading and writing feature matrices (NPY v1.0 and headerless CSV)."""
from __future__ import annotations

import ast
import csv
import os
import struct

import numpy as np

from .core import FormatError, check_features

NPY_MAGIC = b"\x93NUMPY"
_ACCEPTED_DESCR = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _parse_npy_header(raw):
    if raw[:6] != NPY_MAGIC:
        raise FormatError("malformed header: bad magic string")
    if raw[6:8] != b"\x01\x00":
        raise FormatError(f"malformed header: unsupported NPY version {raw[6]}.{raw[7]}")
    (hlen,) = struct.unpack("<H", raw[8:10])
    text = raw[10 : 10 + hlen]
    if len(text) != hlen:
        raise FormatError("malformed header: truncated")
    try:
        header = ast.literal_eval(text.decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise FormatError(f"malformed header: {exc}") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError("malformed header: expected keys descr, fortran_order, shape")
    return 10 + hlen, header


def read_npy(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    offset, header = _parse_npy_header(raw)
    descr = header["descr"]
    if descr not in _ACCEPTED_DESCR:
        raise FormatError(f"unsupported element type {descr!r} (accepted: '<f4', '<f8')")
    if header["fortran_order"] is not False:
        raise FormatError("unsupported layout: fortran_order=True")
    shape = header["shape"]
    if not isinstance(shape, tuple) or len(shape) != 2:
        raise FormatError(f"expected a 2D array, got shape {shape!r}")
    dtype = _ACCEPTED_DESCR[descr]
    count = shape[0] * shape[1]
    if len(raw) - offset != count * dtype.itemsize:
        raise FormatError(
            f"payload holds {len(raw) - offset} bytes, shape {shape} needs {count * dtype.itemsize}"
        )
    return np.frombuffer(raw, dtype=dtype, count=count, offset=offset).reshape(shape)


def read_csv(path, header=False):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if header:
            next(reader, None)
        for lineno, row in enumerate(reader, start=2 if header else 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise FormatError(f"line {lineno}: {exc}") from None
    if not rows:
        raise FormatError("no data rows")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"row {i} has {len(row)} columns, expected {width}")
    return np.asarray(rows, dtype=np.float64)


def load_matrix(path, format=None, csv_header=False):
    """Load and validate a feature matrix.

    ``format`` is ``"npy"`` or ``"csv"``; when omitted it is taken from the
    file extension. 32-bit payloads are widened to float64.
    """
    if format is None:
        ext = os.path.splitext(str(path))[1].lower().lstrip(".")
        format = ext if ext in ("npy", "csv") else None
        if format is None:
            raise FormatError(f"cannot infer format of {path!s}; pass format='npy' or 'csv'")
    if format == "npy":
        arr = read_npy(path)
    elif format == "csv":
        arr = read_csv(path, header=csv_header)
    else:
        raise FormatError(f"unknown format {format!r}")
    return check_features(arr, name=os.path.basename(str(path)), copy=True)


def save_matrix(path, X, format=None):
    """Write ``X`` as NPY v1.0 (little-endian, C order) or CSV."""
    X = np.asarray(X)
    if format is None:
        format = "csv" if str(path).lower().endswith(".csv") else "npy"
    if format == "npy":
        if X.dtype not in (np.dtype("<f4"), np.dtype("<f8")):
            X = X.astype("<f8")
        with open(path, "wb") as fh:
            np.lib.format.write_array(fh, np.ascontiguousarray(X), version=(1, 0))
    elif format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in np.asarray(X, dtype=np.float64):
                writer.writerow([repr(float(v)) for v in row])
    else:
        raise FormatError(f"unknown format {format!r}")

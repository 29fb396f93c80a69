"""Artifact formats.

Spectrum CSV
    header ``index,eigenvalue,mode,kernel_flag``; one row per eigenvalue in
    |lambda| order; eigenvalues written with 17 significant digits.

Eigenvector archive (binary)
    16-byte header: two little-endian int64, ``m`` (vector length) and
    ``count`` (number of vectors); then ``count * m`` little-endian float64
    values, row-major, row i being the eigenvector of CSV row i.  Vectors of
    mode-decomposed models are stored in their own mode block (the CSV
    ``mode`` column says which).  Only real vectors are supported; every
    realization in this package is real symmetric.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

HEADER = ["index", "eigenvalue", "mode", "kernel_flag"]


def write_spectrum_csv(path, sd) -> None:
    kernel = sd.kernel_mask
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for i, (lam, k, z) in enumerate(zip(sd.eigenvalues, sd.modes, kernel)):
            writer.writerow([i, f"{lam:.17g}", int(k), int(z)])


def read_spectrum_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        rows = list(reader)
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return {
        "index": arr[:, 0].astype(int),
        "eigenvalue": arr[:, 1],
        "mode": arr[:, 2].astype(int),
        "kernel_flag": arr[:, 3].astype(bool),
    }


def write_eigvecs(path, vectors: np.ndarray) -> None:
    V = np.asarray(vectors)
    if np.iscomplexobj(V):
        if np.max(np.abs(V.imag), initial=0.0) > 0:
            raise ValueError("archive stores real vectors only")
        V = V.real
    count, m = V.shape
    with open(path, "wb") as fh:
        fh.write(np.array([m, count], dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(V, dtype="<f8").tobytes())


def read_eigvecs(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated header")
    m, count = np.frombuffer(raw[:16], dtype="<i8")
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size != m * count:
        raise ValueError(f"{path}: expected {m * count} values, found {data.size}")
    return data.reshape(int(count), int(m)).astype(float)


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))

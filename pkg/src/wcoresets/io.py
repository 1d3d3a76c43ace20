"""File formats: coreset CSV, JSON sidecars, content hashes."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .measures import DataError, load_csv


def write_coreset_csv(path, points: np.ndarray, labels: Optional[np.ndarray] = None) -> None:
    """One row per site, ``d`` columns plus a trailing label column when given; no header.

    Values are written with ``repr`` so they round-trip exactly. Integer
    labels are written as integers, soft labels as floats.
    """
    points = np.asarray(points, dtype=np.float64)
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (points.shape[0],):
            raise ValueError("one label per point is required")
        integral = np.issubdtype(labels.dtype, np.integer)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for i, row in enumerate(points):
            fields = [repr(float(x)) for x in row]
            if labels is not None:
                fields.append(str(int(labels[i])) if integral else repr(float(labels[i])))
            w.writerow(fields)


def read_coreset_csv(path, labeled: bool = False):
    """Inverse of :func:`write_coreset_csv`; returns ``points`` or ``(points, labels)``.

    Labels come back as integers when every label is integral, else as floats.
    """
    pts = load_csv(path)[0].points
    if not labeled:
        return pts
    if pts.shape[1] < 2:
        raise DataError(f"{path}: a labelled coreset needs at least two columns")
    labels = pts[:, -1]
    if np.all(labels == np.round(labels)):
        labels = labels.astype(np.int64)
    return pts[:, :-1], labels


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_default, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def sha256_array(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype=np.float64).tobytes()).hexdigest()

"""Sample access to data distributions.

Every distribution is seen only through a :class:`Sampler`: an in-memory
dataset resampled with replacement, a one-pass stream of CSV rows, a synthetic
generator, or the pushforward of another sampler through a map.

Randomness comes from numpy ``PCG64`` generators seeded by
``SeedSequence(seed, spawn_key=(stream,))`` so that two samplers built from the
same seed but different stream ids never share state.
"""

from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class StreamExhausted(Exception):
    """Raised when a stream ends before a draw could be completed.

    ``partial`` holds the rows that were read before the end of data (possibly
    an empty array), ``consumed`` the total number of rows read so far.
    """

    def __init__(self, partial: np.ndarray, consumed: int):
        super().__init__(f"stream exhausted after {consumed} rows")
        self.partial = partial
        self.consumed = consumed


def as_points(x, dim: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a 2-D float64 array of shape (n, d)."""
    if isinstance(x, PointSet):
        arr = x.points
    else:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None] if dim == 1 else arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array of points, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    return arr


@dataclass
class PointSet:
    """A finite, optionally weighted, set of points in R^d.

    ``weights`` of ``None`` means the uniform measure ``1/n`` on the points.
    """

    points: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError(f"point set must be a nonempty (n, d) array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point set contains non-finite coordinates")
        self.points = pts
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).ravel()
            if w.shape[0] != pts.shape[0]:
                raise ValueError("weights and points differ in length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise ValueError("weights must be nonnegative and sum to 1")
            self.weights = w

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def w(self) -> np.ndarray:
        """Weights as an explicit vector."""
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights


def weights_of(x) -> np.ndarray:
    if isinstance(x, PointSet):
        return x.w
    n = as_points(x).shape[0]
    return np.full(n, 1.0 / n)


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


def stream_id(name: str) -> int:
    """Stable integer id for a named random sub-stream."""
    return zlib.crc32(name.encode("utf8"))


def make_rng(seed: int, *stream: Union[int, str]) -> np.random.Generator:
    """Generator for the sub-stream ``stream`` of ``seed``.

    Stream components may be integers or names; names are hashed with crc32.
    """
    key = tuple(stream_id(s) if isinstance(s, str) else int(s) for s in stream)
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


class Sampler:
    """Sample access to a distribution on R^dim.

    Subclasses implement :meth:`_draw`; :meth:`draw` validates the output.
    """

    dim: int
    rng: Optional[np.random.Generator] = None

    def draw(self, count: int) -> np.ndarray:
        """Return ``count`` i.i.d. samples as a (count, dim) array."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        out = self._draw(int(count))
        if out.shape != (count, self.dim):
            raise DataError(f"sampler produced shape {out.shape}, expected {(count, self.dim)}")
        return out

    def _draw(self, count: int) -> np.ndarray:
        raise NotImplementedError

    def spawn(self, child: int) -> "Sampler":
        """Independent copy of this sampler on the sub-stream ``child``."""
        raise NotImplementedError(f"{type(self).__name__} cannot be split")

    def get_state(self) -> dict:
        return {"rng": self.rng.bit_generator.state} if self.rng is not None else {}

    def set_state(self, state: dict) -> None:
        if self.rng is not None and "rng" in state:
            self.rng.bit_generator.state = state["rng"]


class EmpiricalSampler(Sampler):
    """Uniform sampling with replacement from the rows of a dataset."""

    def __init__(self, data, seed: int = 0, stream: int = 0):
        self.data = as_points(data)
        if self.data.shape[0] == 0:
            raise ValueError("empty dataset")
        self.dim = self.data.shape[1]
        self.seed, self.stream = seed, stream
        self.rng = make_rng(seed, stream)

    def _draw(self, count):
        idx = self.rng.integers(0, self.data.shape[0], size=count)
        return self.data[idx]

    def spawn(self, child):
        return EmpiricalSampler(self.data, self.seed, stream_id(f"{self.stream}/{child}"))


@dataclass
class SyntheticSpec:
    """Description of a synthetic distribution.

    kind is one of ``gaussian``, ``mixture``, ``uniform-cube`` or ``banana``.
    ``banana`` is the standard 2-D Gaussian pushed through ``(x, y) -> (x, x^2 + y)``.
    """

    kind: str
    mean: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None
    components: list = field(default_factory=list)
    mixture_weights: Optional[np.ndarray] = None
    dim: Optional[int] = None

    def __post_init__(self):
        if self.kind == "gaussian":
            self.mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
            d = self.mean.shape[0]
            self.cov = np.eye(d) if self.cov is None else np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
            _check_cov(self.cov, d)
            self.dim = d
        elif self.kind == "mixture":
            if not self.components:
                raise ValueError("mixture needs at least one component")
            comps = []
            for mean, cov in self.components:
                g = SyntheticSpec.gaussian(mean, cov)
                comps.append((g.mean, g.cov))
            self.components = comps
            dims = {m.shape[0] for m, _ in comps}
            if len(dims) != 1:
                raise ValueError("mixture components differ in dimension")
            self.dim = dims.pop()
            k = len(comps)
            w = np.full(k, 1.0 / k) if self.mixture_weights is None else np.asarray(self.mixture_weights, float)
            if w.shape != (k,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise ValueError("mixture weights must be nonnegative and sum to 1")
            self.mixture_weights = w
        elif self.kind == "uniform-cube":
            if self.dim is None or self.dim < 1:
                raise ValueError("uniform-cube needs dim >= 1")
        elif self.kind == "banana":
            self.dim = 2
        else:
            raise ValueError(f"unknown synthetic kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean, cov=None):
        return cls("gaussian", mean=mean, cov=cov)

    @classmethod
    def mixture(cls, components, weights=None):
        return cls("mixture", components=list(components), mixture_weights=weights)

    @classmethod
    def uniform_cube(cls, dim):
        return cls("uniform-cube", dim=dim)

    @classmethod
    def banana(cls):
        return cls("banana")


def _check_cov(cov, d):
    if cov.shape != (d, d):
        raise ValueError(f"covariance must be {d}x{d}")
    if not np.allclose(cov, cov.T, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh(cov).min() < -1e-10:
        raise ValueError("covariance must be positive semi-definite")


def _cov_factor(cov):
    if np.array_equal(cov, np.eye(cov.shape[0])):
        return None
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0, None))


def banana_map(z: np.ndarray) -> np.ndarray:
    """(x, y) -> (x, x^2 + y), applied row-wise."""
    z = np.asarray(z, dtype=np.float64)
    return np.column_stack([z[:, 0], z[:, 0] ** 2 + z[:, 1]])


class SyntheticSampler(Sampler):
    def __init__(self, spec: SyntheticSpec, seed: int = 0, stream: int = 0):
        self.spec = spec
        self.dim = spec.dim
        self.seed, self.stream = seed, stream
        self.rng = make_rng(seed, stream)
        if spec.kind == "gaussian":
            self._factor = _cov_factor(spec.cov)
        elif spec.kind == "mixture":
            eye = np.eye(spec.dim)
            self._stack = np.array([eye if f is None else f for f in map(_cov_factor, (c for _, c in spec.components))])
            self._means = np.array([m for m, _ in spec.components])
            self._cumw = np.cumsum(spec.mixture_weights)

    def _gauss(self, count, mean, factor):
        z = self.rng.standard_normal((count, mean.shape[0]))
        if factor is not None:
            z = z @ factor.T
        return z + mean

    def _draw(self, count):
        spec = self.spec
        if spec.kind == "gaussian":
            return self._gauss(count, spec.mean, self._factor)
        if spec.kind == "uniform-cube":
            return self.rng.random((count, spec.dim))
        if spec.kind == "banana":
            return banana_map(self._gauss(count, np.zeros(2), None))
        # mixture: one uniform per draw picks the component, then one normal block
        labels = np.searchsorted(self._cumw, self.rng.random(count), side="right")
        labels = np.minimum(labels, len(spec.components) - 1)
        z = self.rng.standard_normal((count, spec.dim))
        return np.einsum("nij,nj->ni", self._stack[labels], z) + self._means[labels]

    def spawn(self, child):
        return SyntheticSampler(self.spec, self.seed, stream_id(f"{self.stream}/{child}"))


class StreamSampler(Sampler):
    """Single pass over newline-delimited CSV rows.

    Rows are parsed lazily; at most ``count`` rows are held per draw. The
    sampler never rewinds: once the source ends every draw raises
    :class:`StreamExhausted`.
    """

    def __init__(self, source: Union[Iterable[str], io.TextIOBase], dim: Optional[int] = None,
                 label_column: Optional[int] = None):
        self._lines = iter(source)
        self.dim = dim
        self.label_column = label_column
        self.consumed = 0
        self._lineno = 0
        if self.dim is None:
            # peek one row to learn the dimension
            first = self._next_row()
            if first is None:
                raise DataError("empty stream")
            self._pending = [first]
            self.dim = first.shape[0]
        else:
            self._pending = []

    def _next_row(self) -> Optional[np.ndarray]:
        for line in self._lines:
            self._lineno += 1
            if not line.strip():
                continue
            fields = next(csv.reader([line]))
            row = _parse_fields(fields, self._lineno, self.label_column)[0]
            if self.dim is not None and row.shape[0] != self.dim:
                raise DataError(f"row {self._lineno}: expected {self.dim} fields, got {row.shape[0]}")
            return row
        return None

    def _draw(self, count):
        rows = []
        while len(rows) < count:
            row = self._pending.pop(0) if self._pending else self._next_row()
            if row is None:
                partial = np.array(rows).reshape(len(rows), self.dim)
                self.consumed += len(rows)
                raise StreamExhausted(partial, self.consumed)
            rows.append(row)
        self.consumed += count
        return np.array(rows).reshape(count, self.dim)

    def get_state(self):
        return {"consumed": self.consumed}

    def set_state(self, state):
        # fast-forward a fresh stream to the recorded position
        skip = int(state.get("consumed", 0)) - self.consumed
        if skip > 0:
            self.draw(skip)


class PushforwardSampler(Sampler):
    """Law of ``fn(X)`` for ``X`` drawn from ``base``.

    ``fn`` acts row-wise on an (count, d) array and must be vectorized.
    """

    def __init__(self, base: Sampler, fn: Callable[[np.ndarray], np.ndarray],
                 lipschitz_bound: Optional[float] = None, dim: Optional[int] = None):
        if lipschitz_bound is not None and not lipschitz_bound > 0:
            raise ValueError("lipschitz_bound must be positive")
        self.base = base
        self.fn = fn
        self.lipschitz_bound = lipschitz_bound
        self.rng = base.rng
        if dim is None:
            probe = np.asarray(fn(np.zeros((1, base.dim))), dtype=np.float64)
            dim = probe.shape[1]
        self.dim = dim

    def _draw(self, count):
        out = np.asarray(self.fn(self.base.draw(count)), dtype=np.float64)
        if out.ndim != 2:
            out = out.reshape(count, -1)
        if not np.all(np.isfinite(out)):
            raise DataError("pushforward map produced non-finite output")
        return out

    def spawn(self, child):
        return PushforwardSampler(self.base.spawn(child), self.fn, self.lipschitz_bound, self.dim)

    def get_state(self):
        return self.base.get_state()

    def set_state(self, state):
        self.base.set_state(state)


def make_sampler(spec, seed: int = 0, stream: int = 0) -> Sampler:
    """Build a sampler from a synthetic spec, a dataset, or a line stream."""
    if isinstance(spec, Sampler):
        return spec
    if isinstance(spec, SyntheticSpec):
        return SyntheticSampler(spec, seed, stream)
    if isinstance(spec, (PointSet, np.ndarray, list, tuple)):
        return EmpiricalSampler(spec, seed, stream)
    if hasattr(spec, "__iter__"):
        return StreamSampler(spec)
    raise TypeError(f"cannot build a sampler from {type(spec).__name__}")


def pushforward(base: Sampler, fn, lipschitz_bound: Optional[float] = None) -> Sampler:
    return PushforwardSampler(base, fn, lipschitz_bound)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _parse_fields(fields: Sequence[str], lineno: int, label_column: Optional[int]):
    label = None
    values = []
    for j, raw in enumerate(fields):
        if label_column is not None and j == label_column:
            try:
                lab = float(raw)
            except ValueError:
                raise DataError(f"row {lineno}: label {raw!r} is not numeric") from None
            if not math.isfinite(lab) or lab != int(lab):
                raise DataError(f"row {lineno}: label {raw!r} is not an integer")
            label = int(lab)
            continue
        try:
            x = float(raw)
        except ValueError:
            raise DataError(f"row {lineno}: field {j + 1} ({raw!r}) is not a number") from None
        if not math.isfinite(x):
            raise DataError(f"row {lineno}: field {j + 1} is not finite")
        values.append(x)
    if label_column is not None and label is None:
        raise DataError(f"row {lineno}: missing label column {label_column}")
    if not values:
        raise DataError(f"row {lineno}: no feature columns")
    return np.array(values), label


def load_csv(path, has_header: bool = False, label_column: Optional[int] = None):
    """Read a comma-separated file of reals.

    Returns ``(PointSet, labels)``; ``labels`` is an integer array aligned with
    the rows when ``label_column`` is given, else ``None``. Row numbers in
    error messages count physical lines from 1.
    """
    rows, labels = [], []
    arity = None
    with open(path, newline="", encoding="utf8") as fh:
        reader = csv.reader(fh)
        for lineno, fields in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not fields or all(not f.strip() for f in fields):
                continue
            if arity is None:
                arity = len(fields)
            elif len(fields) != arity:
                raise DataError(f"row {lineno}: expected {arity} fields, got {len(fields)}")
            values, label = _parse_fields(fields, lineno, label_column)
            rows.append(values)
            labels.append(label)
    if not rows:
        raise DataError(f"{path}: no data rows")
    points = PointSet(np.array(rows))
    return points, (np.array(labels, dtype=np.int64) if label_column is not None else None)


def standardize(points: np.ndarray):
    """Per-column z-scores. Returns ``(z, mean, scale)``; constant columns get scale 1."""
    mean = points.mean(axis=0)
    scale = points.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (points - mean) / scale, mean, scale

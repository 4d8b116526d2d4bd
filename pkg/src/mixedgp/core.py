"""Problem schema, mixed-input data model, CSV ingestion and normalization.

A design point combines p quantitative coordinates (reals, modeled on
[0, 1] after normalization) with q qualitative factors coded as 1-based
level indices.  Data files are CSV with the fixed header
``x1,...,xp,z1,...,zq,y``; lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConstantColumnWarning, ValidationError

__all__ = [
    "ProblemSchema",
    "MixedInput",
    "AffineScale",
    "Dataset",
    "load_dataset",
    "loads_dataset",
    "save_dataset",
    "load_targets",
    "loads_targets",
    "save_targets",
    "infer_schema",
    "infer_schema_text",
    "normalize_quantitative",
    "standardize_response",
]


@dataclass(frozen=True)
class ProblemSchema:
    """Dimensions of a mixed-input problem: p quantitative factors and q
    qualitative factors with level counts ``m[0], ..., m[q-1]``."""

    p: int
    q: int
    m: tuple[int, ...]

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError(f"need at least one quantitative factor, got p={self.p}")
        if self.q < 1:
            raise ValidationError(f"need at least one qualitative factor, got q={self.q}")
        m = tuple(int(v) for v in self.m)
        object.__setattr__(self, "m", m)
        if len(m) != self.q:
            raise ValidationError(f"m has {len(m)} entries but q={self.q}")
        for h, mh in enumerate(m):
            if mh < 2:
                raise ValidationError(f"factor z{h + 1} needs at least 2 levels, got {mh}")

    def header(self) -> list[str]:
        return (
            [f"x{i + 1}" for i in range(self.p)]
            + [f"z{j + 1}" for j in range(self.q)]
            + ["y"]
        )

    def validate_z(self, z, where: str = "input") -> tuple[int, ...]:
        z = tuple(int(v) for v in z)
        if len(z) != self.q:
            raise ValidationError(f"{where}: expected {self.q} level indices, got {len(z)}")
        for h, (zh, mh) in enumerate(zip(z, self.m)):
            if not 1 <= zh <= mh:
                raise ValidationError(
                    f"{where}: level {zh} of factor z{h + 1} outside 1..{mh}"
                )
        return z

    def validate_x(self, x, where: str = "input") -> tuple[float, ...]:
        x = tuple(float(v) for v in x)
        if len(x) != self.p:
            raise ValidationError(f"{where}: expected {self.p} quantitative values, got {len(x)}")
        for k, v in enumerate(x):
            if not np.isfinite(v):
                raise ValidationError(f"{where}: x{k + 1} is not finite")
        return x


@dataclass(frozen=True)
class MixedInput:
    """One design point w = (x, z): p reals plus q 1-based level indices."""

    x: tuple[float, ...]
    z: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "z", tuple(int(v) for v in self.z))

    def validate(self, schema: ProblemSchema, where: str = "input") -> "MixedInput":
        schema.validate_x(self.x, where)
        schema.validate_z(self.z, where)
        return self


@dataclass(frozen=True)
class AffineScale:
    """Per-column record mapping original units onto [0, 1].

    ``lo == hi`` marks a constant column, which is mapped to 0.5.
    The identity record is ``AffineScale(0.0, 1.0)``.
    """

    lo: float
    hi: float

    @property
    def is_identity(self) -> bool:
        return self.lo == 0.0 and self.hi == 1.0

    @property
    def is_constant(self) -> bool:
        return self.lo == self.hi

    def forward(self, t):
        """Original units -> normalized units."""
        if self.is_constant:
            return np.full_like(np.asarray(t, dtype=float), 0.5)
        return (np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo)

    def compose(self, inner_lo: float, inner_hi: float) -> "AffineScale":
        """Record for normalizing already-normalized values on [inner_lo, inner_hi]."""
        if inner_lo == inner_hi:
            c = self.lo + inner_lo * (self.hi - self.lo)
            return AffineScale(c, c)
        return AffineScale(
            self.lo + inner_lo * (self.hi - self.lo),
            self.lo + inner_hi * (self.hi - self.lo),
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


class Dataset:
    """Validated training data: schema, n design points, and responses.

    Instances are immutable after construction (arrays are read-only) and
    safe to share across threads.  ``scaling`` maps original quantitative
    units onto the stored values; ``y_offset``/``y_scale`` do the same for
    an optionally standardized response.
    """

    def __init__(
        self,
        schema: ProblemSchema,
        X,
        Z,
        y,
        scaling: tuple[AffineScale, ...] | None = None,
        y_offset: float = 0.0,
        y_scale: float = 1.0,
    ):
        X = np.asarray(X, dtype=float)
        Z = np.asarray(Z, dtype=np.int64)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or Z.ndim != 2 or y.ndim != 1:
            raise ValidationError("X and Z must be 2-D and y 1-D")
        n = X.shape[0]
        if n == 0:
            raise ValidationError("dataset is empty")
        if Z.shape[0] != n or y.shape[0] != n:
            raise ValidationError(
                f"row mismatch: X has {n}, Z has {Z.shape[0]}, y has {y.shape[0]}"
            )
        if X.shape[1] != schema.p:
            raise ValidationError(f"X has {X.shape[1]} columns, schema requires p={schema.p}")
        if Z.shape[1] != schema.q:
            raise ValidationError(f"Z has {Z.shape[1]} columns, schema requires q={schema.q}")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValidationError("non-finite value in X or y")
        for h in range(schema.q):
            col = Z[:, h]
            bad = (col < 1) | (col > schema.m[h])
            if np.any(bad):
                i = int(np.argmax(bad))
                raise ValidationError(
                    f"row {i + 1}: level {col[i]} of factor z{h + 1} outside 1..{schema.m[h]}"
                )
        if scaling is not None:
            scaling = tuple(scaling)
            if len(scaling) != schema.p:
                raise ValidationError("scaling must have one record per quantitative factor")
        if not y_scale > 0:
            raise ValidationError("y_scale must be positive")
        self.schema = schema
        self.X = _readonly(X)
        self.Z = _readonly(Z)
        self.y = _readonly(y)
        self.scaling = scaling
        self.y_offset = float(y_offset)
        self.y_scale = float(y_scale)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def input_at(self, i: int) -> MixedInput:
        return MixedInput(tuple(self.X[i]), tuple(self.Z[i]))

    def inputs(self) -> list[MixedInput]:
        return [self.input_at(i) for i in range(self.n)]

    def subset(self, indices) -> "Dataset":
        """Row subset preserving order and all scaling records."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            raise ValidationError("subset is empty")
        return Dataset(
            self.schema,
            self.X[idx],
            self.Z[idx],
            self.y[idx],
            scaling=self.scaling,
            y_offset=self.y_offset,
            y_scale=self.y_scale,
        )

    def scale_x(self, x_original) -> np.ndarray:
        """Map a quantitative vector in original units onto the stored scale."""
        x = np.asarray(x_original, dtype=float)
        if self.scaling is None:
            return x
        return np.array([s.forward(v) for s, v in zip(self.scaling, x)], dtype=float)


def _fmt(v: float) -> str:
    # repr() round-trips float64 exactly through decimal text
    return repr(float(v))


def _parse_rows(path_or_text, is_text=False):
    if is_text:
        fh = io.StringIO(path_or_text)
        close = False
    else:
        fh = open(path_or_text, newline="", encoding="utf-8")
        close = True
    try:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].lstrip().startswith("#")):
                continue
            yield lineno, [c.strip() for c in row]
    finally:
        if close:
            fh.close()


def _check_header(got, expected, path):
    if got != expected:
        raise ValidationError(
            f"{path}: header mismatch: expected {','.join(expected)}, got {','.join(got)}"
        )


def _parse_point(schema, fields, lineno, path, with_y):
    want = schema.p + schema.q + (1 if with_y else 0)
    if len(fields) != want:
        raise ValidationError(f"{path} line {lineno}: expected {want} columns, got {len(fields)}")
    try:
        xs = [float(c) for c in fields[: schema.p]]
    except ValueError as e:
        raise ValidationError(f"{path} line {lineno}: non-numeric quantitative cell ({e})") from None
    zs = []
    for h, c in enumerate(fields[schema.p : schema.p + schema.q]):
        try:
            f = float(c)
        except ValueError:
            raise ValidationError(f"{path} line {lineno}: non-numeric level in z{h + 1}") from None
        v = int(f)
        if v != f:
            raise ValidationError(f"{path} line {lineno}: level in z{h + 1} is not an integer")
        if not 1 <= v <= schema.m[h]:
            raise ValidationError(
                f"{path} line {lineno}: level {v} of factor z{h + 1} outside 1..{schema.m[h]}"
            )
        zs.append(v)
    yv = None
    if with_y:
        try:
            yv = float(fields[-1])
        except ValueError as e:
            raise ValidationError(f"{path} line {lineno}: non-numeric response ({e})") from None
    return xs, zs, yv


def _read_dataset(rows, schema: ProblemSchema, label) -> Dataset:
    try:
        _, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{label}: empty file") from None
    _check_header(header, schema.header(), label)
    X, Z, y = [], [], []
    for lineno, fields in rows:
        xs, zs, yv = _parse_point(schema, fields, lineno, label, with_y=True)
        X.append(xs)
        Z.append(zs)
        y.append(yv)
    if not X:
        raise ValidationError(f"{label}: no data rows")
    return Dataset(schema, np.array(X), np.array(Z), np.array(y))


def load_dataset(path, schema: ProblemSchema) -> Dataset:
    """Read a training CSV (header ``x1..xp,z1..zq,y``) in original units.

    Row order is preserved.  Raises :class:`ValidationError` for a missing
    or reordered header, non-numeric cells, out-of-range levels, or an
    empty file.
    """
    return _read_dataset(_parse_rows(path), schema, path)


def loads_dataset(text: str, schema: ProblemSchema, label: str = "csv") -> Dataset:
    """:func:`load_dataset` for CSV passed as a string."""
    return _read_dataset(_parse_rows(text, is_text=True), schema, label)


def save_dataset(dataset: Dataset, path) -> None:
    """Write the dataset's stored values; text round-trips bit-exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(dataset.schema.header()) + "\n")
        for i in range(dataset.n):
            cells = [_fmt(v) for v in dataset.X[i]]
            cells += [str(int(v)) for v in dataset.Z[i]]
            cells.append(_fmt(dataset.y[i]))
            fh.write(",".join(cells) + "\n")


def _read_targets(rows, schema: ProblemSchema, label) -> list[MixedInput]:
    try:
        _, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{label}: empty file") from None
    _check_header(header, schema.header()[:-1], label)
    out = []
    for lineno, fields in rows:
        xs, zs, _ = _parse_point(schema, fields, lineno, label, with_y=False)
        out.append(MixedInput(tuple(xs), tuple(zs)))
    return out


def load_targets(path, schema: ProblemSchema) -> list[MixedInput]:
    """Read prediction targets (header ``x1..xp,z1..zq``); may be empty."""
    return _read_targets(_parse_rows(path), schema, path)


def loads_targets(text: str, schema: ProblemSchema, label: str = "csv") -> list[MixedInput]:
    """:func:`load_targets` for CSV passed as a string."""
    return _read_targets(_parse_rows(text, is_text=True), schema, label)


def save_targets(targets, schema: ProblemSchema, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(schema.header()[:-1]) + "\n")
        for w in targets:
            cells = [_fmt(v) for v in w.x] + [str(int(v)) for v in w.z]
            fh.write(",".join(cells) + "\n")


def infer_schema(path) -> ProblemSchema:
    """Infer (p, q, m) from a training CSV header plus a levels scan."""
    rows = _parse_rows(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ValidationError(f"{path}: empty file") from None
    p = sum(1 for c in header if c.startswith("x"))
    q = sum(1 for c in header if c.startswith("z"))
    if p < 1 or q < 1 or header != [f"x{i+1}" for i in range(p)] + [f"z{j+1}" for j in range(q)] + ["y"]:
        raise ValidationError(f"{path}: cannot infer schema from header {','.join(header)}")
    m = [2] * q
    for lineno, fields in rows:
        if len(fields) != p + q + 1:
            raise ValidationError(f"{path} line {lineno}: expected {p + q + 1} columns")
        for h in range(q):
            try:
                v = int(float(fields[p + h]))
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: non-numeric level in z{h + 1}") from None
            m[h] = max(m[h], v)
    return ProblemSchema(p, q, tuple(m))


def normalize_quantitative(dataset: Dataset) -> Dataset:
    """Affinely map every quantitative column onto [0, 1].

    Column extremes land exactly on 0 and 1.  A constant column maps to
    0.5 and emits :class:`ConstantColumnWarning`.  The scaling record is
    composed with any existing record, so it always maps original units
    onto the returned values; the operation is idempotent.
    """
    X = dataset.X
    newX = np.empty_like(X)
    prev = dataset.scaling or tuple(AffineScale(0.0, 1.0) for _ in range(dataset.schema.p))
    records = []
    for k in range(dataset.schema.p):
        lo = float(np.min(X[:, k]))
        hi = float(np.max(X[:, k]))
        if lo == hi:
            warnings.warn(
                f"quantitative column x{k + 1} is constant ({lo}); mapped to 0.5",
                ConstantColumnWarning,
                stacklevel=2,
            )
            newX[:, k] = 0.5
        elif lo == 0.0 and hi == 1.0:
            newX[:, k] = X[:, k]
        else:
            newX[:, k] = (X[:, k] - lo) / (hi - lo)
        records.append(prev[k].compose(lo, hi))
    return Dataset(
        dataset.schema,
        newX,
        dataset.Z,
        dataset.y,
        scaling=tuple(records),
        y_offset=dataset.y_offset,
        y_scale=dataset.y_scale,
    )


def standardize_response(dataset: Dataset) -> Dataset:
    """Center and scale y to zero mean and unit variance (optional path,
    for numerical conditioning; predictions are reported in original units)."""
    mean = float(np.mean(dataset.y))
    sd = float(np.std(dataset.y))
    if sd == 0.0:
        sd = 1.0
    return Dataset(
        dataset.schema,
        dataset.X,
        dataset.Z,
        (dataset.y - mean) / sd,
        scaling=dataset.scaling,
        y_offset=dataset.y_offset + dataset.y_scale * mean,
        y_scale=dataset.y_scale * sd,
    )

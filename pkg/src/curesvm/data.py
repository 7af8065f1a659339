"""Interval-censored datasets: core record types, CSV I/O and scaling.

An observation is a censoring interval ``(left, right]`` with an event
indicator ``delta`` (``delta = 0`` exactly when ``right`` is infinite,
i.e. right-censoring at ``left``), a latency covariate vector ``x`` and an
incidence covariate vector ``z``.  Simulated data may additionally carry
the true cure status and the true uncured probability.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import as_float_array
from .errors import DegenerateColumnError, SchemaError, ShapeError, ValidationError

COMMENT_PREFIX = "#"


@dataclass(frozen=True)
class IntervalObservation:
    """One subject's record.

    ``left`` is the last inspection time before the event, ``right`` the
    first one after it (``math.inf`` when the event was never observed).
    """

    left: float
    right: float
    delta: int
    x: np.ndarray
    z: np.ndarray
    true_status: int | None = None
    true_pi: float | None = None


@dataclass(frozen=True)
class ScalingParams:
    """Per-column affine standardization (sample mean / sample sd)."""

    means: np.ndarray
    sds: np.ndarray

    def apply(self, z):
        return (np.asarray(z, dtype=float) - self.means) / self.sds

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.sds + self.means


@dataclass(frozen=True)
class ColumnSchema:
    """Mapping from CSV column names to dataset fields."""

    left: str = "L"
    right: str = "R"
    delta: str = "delta"
    x: tuple[str, ...] = ()
    z: tuple[str, ...] = ()
    true_status: str | None = None
    true_pi: str | None = None

    @classmethod
    def parse(cls, text):
        """Parse a CLI schema string like ``L=lo,R=hi,delta=d,x=a+b,z=a+b``."""
        fields = {}
        for part in text.split(","):
            if "=" not in part:
                raise ValidationError(f"bad schema entry {part!r}; expected key=value")
            key, _, value = part.partition("=")
            key = key.strip()
            value = value.strip()
            if key in ("L", "left"):
                fields["left"] = value
            elif key in ("R", "right"):
                fields["right"] = value
            elif key == "delta":
                fields["delta"] = value
            elif key == "x":
                fields["x"] = tuple(v for v in value.split("+") if v)
            elif key == "z":
                fields["z"] = tuple(v for v in value.split("+") if v)
            elif key == "true_status":
                fields["true_status"] = value
            elif key == "true_pi":
                fields["true_pi"] = value
            else:
                raise ValidationError(f"unknown schema key {key!r}")
        return cls(**fields)


def _infer_schema(header):
    """Default schema: columns L, R, delta plus x*/z* covariates."""
    for required in ("L", "R", "delta"):
        if required not in header:
            raise SchemaError(f"missing column {required!r}")
    x = tuple(h for h in header if h.startswith("x") and h not in ("x",))
    z = tuple(h for h in header if h.startswith("z") and h not in ("z",))
    return ColumnSchema(
        x=x,
        z=z,
        true_status="true_status" if "true_status" in header else None,
        true_pi="true_pi" if "true_pi" in header else None,
    )


@dataclass(frozen=True)
class Dataset:
    """An immutable column-oriented collection of interval observations."""

    left: np.ndarray
    right: np.ndarray
    delta: np.ndarray
    x: np.ndarray
    z: np.ndarray
    x_names: tuple[str, ...]
    z_names: tuple[str, ...]
    true_status: np.ndarray | None = None
    true_pi: np.ndarray | None = None
    scaling: ScalingParams | None = None

    def __post_init__(self):
        left = np.asarray(self.left, dtype=float)
        right = np.asarray(self.right, dtype=float)
        delta = np.asarray(self.delta, dtype=np.int64)
        x = np.asarray(self.x, dtype=float)
        z = np.asarray(self.z, dtype=float)
        n = left.shape[0]
        if n < 1:
            raise ValidationError("dataset must contain at least one observation")
        for name, arr, nd in (("left", left, 1), ("right", right, 1),
                              ("delta", delta, 1), ("x", x, 2), ("z", z, 2)):
            if arr.ndim != nd or arr.shape[0] != n:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {n} rows")
        if x.shape[1] != len(self.x_names) or z.shape[1] != len(self.z_names):
            raise ShapeError("covariate name lists do not match matrix widths")
        bad = np.flatnonzero(~(left < right))
        if bad.size:
            raise ValidationError(f"row {bad[0]}: require left < right")
        bad = np.flatnonzero(left < 0)
        if bad.size:
            raise ValidationError(f"row {bad[0]}: left must be non-negative")
        if not np.all(np.isfinite(left)):
            raise ValidationError("left times must be finite")
        expected_delta = np.isfinite(right).astype(np.int64)
        bad = np.flatnonzero(delta != expected_delta)
        if bad.size:
            raise ValidationError(
                f"row {bad[0]}: delta must be 1 exactly when right is finite"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise ValidationError("covariates must be finite")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        for arr_name in ("true_status", "true_pi"):
            arr = getattr(self, arr_name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != (n,):
                    raise ShapeError(f"{arr_name} has shape {arr.shape}, expected ({n},)")
                object.__setattr__(self, arr_name, arr)

    # -- basic shape ----------------------------------------------------

    def __len__(self):
        return self.left.shape[0]

    @property
    def n(self):
        return self.left.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def q(self):
        return self.z.shape[1]

    @property
    def censored_idx(self):
        """Indices with delta = 0."""
        return np.flatnonzero(self.delta == 0)

    @property
    def event_idx(self):
        """Indices with delta = 1."""
        return np.flatnonzero(self.delta == 1)

    # -- views ----------------------------------------------------------

    def observation(self, i):
        return IntervalObservation(
            left=float(self.left[i]),
            right=float(self.right[i]),
            delta=int(self.delta[i]),
            x=self.x[i].copy(),
            z=self.z[i].copy(),
            true_status=None if self.true_status is None else int(self.true_status[i]),
            true_pi=None if self.true_pi is None else float(self.true_pi[i]),
        )

    @property
    def observations(self):
        return [self.observation(i) for i in range(self.n)]

    def subset(self, indices):
        """Row-subset (used by bootstrap resampling and CV folds)."""
        indices = np.asarray(indices)
        return replace(
            self,
            left=self.left[indices],
            right=self.right[indices],
            delta=self.delta[indices],
            x=self.x[indices],
            z=self.z[indices],
            true_status=None if self.true_status is None else self.true_status[indices],
            true_pi=None if self.true_pi is None else self.true_pi[indices],
        )


def _parse_float(token, row, column):
    try:
        return float(token)
    except ValueError:
        raise ValidationError(
            f"row {row}: cannot parse {column}={token!r} as a number"
        ) from None


def load_dataset(path, schema=None):
    """Read a dataset from a headered CSV file.

    Lines starting with ``#`` are skipped (output files written by the CLI
    carry their configuration in such comments).  The right endpoint column
    accepts the token ``inf`` (any case) for right-censored records.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith(COMMENT_PREFIX)]
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    header = [h.strip() for h in rows[0]]
    if schema is None:
        schema = _infer_schema(header)
    col = {name: i for i, name in enumerate(header)}
    needed = [schema.left, schema.right, schema.delta, *schema.x, *schema.z]
    if schema.true_status:
        needed.append(schema.true_status)
    if schema.true_pi:
        needed.append(schema.true_pi)
    for name in needed:
        if name not in col:
            raise SchemaError(f"missing column {name!r}")

    n = len(rows) - 1
    if n < 1:
        raise ValidationError(f"{path}: no data rows")
    left = np.empty(n)
    right = np.empty(n)
    delta = np.empty(n, dtype=np.int64)
    x = np.empty((n, len(schema.x)))
    z = np.empty((n, len(schema.z)))
    true_status = np.empty(n) if schema.true_status else None
    true_pi = np.empty(n) if schema.true_pi else None
    for i, row in enumerate(rows[1:]):
        left[i] = _parse_float(row[col[schema.left]], i, schema.left)
        right[i] = _parse_float(row[col[schema.right]], i, schema.right)
        d = _parse_float(row[col[schema.delta]], i, schema.delta)
        if d not in (0.0, 1.0):
            raise ValidationError(f"row {i}: delta must be 0 or 1, got {d}")
        delta[i] = int(d)
        if not left[i] < right[i]:
            raise ValidationError(f"row {i}: require left < right")
        if delta[i] != (1 if math.isfinite(right[i]) else 0):
            raise ValidationError(
                f"row {i}: delta={delta[i]} inconsistent with right={right[i]}"
            )
        for j, name in enumerate(schema.x):
            x[i, j] = _parse_float(row[col[name]], i, name)
        for j, name in enumerate(schema.z):
            z[i, j] = _parse_float(row[col[name]], i, name)
        if true_status is not None:
            true_status[i] = _parse_float(row[col[schema.true_status]], i, schema.true_status)
        if true_pi is not None:
            true_pi[i] = _parse_float(row[col[schema.true_pi]], i, schema.true_pi)
    return Dataset(
        left=left, right=right, delta=delta, x=x, z=z,
        x_names=tuple(schema.x), z_names=tuple(schema.z),
        true_status=true_status, true_pi=true_pi,
    )


def write_dataset(dataset, path, header_comments=()):
    """Write a dataset as CSV; the inverse of :func:`load_dataset`."""
    header = ["L", "R", "delta", *dataset.x_names, *dataset.z_names]
    if dataset.true_status is not None:
        header.append("true_status")
    if dataset.true_pi is not None:
        header.append("true_pi")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for comment in header_comments:
            fh.write(f"{COMMENT_PREFIX} {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(dataset.left[i])),
                   "inf" if not math.isfinite(dataset.right[i]) else repr(float(dataset.right[i])),
                   str(int(dataset.delta[i]))]
            row += [repr(float(v)) for v in dataset.x[i]]
            row += [repr(float(v)) for v in dataset.z[i]]
            if dataset.true_status is not None:
                row.append(str(int(dataset.true_status[i])))
            if dataset.true_pi is not None:
                row.append(repr(float(dataset.true_pi[i])))
            writer.writerow(row)


def standardize_covariates(dataset):
    """Standardize the incidence covariates z to mean 0, sample sd 1.

    The latency covariates x are left on their original scale.  Returns a
    new dataset carrying the fitted :class:`ScalingParams`.
    """
    z = dataset.z
    means = z.mean(axis=0)
    sds = z.std(axis=0, ddof=1) if dataset.n > 1 else np.zeros(dataset.q)
    for j, sd in enumerate(sds):
        if not sd > 0:
            name = dataset.z_names[j] if dataset.z_names else f"z{j}"
            raise DegenerateColumnError(f"column {name!r} has zero variance")
    params = ScalingParams(means=means, sds=sds)
    return replace(dataset, z=params.apply(z), scaling=params)


def midpoint_times(dataset):
    """Interval midpoints; the left endpoint for right-censored records."""
    return np.where(
        np.isfinite(dataset.right),
        (dataset.left + dataset.right) / 2.0,
        dataset.left,
    )


def from_observations(observations, x_names=(), z_names=()):
    """Assemble a Dataset from a list of :class:`IntervalObservation`."""
    if not observations:
        raise ValidationError("need at least one observation")
    first = observations[0]
    x_names = tuple(x_names) or tuple(f"x{j+1}" for j in range(len(first.x)))
    z_names = tuple(z_names) or tuple(f"z{j+1}" for j in range(len(first.z)))
    has_status = all(o.true_status is not None for o in observations)
    has_pi = all(o.true_pi is not None for o in observations)
    return Dataset(
        left=np.array([o.left for o in observations], dtype=float),
        right=np.array([o.right for o in observations], dtype=float),
        delta=np.array([o.delta for o in observations], dtype=np.int64),
        x=as_float_array(np.vstack([o.x for o in observations]), "x"),
        z=as_float_array(np.vstack([o.z for o in observations]), "z"),
        x_names=x_names,
        z_names=z_names,
        true_status=np.array([o.true_status for o in observations], dtype=float) if has_status else None,
        true_pi=np.array([o.true_pi for o in observations], dtype=float) if has_pi else None,
    )

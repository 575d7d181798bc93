"""Dense sample matrices: CSV interchange and synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._errors import EmptyInputError, ParameterError, ParseError

SYNTHETIC_KINDS = ("blobs", "two_moons", "circles")


@dataclass(frozen=True)
class DenseDataset:
    """An ``N x d`` sample matrix with optional integer labels.

    Construction validates the invariants: at least one sample and one
    feature, every value finite, and ``len(labels) == N`` when labels are
    given.
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ParameterError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise ParameterError(f"dataset must be at least 1x1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("dataset contains NaN or Inf")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.shape[0] != values.shape[0]:
                raise ParameterError(
                    f"labels must have length {values.shape[0]}, got shape {labels.shape}"
                )
            if labels.dtype.kind == "f":
                if not np.all(labels == np.round(labels)):
                    raise ParameterError("labels must be integers")
            object.__setattr__(self, "labels", labels.astype(np.int64))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def _parse_label(text, line):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-integer label {text!r}", line) from None
    if not value.is_integer():
        raise ParseError(f"non-integer label {text!r}", line)
    return int(value)


def load_csv(path, has_labels: bool = False) -> DenseDataset:
    """Read a headerless comma-separated sample file.

    With ``has_labels`` the last column is parsed as integer labels.
    Blank lines are skipped. Errors carry the 1-based line number.
    """
    path = Path(path)
    rows = []
    labels = []
    width = None
    with path.open(newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not f.strip() for f in record):
                continue
            if width is None:
                width = len(record)
                if has_labels and width < 2:
                    raise ParseError("labelled rows need at least two fields", lineno)
            elif len(record) != width:
                raise ParseError(
                    f"expected {width} fields, found {len(record)}", lineno
                )
            fields = record[:-1] if has_labels else record
            try:
                row = [float(f) for f in fields]
            except ValueError:
                bad = next(f for f in fields if not _is_float(f))
                raise ParseError(f"non-numeric field {bad!r}", lineno) from None
            if not all(math.isfinite(v) for v in row):
                raise ParseError("non-finite value", lineno)
            rows.append(row)
            if has_labels:
                labels.append(_parse_label(record[-1], lineno))
    if not rows:
        raise EmptyInputError(f"{path}: no samples")
    return DenseDataset(
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64) if has_labels else None,
    )


def _is_float(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def save_csv(data: DenseDataset, path) -> None:
    """Write ``data`` as CSV with 17 significant digits (exact round trip)."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            write_matrix(fh, data.values, data.labels)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_matrix(fh, values, labels=None, digits=17):
    fmt = f"%.{digits}g"
    for i, row in enumerate(values):
        line = ",".join(fmt % v for v in row)
        if labels is not None:
            line += f",{int(labels[i])}"
        fh.write(line + "\n")


def generate_synthetic(
    kind: str, n: int, noise: float = 0.0, seed: int = 0, n_clusters: int = 2
) -> DenseDataset:
    """Draw a labelled 2-D toy dataset.

    Parameters
    ----------
    kind : {"blobs", "two_moons", "circles"}
    n : int
        Number of samples, at least 4.
    noise : float
        Standard deviation of the isotropic Gaussian perturbation.
    seed : int
        Seed for :func:`numpy.random.default_rng`.
    n_clusters : int
        Blob count (``blobs`` only). Centres sit on a circle of radius 3,
        so the default two clusters are centred at ``(-3, 0)`` and ``(3, 0)``.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ParameterError(f"unknown synthetic kind {kind!r}; choose from {SYNTHETIC_KINDS}")
    if n < 4:
        raise ParameterError(f"n must be >= 4, got {n}")
    if noise < 0:
        raise ParameterError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)

    if kind == "blobs":
        if n_clusters < 1 or n_clusters > n:
            raise ParameterError(f"n_clusters must be in [1, n], got {n_clusters}")
        counts = np.full(n_clusters, n // n_clusters)
        counts[: n % n_clusters] += 1
        labels = np.repeat(np.arange(n_clusters), counts)
        angles = np.pi * (1.0 + 2.0 * np.arange(n_clusters) / n_clusters)
        centres = 3.0 * np.column_stack([np.cos(angles), np.sin(angles)])
        centres[np.abs(centres) < 1e-12] = 0.0
        points = centres[labels]
    elif kind == "two_moons":
        n_upper = n // 2
        n_lower = n - n_upper
        t_up = np.linspace(0.0, np.pi, n_upper)
        t_low = np.linspace(0.0, np.pi, n_lower)
        upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
        lower = np.column_stack([1.0 - np.cos(t_low), 0.5 - np.sin(t_low)])
        points = np.vstack([upper, lower])
        labels = np.repeat([0, 1], [n_upper, n_lower])
    else:
        n_outer = n // 2
        n_inner = n - n_outer
        t_out = np.linspace(0.0, 2.0 * np.pi, n_outer, endpoint=False)
        t_in = np.linspace(0.0, 2.0 * np.pi, n_inner, endpoint=False)
        outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
        inner = 0.5 * np.column_stack([np.cos(t_in), np.sin(t_in)])
        points = np.vstack([outer, inner])
        labels = np.repeat([0, 1], [n_outer, n_inner])

    if noise > 0:
        points = points + noise * rng.standard_normal(points.shape)
    return DenseDataset(points, labels)

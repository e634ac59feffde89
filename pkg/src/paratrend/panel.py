"""Panel container, CSV ingestion and simple derived series."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .kernels import as_kernel, check_bandwidth, hat_matrix


@dataclass(frozen=True)
class TimeSeriesPanel:
    """N x T observation matrix; row i is series i, column t is time t/T."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.array(self.values, dtype=np.float64, copy=True)
        if x.ndim != 2:
            raise InputError(f"panel must be two-dimensional, got shape {x.shape}")
        if x.shape[0] < 2:
            raise InputError("panel needs at least two series")
        if x.shape[1] < 4:
            raise InputError("series must have at least four observations")
        if not np.all(np.isfinite(x)):
            raise InputError("panel contains missing or non-finite values")
        x.setflags(write=False)
        object.__setattr__(self, "values", x)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != x.shape[0]:
                raise InputError("number of labels does not match number of series")
            object.__setattr__(self, "labels", labels)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def subset(self, members) -> "TimeSeriesPanel":
        idx = list(members)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return TimeSeriesPanel(self.values[idx], labels)

    def names(self) -> list[str]:
        return list(self.labels) if self.labels is not None else [f"s{i}" for i in range(self.N)]


@dataclass(frozen=True)
class PreprocessOptions:
    """``aggregate``: block length for summing consecutive observations.
    ``transpose``: rows of the file are series rather than time steps."""

    aggregate: int | None = None
    log10: bool = False
    transpose: bool = False
    delimiter: str | None = None


def _parse_float(s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise InputError(f"non-numeric value {s!r}") from None


def load_panel(source, options: PreprocessOptions | None = None) -> TimeSeriesPanel:
    """Read a delimited table (path, text or file object) into a panel.

    By default each column is a series and each row a time step. A first
    row that is not entirely numeric is taken as labels. Aggregation by block
    sums happens before the log transform.
    """
    options = options or PreprocessOptions()
    if isinstance(source, (str, os.PathLike)) and not (isinstance(source, str) and "\n" in source):
        try:
            with open(source, newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc}") from exc
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()

    delim = options.delimiter
    if delim is None:
        try:
            delim = csv.Sniffer().sniff(text[:4096], delimiters=",;\t ").delimiter
        except csv.Error:
            delim = ","
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delim, skipinitialspace=True) if r]
    rows = [[c.strip() for c in r if c.strip() != ""] for r in rows]
    rows = [r for r in rows if r]
    if not rows:
        raise InputError("empty input")

    def numeric(r):
        try:
            [float(c) for c in r]
            return True
        except ValueError:
            return False

    header = None
    if not numeric(rows[0]):
        header, rows = rows[0], rows[1:]
    if not rows:
        raise InputError("no data rows")
    width = len(rows[0])
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise InputError(f"ragged row {lineno}: expected {width} fields, got {len(r)}")
    data = np.array([[_parse_float(c) for c in r] for r in rows], dtype=float)
    if header is not None and len(header) != width:
        raise InputError("header length does not match data width")

    x = data if options.transpose else data.T
    labels = header
    if options.transpose and header is not None:
        raise InputError("a header row cannot label series when rows are series")

    x = aggregate(x, options.aggregate) if options.aggregate else x
    if options.log10:
        x = log10_transform(x)
    return TimeSeriesPanel(x, labels)


def aggregate(x: np.ndarray, period: int) -> np.ndarray:
    """Sum consecutive blocks of ``period`` observations."""
    period = int(period)
    if period < 1:
        raise ConfigError("aggregation period must be a positive integer")
    T = x.shape[1]
    if T % period:
        raise InputError(f"aggregation period {period} does not divide series length {T}")
    return x.reshape(x.shape[0], T // period, period).sum(axis=2)


def log10_transform(x: np.ndarray) -> np.ndarray:
    if np.any(x <= 0):
        raise InputError("non-positive value under log transform")
    return np.log10(x)


def save_panel(panel: TimeSeriesPanel, path) -> None:
    """Write a panel in the default orientation (one column per series), losslessly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(panel.names())
        for row in panel.values.T:
            w.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class PooledSeries:
    xbar_t: np.ndarray
    xbar_i: np.ndarray
    xbar: float


def pooled(panel: TimeSeriesPanel) -> PooledSeries:
    x = panel.values
    return PooledSeries(xbar_t=x.mean(axis=0), xbar_i=x.mean(axis=1), xbar=float(x.mean()))


def center(panel: TimeSeriesPanel) -> np.ndarray:
    """Y_it = X_it - mean over series at time t."""
    x = panel.values
    return x - x.mean(axis=0, keepdims=True)


@dataclass(frozen=True)
class ResidualPanel:
    residuals: np.ndarray
    bandwidth_used: float
    kernel: object = field(default=None, compare=False)


def residuals(panel: TimeSeriesPanel, kernel, b: float) -> ResidualPanel:
    kernel = as_kernel(kernel)
    b = check_bandwidth(panel.T, b)
    H = hat_matrix(kernel, panel.T, b).entries
    x = panel.values
    return ResidualPanel(residuals=x - x @ H.T, bandwidth_used=b, kernel=kernel)

"""Uniformly sampled multivariate time series and their CSV form.

The on-disk format is a plain CSV with header ``t,x1,...,xN``.  Map data
uses the sample index as the time column; flow and PDE data use
``index * dt``.  Floats are written with ``repr`` so a read-back is
bit-faithful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class TimeSeriesError(ConfigError):
    """Malformed series data or CSV contract violation."""


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(x))


@dataclass(frozen=True)
class TimeSeries:
    """Samples on a uniform time grid.

    Parameters
    ----------
    values : ndarray, shape (T, N)
        One row per sample.  A 1-d array is promoted to a single column.
    dt : float or None
        Sampling interval.  None marks map data whose time coordinate is
        the sample index (interval 1).
    start : float
        Time of the first sample.
    """

    values: np.ndarray
    dt: float | None = None
    start: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise TimeSeriesError("values must form a (T, N) array with T >= 1")
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.dt is not None and not (float(self.dt) > 0):
            raise TimeSeriesError(f"dt must be positive, got {self.dt}")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    @property
    def time_per_sample(self) -> float:
        return 1.0 if self.dt is None else float(self.dt)

    def time_at(self, index: float) -> float:
        """Time coordinate of a (possibly fractional) sample index."""
        return self.start + index * self.time_per_sample

    def times(self) -> np.ndarray:
        return self.start + np.arange(self.n_samples) * self.time_per_sample

    def window(self, i0: int, i1: int) -> "TimeSeries":
        """Sub-series covering samples [i0, i1)."""
        if not (0 <= i0 < i1 <= self.n_samples):
            raise TimeSeriesError(f"window [{i0}, {i1}) outside series of length {self.n_samples}")
        return TimeSeries(self.values[i0:i1], dt=self.dt, start=self.time_at(i0))

    def to_csv(self) -> str:
        header = "t," + ",".join(f"x{j + 1}" for j in range(self.n_vars))
        lines = [header]
        t = self.times()
        for i in range(self.n_samples):
            row = [format_float(t[i])]
            row.extend(format_float(x) for x in self.values[i])
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def parse_timeseries_csv(text: str) -> TimeSeries:
    """Parse the ``t,x1,...,xN`` CSV contract.

    The time column must be uniformly spaced to a relative tolerance of
    1e-9; anything else is rejected rather than silently resampled.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TimeSeriesError("empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 2 or header[0] != "t":
        raise TimeSeriesError(f"expected header 't,x1,...,xN', got {lines[0]!r}")
    for j, name in enumerate(header[1:]):
        if name != f"x{j + 1}":
            raise TimeSeriesError(f"expected column 'x{j + 1}' at position {j + 1}, got {name!r}")
    ncol = len(header)
    try:
        data = np.array([[float(f) for f in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise TimeSeriesError(f"non-numeric CSV cell: {exc}") from exc
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != ncol:
        raise TimeSeriesError("CSV must contain at least two complete data rows")
    t = data[:, 0]
    steps = np.diff(t)
    spacing = steps[0]
    if spacing <= 0:
        raise TimeSeriesError("time column must be strictly increasing")
    scale = max(abs(t[0]), abs(t[-1]), 1.0)
    if np.max(np.abs(steps - spacing)) > 1e-9 * scale:
        raise TimeSeriesError("time column is not uniformly spaced (relative tolerance 1e-9)")
    return TimeSeries(data[:, 1:], dt=float(spacing), start=float(t[0]))


def read_timeseries_csv(path) -> TimeSeries:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_timeseries_csv(fh.read())

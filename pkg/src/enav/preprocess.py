"""Raw-sample cleanup: resampling to a grid, outlier filtering, gap filling.

The pipeline order is fixed: resample -> filter_outliers -> interpolate_gaps,
so interpolation never smears an outlier across its neighbours. Rejected
outliers become MISSING (and are then eligible for interpolation); the
rejection log keeps the original values for audit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .timeseries import KindMismatch, Quality, Series, SeriesKind, TimeGrid, make_grid

MAD_SCALE = 1.4826  # consistency factor: MAD -> sigma for normal data


@dataclass(frozen=True)
class RawSeries:
    """Irregular imported samples, strictly increasing in timestamp."""

    sensor_id: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise ValueError("timestamps and values must be 1-d arrays of equal length")
        if ts.size > 1 and not (np.diff(ts) > 0).all():
            raise ValueError("raw timestamps must be strictly increasing")
        ts.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_points(cls, sensor_id: str, points) -> "RawSeries":
        pts = list(points)
        return cls(sensor_id,
                   np.array([t for t, _ in pts], dtype=np.int64),
                   np.array([v for _, v in pts], dtype=np.float64))

    def __len__(self) -> int:
        return int(self.timestamps.size)


@dataclass(frozen=True)
class PreprocessConfig:
    period: int
    snap_halfwidth: int | None = None  # defaults to period // 2
    outlier_window: int = 13
    outlier_k: float = 3.0
    max_interp_gap: int = 4

    def __post_init__(self) -> None:
        if self.outlier_window < 3 or self.outlier_window % 2 == 0:
            raise ValueError("outlier_window must be odd and >= 3")
        if self.outlier_k <= 0:
            raise ValueError("outlier_k must be positive")
        if self.max_interp_gap < 0:
            raise ValueError("max_interp_gap must be >= 0")

    @property
    def halfwidth(self) -> int:
        return self.period // 2 if self.snap_halfwidth is None else self.snap_halfwidth


@dataclass
class PreprocessReport:
    sensor_id: str
    snapped: int = 0
    rejected: int = 0
    interpolated: int = 0
    first_timestamp: int | None = None
    last_timestamp: int | None = None
    rejections: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "snapped": self.snapped,
            "rejected": self.rejected,
            "interpolated": self.interpolated,
            "first_timestamp": self.first_timestamp,
            "last_timestamp": self.last_timestamp,
        }


def resample(raw: RawSeries, grid: TimeGrid, snap_halfwidth: int) -> Series:
    """Snap raw points onto grid slots.

    Each raw point goes to its nearest existing slot (tie: the earlier slot);
    a slot keeps the nearest of its points within +-snap_halfwidth (tie: the
    earlier point). Slots with no point are MISSING.
    """
    values = np.full(grid.count, np.nan)
    quality = np.full(grid.count, Quality.MISSING, dtype=np.uint8)
    if grid.count == 0 or len(raw) == 0:
        return Series(raw.sensor_id, grid, values, quality)
    d = raw.timestamps - grid.start
    idx0 = np.floor_divide(d, grid.period)
    rem = d - idx0 * grid.period
    slot = np.where(rem * 2 > grid.period, idx0 + 1, idx0)  # tie (rem*2 == period) stays earlier
    slot = np.clip(slot, 0, grid.count - 1)
    dist = np.abs(d - slot * grid.period)
    keep = dist <= snap_halfwidth
    slot, dist = slot[keep], dist[keep]
    vals, ts = raw.values[keep], raw.timestamps[keep]
    if slot.size:
        order = np.lexsort((ts, dist, slot))
        slot, vals = slot[order], vals[order]
        winners = np.unique(slot, return_index=True)[1]
        values[slot[winners]] = vals[winners]
        quality[slot[winners]] = Quality.VALID
    return Series(raw.sensor_id, grid, values, quality)


def _rolling_median_mad(values: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered rolling median and MAD, NaN-aware, truncated at the edges."""
    half = window // 2
    padded = np.concatenate([np.full(half, np.nan), values, np.full(half, np.nan)])
    win = np.lib.stride_tricks.sliding_window_view(padded, window)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN windows
        med = np.nanmedian(win, axis=1)
        mad = np.nanmedian(np.abs(win - med[:, None]), axis=1)
    return med, mad


def filter_outliers(series: Series, window: int, k: float) -> tuple[Series, list[dict]]:
    """Hampel filter: mark VALID samples deviating more than k * 1.4826 * MAD
    from the windowed median as MISSING. A zero MAD disables rejection (the
    window carries no spread information). Returns the filtered series and a
    rejection log.
    """
    if series.kind != SeriesKind.NUMERIC:
        raise KindMismatch("filter_outliers requires a NUMERIC series")
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    valid = series.valid_mask()
    if not valid.any():
        return series, []
    med, mad = _rolling_median_mad(series.values, window)
    dev = np.abs(series.values - med)
    reject = valid & (mad > 0) & (dev > k * MAD_SCALE * mad)
    if not reject.any():
        return series, []
    ts = series.grid.timestamps()
    log = [
        {
            "timestamp": int(ts[i]),
            "value": float(series.values[i]),
            "median": float(med[i]),
            "mad": float(mad[i]),
        }
        for i in np.flatnonzero(reject)
    ]
    values = series.values.copy()
    quality = series.quality.copy()
    values[reject] = np.nan
    quality[reject] = Quality.MISSING
    return Series(series.sensor_id, series.grid, values, quality), log


def _missing_runs(quality: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [i, j] index runs of MISSING samples."""
    miss = quality == Quality.MISSING
    if not miss.any():
        return []
    edges = np.diff(miss.astype(np.int8))
    starts = list(np.flatnonzero(edges == 1) + 1)
    ends = list(np.flatnonzero(edges == -1))
    if miss[0]:
        starts.insert(0, 0)
    if miss[-1]:
        ends.append(len(miss) - 1)
    return list(zip(starts, ends))


def interpolate_gaps(series: Series, max_gap: int) -> tuple[Series, int]:
    """Linearly fill interior MISSING runs of length <= max_gap with VALID
    neighbours on both sides. Returns the filled series and the fill count.
    """
    if series.kind != SeriesKind.NUMERIC:
        raise KindMismatch("interpolate_gaps requires a NUMERIC series")
    values = series.values.copy()
    quality = series.quality.copy()
    filled = 0
    n = series.grid.count
    for i, j in _missing_runs(series.quality):
        length = j - i + 1
        if length > max_gap or i == 0 or j == n - 1:
            continue
        if quality[i - 1] != Quality.VALID or quality[j + 1] != Quality.VALID:
            continue
        v0, v1 = values[i - 1], values[j + 1]
        steps = np.arange(1, length + 1, dtype=np.float64)
        values[i:j + 1] = v0 + (v1 - v0) * steps / (length + 1)
        quality[i:j + 1] = Quality.VALID
        filled += length
    if filled == 0:
        return series, 0
    return Series(series.sensor_id, series.grid, values, quality), filled


def preprocess(
    raw: RawSeries,
    config: PreprocessConfig,
    grid: TimeGrid | None = None,
) -> tuple[Series, PreprocessReport]:
    """Full pipeline: resample -> filter_outliers -> interpolate_gaps.

    When no grid is given it is derived from the raw extent; an empty raw
    series yields an empty grid.
    """
    if grid is None:
        if len(raw) == 0:
            grid = make_grid(0, 0, config.period)
        else:
            start = int(raw.timestamps[0])
            end = int(raw.timestamps[-1]) + 1
            grid = make_grid(start, end, config.period)
    report = PreprocessReport(sensor_id=raw.sensor_id)
    snapped = resample(raw, grid, config.halfwidth)
    report.snapped = int((snapped.quality == Quality.VALID).sum())
    filtered, rejections = filter_outliers(snapped, config.outlier_window, config.outlier_k)
    report.rejected = len(rejections)
    report.rejections = rejections
    result, filled = interpolate_gaps(filtered, config.max_interp_gap)
    report.interpolated = filled
    if grid.count:
        report.first_timestamp = grid.timestamp(0)
        report.last_timestamp = grid.timestamp(grid.count - 1)
    return result, report

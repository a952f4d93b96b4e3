"""Equidistant time grids and sensor series.

Every value stream in the system -- physical sensors, virtual sensors
produced by rule/function evaluation -- is a :class:`Series`: a dense,
equidistant sequence of ``(value, quality)`` samples on a :class:`TimeGrid`.
Timestamps are UTC epoch seconds throughout; civil-time concerns (metric
buckets, time routines) live in the evaluation layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import IntEnum
from typing import Iterator

import numpy as np

DAY_SECONDS = 86400


class EnavError(Exception):
    """Base class for all domain errors."""


class NonPositivePeriod(EnavError):
    pass


class EndBeforeStart(EnavError):
    pass


class GridMismatch(EnavError):
    pass


class KindMismatch(EnavError):
    pass


class Quality(IntEnum):
    """Per-sample quality tag. Codes match the on-disk chunk format."""

    VALID = 0
    MISSING = 1
    UNDEFINED = 2


class SeriesKind(IntEnum):
    NUMERIC = 0
    BOOLEAN = 1


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant grid: ``timestamp(i) = start + i * period`` for i < count."""

    start: int
    period: int
    count: int

    def __post_init__(self) -> None:
        if self.period <= 0:
            raise NonPositivePeriod(f"period must be positive, got {self.period}")
        if self.count < 0:
            raise ValueError(f"count must be non-negative, got {self.count}")

    def timestamp(self, i: int) -> int:
        return self.start + i * self.period

    @property
    def end(self) -> int:
        """One period past the last slot (exclusive)."""
        return self.start + self.count * self.period

    def timestamps(self) -> np.ndarray:
        return self.start + self.period * np.arange(self.count, dtype=np.int64)

    def index_of(self, ts: int) -> int:
        """Slot index of an on-grid timestamp; raises GridMismatch if off-grid."""
        off = ts - self.start
        if off % self.period != 0:
            raise GridMismatch(f"timestamp {ts} not on grid (start={self.start}, period={self.period})")
        i = off // self.period
        if not 0 <= i < self.count:
            raise GridMismatch(f"timestamp {ts} outside grid range")
        return i


def make_grid(start: int, end: int, period: int) -> TimeGrid:
    """Build the grid covering ``[start, end)`` at the given period.

    ``count = ceil((end - start) / period)``. When the period divides a day
    the start is snapped down to the nearest period multiple, anchoring the
    grid at UTC midnight.
    """
    if period <= 0:
        raise NonPositivePeriod(f"period must be positive, got {period}")
    if end < start:
        raise EndBeforeStart(f"end {end} before start {start}")
    count = -((start - end) // period)  # ceil((end - start) / period) in ints
    if DAY_SECONDS % period == 0:
        start = start - (start % period)
    return TimeGrid(start=start, period=period, count=count)


@dataclass(frozen=True)
class Sample:
    value: float
    quality: Quality

    def __post_init__(self) -> None:
        # Canonical stored value for non-VALID samples is NaN.
        if self.quality != Quality.VALID and not math.isnan(self.value):
            object.__setattr__(self, "value", math.nan)


@dataclass(frozen=True)
class Series:
    """Dense sample sequence on a grid.

    ``values`` is float64 (NaN wherever quality != VALID), ``quality`` is the
    uint8 :class:`Quality` code array. BOOLEAN series encode true as 1.0 and
    false as 0.0; no other valid values are permitted. Instances are
    immutable (arrays are frozen) and safe to share across threads.
    """

    sensor_id: str
    grid: TimeGrid
    values: np.ndarray
    quality: np.ndarray
    kind: SeriesKind = SeriesKind.NUMERIC

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        quality = np.asarray(self.quality, dtype=np.uint8).copy()
        if values.shape != (self.grid.count,) or quality.shape != (self.grid.count,):
            raise ValueError(
                f"sample arrays must have length {self.grid.count}, "
                f"got {values.shape} / {quality.shape}"
            )
        if quality.size and quality.max(initial=0) > int(Quality.UNDEFINED):
            raise ValueError("invalid quality code")
        valid = quality == Quality.VALID
        values[~valid] = np.nan
        if self.kind == SeriesKind.BOOLEAN:
            ok = np.isin(values[valid], (0.0, 1.0))
            if not ok.all():
                raise ValueError("BOOLEAN series may only hold 0.0/1.0 values")
        elif np.isnan(values[valid]).any():
            raise ValueError("VALID samples must not be NaN")
        values.flags.writeable = False
        quality.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "quality", quality)

    @classmethod
    def numeric(cls, sensor_id: str, grid: TimeGrid, values, quality=None) -> "Series":
        values = np.asarray(values, dtype=np.float64)
        if quality is None:
            quality = np.where(np.isnan(values), Quality.MISSING, Quality.VALID).astype(np.uint8)
        return cls(sensor_id, grid, values, np.asarray(quality, dtype=np.uint8), SeriesKind.NUMERIC)

    @classmethod
    def boolean(cls, sensor_id: str, grid: TimeGrid, values, quality) -> "Series":
        return cls(sensor_id, grid, np.asarray(values, dtype=np.float64),
                   np.asarray(quality, dtype=np.uint8), SeriesKind.BOOLEAN)

    @classmethod
    def all_missing(cls, sensor_id: str, grid: TimeGrid, kind: SeriesKind = SeriesKind.NUMERIC) -> "Series":
        return cls(sensor_id, grid,
                   np.full(grid.count, np.nan),
                   np.full(grid.count, Quality.MISSING, dtype=np.uint8), kind)

    def sample(self, i: int) -> Sample:
        return Sample(float(self.values[i]), Quality(int(self.quality[i])))

    def samples(self) -> Iterator[Sample]:
        for i in range(self.grid.count):
            yield self.sample(i)

    def valid_mask(self) -> np.ndarray:
        return self.quality == Quality.VALID

    def with_id(self, sensor_id: str) -> "Series":
        return Series(sensor_id, self.grid, self.values, self.quality, self.kind)

    def equals_samples(self, other: "Series") -> bool:
        """Sample-for-sample equality (ignores sensor_id)."""
        if self.grid != other.grid or self.kind != other.kind:
            return False
        if not np.array_equal(self.quality, other.quality):
            return False
        valid = self.valid_mask()
        return bool(np.array_equal(self.values[valid], other.values[valid]))


@dataclass(frozen=True)
class MarkerSeries:
    """Logged mode markers: ordered ``(timestamp, label)`` events."""

    sensor_id: str
    events: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        events = tuple((int(t), str(label)) for t, label in self.events)
        ts = [t for t, _ in events]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("marker events must be strictly increasing in timestamp")
        object.__setattr__(self, "events", events)


def marker_mode_mask(markers: MarkerSeries, grid: TimeGrid, label: str) -> np.ndarray:
    """Boolean mask of grid slots where the most recent marker carries ``label``.

    A mode is active from its event timestamp until the next event. Slots
    before the first event are inactive. This is the hook by which logged
    mode markers feed time-routine-style gating; markers carry no further
    semantics.
    """
    mask = np.zeros(grid.count, dtype=bool)
    if not markers.events or grid.count == 0:
        return mask
    ts = grid.timestamps()
    ev_t = np.array([t for t, _ in markers.events], dtype=np.int64)
    ev_on = np.array([lab == label for _, lab in markers.events], dtype=bool)
    idx = np.searchsorted(ev_t, ts, side="right") - 1
    has = idx >= 0
    mask[has] = ev_on[idx[has]]
    return mask


def parse_utc(text: str) -> int:
    """Parse an ISO-8601 timestamp with explicit offset (or Z) to epoch seconds.

    Naive timestamps are rejected: imports across DST transitions must be
    unambiguous.
    """
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp {text!r} has no UTC offset")
    return int(dt.timestamp())


def format_utc(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

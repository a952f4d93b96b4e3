"""File-backed per-sensor series store.

Series are persisted in one binary chunk file per sensor per UTC calendar
month (`<root>/<sensor_id>/<YYYY-MM>.ens`). Chunk layout, little-endian:

    magic "ENAV1" (5 bytes)
    u8   kind            0 numeric, 1 boolean
    u16  id length, then UTF-8 sensor id
    u32  period seconds
    i64  chunk start, epoch seconds
    u32  sample count
    count x { f64 value, u8 quality }   quality: 0 VALID, 1 MISSING, 2 UNDEFINED

Readers may run concurrently; writers take a per-sensor lock file
(single-writer contract). Rewriting an overlapping range replaces the
overlapped samples; writes beyond the existing range extend the chunk.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from filelock import FileLock

from .timeseries import (
    GridMismatch,
    KindMismatch,
    Quality,
    Series,
    SeriesKind,
    TimeGrid,
    make_grid,
)

MAGIC = b"ENAV1"
_HEADER_FIXED = struct.Struct("<5sB")
_HEADER_TAIL = struct.Struct("<IqI")
_RECORD_DTYPE = np.dtype([("value", "<f8"), ("quality", "u1")])


class IOFailure(Exception):
    pass


class UnknownSensor(Exception):
    pass


@dataclass(frozen=True)
class ChunkHeader:
    kind: SeriesKind
    sensor_id: str
    period: int
    start: int
    count: int


def _month_key(ts: int) -> tuple[int, int]:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    return dt.year, dt.month

def _month_start(year: int, month: int) -> int:
    return int(datetime(year, month, 1, tzinfo=timezone.utc).timestamp())

def _next_month(year: int, month: int) -> tuple[int, int]:
    return (year + 1, 1) if month == 12 else (year, month + 1)

def _iter_months(start_ts: int, end_ts: int):
    """Yield (year, month) for every UTC month intersecting [start_ts, end_ts)."""
    if end_ts <= start_ts:
        return
    y, m = _month_key(start_ts)
    while _month_start(y, m) < end_ts:
        yield y, m
        y, m = _next_month(y, m)


def read_chunk(path: Path) -> tuple[ChunkHeader, np.ndarray, np.ndarray]:
    """Read one chunk file; returns (header, values, quality)."""
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    magic, kind = _HEADER_FIXED.unpack_from(blob, 0)
    if magic != MAGIC:
        raise IOFailure(f"{path}: bad magic {magic!r}")
    off = _HEADER_FIXED.size
    (id_len,) = struct.unpack_from("<H", blob, off)
    off += 2
    sensor_id = blob[off:off + id_len].decode("utf-8")
    off += id_len
    period, start, count = _HEADER_TAIL.unpack_from(blob, off)
    off += _HEADER_TAIL.size
    records = np.frombuffer(blob, dtype=_RECORD_DTYPE, count=count, offset=off)
    header = ChunkHeader(SeriesKind(kind), sensor_id, period, start, count)
    return header, records["value"].astype(np.float64), records["quality"].copy()


def write_chunk(path: Path, header: ChunkHeader, values: np.ndarray, quality: np.ndarray) -> None:
    sid = header.sensor_id.encode("utf-8")
    records = np.empty(header.count, dtype=_RECORD_DTYPE)
    records["value"] = values
    records["quality"] = quality
    blob = b"".join([
        _HEADER_FIXED.pack(MAGIC, int(header.kind)),
        struct.pack("<H", len(sid)), sid,
        _HEADER_TAIL.pack(header.period, header.start, header.count),
        records.tobytes(),
    ])
    tmp = path.with_suffix(".tmp")
    try:
        tmp.write_bytes(blob)
        os.replace(tmp, path)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


class SeriesStore:
    """Monthly-chunked store rooted at a directory.

    One subdirectory per sensor; the sensor's period and kind are fixed by
    its first written chunk.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def _sensor_dir(self, sensor_id: str) -> Path:
        return self.root / sensor_id

    def _chunks(self, sensor_id: str) -> list[Path]:
        d = self._sensor_dir(sensor_id)
        if not d.is_dir():
            return []
        return sorted(d.glob("*.ens"))

    def sensors(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir() and any(p.glob("*.ens")))

    def describe(self, sensor_id: str) -> ChunkHeader:
        """Header of the sensor's first chunk; raises UnknownSensor if absent."""
        chunks = self._chunks(sensor_id)
        if not chunks:
            raise UnknownSensor(sensor_id)
        header, _, _ = read_chunk(chunks[0])
        return header

    def write(self, series: Series) -> None:
        """Persist a series, merging with any existing chunks.

        The full span of ``series.grid`` replaces whatever was stored for
        those timestamps (including MISSING samples inside the span).
        """
        if series.grid.count == 0:
            return
        sdir = self._sensor_dir(series.sensor_id)
        sdir.mkdir(parents=True, exist_ok=True)
        grid = series.grid
        with FileLock(str(sdir / ".lock")):
            existing = self._chunks(series.sensor_id)
            if existing:
                head, _, _ = read_chunk(existing[0])
                if head.period != grid.period:
                    raise GridMismatch(
                        f"{series.sensor_id}: stored period {head.period}, write period {grid.period}")
                if head.kind != series.kind:
                    raise KindMismatch(
                        f"{series.sensor_id}: stored kind {head.kind.name}, write kind {series.kind.name}")
            for year, month in _iter_months(grid.start, grid.end):
                m0, m1 = _month_start(year, month), _month_start(*_next_month(year, month))
                # slots of the written grid falling inside this month
                lo = max(0, -((grid.start - m0) // grid.period))  # ceil
                hi = min(grid.count, -((grid.start - m1) // grid.period))
                if hi <= lo:
                    continue
                new_start = grid.timestamp(lo)
                new_vals = series.values[lo:hi]
                new_qual = series.quality[lo:hi]
                path = sdir / f"{year:04d}-{month:02d}.ens"
                if path.exists():
                    old, vals, qual = read_chunk(path)
                    if old.period != grid.period:
                        raise GridMismatch(
                            f"{series.sensor_id}: stored period {old.period}, "
                            f"write period {grid.period}")
                    if old.kind != series.kind:
                        raise KindMismatch(
                            f"{series.sensor_id}: stored kind {old.kind.name}, "
                            f"write kind {series.kind.name}")
                    if (new_start - old.start) % grid.period != 0:
                        raise GridMismatch(f"{series.sensor_id}: write not phase-aligned with stored chunk")
                    start = min(old.start, new_start)
                    end = max(old.start + old.count * grid.period, new_start + (hi - lo) * grid.period)
                    count = (end - start) // grid.period
                    mvals = np.full(count, np.nan)
                    mqual = np.full(count, Quality.MISSING, dtype=np.uint8)
                    o = (old.start - start) // grid.period
                    mvals[o:o + old.count] = vals
                    mqual[o:o + old.count] = qual
                    n = (new_start - start) // grid.period
                    mvals[n:n + (hi - lo)] = new_vals
                    mqual[n:n + (hi - lo)] = new_qual
                    header = ChunkHeader(series.kind, series.sensor_id, grid.period, start, count)
                    write_chunk(path, header, mvals, mqual)
                else:
                    header = ChunkHeader(series.kind, series.sensor_id, grid.period, new_start, hi - lo)
                    write_chunk(path, header, new_vals, new_qual)

    def load(self, sensor_id: str, start: int, end: int) -> Series:
        """Load the series over ``[start, end)`` on the sensor's stored grid.

        Timestamps with no persisted sample come back MISSING.
        """
        info = self.describe(sensor_id)
        grid = make_grid(start, end, info.period)
        values = np.full(grid.count, np.nan)
        quality = np.full(grid.count, Quality.MISSING, dtype=np.uint8)
        sdir = self._sensor_dir(sensor_id)
        for year, month in _iter_months(grid.start, grid.end):
            path = sdir / f"{year:04d}-{month:02d}.ens"
            if not path.exists():
                continue
            header, cvals, cqual = read_chunk(path)
            if header.period != info.period:
                raise GridMismatch(f"{sensor_id}: chunk {path.name} period {header.period} != {info.period}")
            if (header.start - grid.start) % grid.period != 0:
                raise GridMismatch(f"{sensor_id}: chunk {path.name} not phase-aligned with requested grid")
            # overlap of chunk span with grid span, in chunk indices
            lo = max(0, (grid.start - header.start) // grid.period)
            hi = min(header.count, (grid.end - header.start) // grid.period)
            if hi <= lo:
                continue
            g = (header.start + lo * grid.period - grid.start) // grid.period
            values[g:g + hi - lo] = cvals[lo:hi]
            quality[g:g + hi - lo] = cqual[lo:hi]
        return Series(sensor_id, grid, values, quality, info.kind)

    def delete_sensor(self, sensor_id: str) -> None:
        for path in self._chunks(sensor_id):
            path.unlink()


def store_write(store_root: str | os.PathLike, series: Series) -> None:
    SeriesStore(store_root).write(series)


def store_load(store_root: str | os.PathLike, sensor_id: str, start: int, end: int) -> Series:
    return SeriesStore(store_root).load(sensor_id, start, end)


def save_markers(root: str | os.PathLike, markers) -> None:
    """Persist marker events as `<root>/<sensor_id>/markers.csv` (ts,label)."""
    sdir = Path(root) / markers.sensor_id
    sdir.mkdir(parents=True, exist_ok=True)
    lines = [f"{t},{label}\n" for t, label in markers.events]
    (sdir / "markers.csv").write_text("".join(lines), encoding="utf-8")


def load_markers(root: str | os.PathLike, sensor_id: str):
    from .timeseries import MarkerSeries

    path = Path(root) / sensor_id / "markers.csv"
    if not path.exists():
        raise UnknownSensor(sensor_id)
    events = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        ts, label = line.split(",", 1)
        events.append((int(ts), label))
    return MarkerSeries(sensor_id, tuple(events))

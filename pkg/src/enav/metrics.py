"""Calendar-bucketed aggregation and conformance summaries.

Buckets are civil-time calendar periods in the workspace timezone: days at
local midnight, ISO weeks starting Monday, months, quarters anchored at
Jan/Apr/Jul/Oct, years. First and last buckets are clipped to the
requested range. A bucket aggregates its VALID samples; when the fraction
of VALID samples falls below the coverage threshold the value is reported
MISSING (the coverage itself is always reported). SUM adds up whatever is
available, with no upscaling for gaps; STDDEV is the sample standard
deviation (n-1).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from datetime import datetime, date, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from .fourvalued import BoolValue, codes_from_series
from .lang.ast import MetricDecl
from .routines import calendar_fields
from .timeseries import Quality, Series, SeriesKind


class EmptyRange(Exception):
    pass


@dataclass(frozen=True)
class MetricBucket:
    start: int  # epoch seconds, clipped to the evaluation range
    end: int
    value: float | None  # None = MISSING
    coverage: float


@dataclass(frozen=True)
class MetricSeries:
    metric_id: str
    buckets: tuple


def _bucket_keys(fields: dict, quant: str) -> np.ndarray:
    if quant == "day":
        return fields["ordinal"]
    if quant == "week":
        return fields["ordinal"] - fields["weekday"]  # Monday of the ISO week
    if quant == "month":
        return fields["year"] * 12 + fields["month"]
    if quant == "quarter":
        return fields["year"] * 4 + (fields["month"] - 1) // 3
    if quant == "year":
        return fields["year"]
    raise ValueError(f"unknown quantization {quant!r}")


def _bucket_bounds(key: int, quant: str, tz: ZoneInfo) -> tuple[int, int]:
    """Calendar start/end of a bucket key as epoch seconds (local midnights)."""
    def local(d: date) -> int:
        return int(datetime(d.year, d.month, d.day, tzinfo=tz).timestamp())

    if quant == "day":
        d = date.fromordinal(int(key))
        return local(d), local(d + timedelta(days=1))
    if quant == "week":
        d = date.fromordinal(int(key))
        return local(d), local(d + timedelta(days=7))
    if quant == "month":
        year, month = divmod(int(key), 12)
        start = date(year, month + 1, 1) if month else date(year - 1, 12, 1)
        nxt = (date(start.year + 1, 1, 1) if start.month == 12
               else date(start.year, start.month + 1, 1))
        return local(start), local(nxt)
    if quant == "quarter":
        year, q = divmod(int(key), 4)
        start = date(year, q * 3 + 1, 1)
        nxt = date(year + 1, 1, 1) if q == 3 else date(year, q * 3 + 4, 1)
        return local(start), local(nxt)
    year = int(key)
    return local(date(year, 1, 1)), local(date(year + 1, 1, 1))


def _aggregate(base_fn: str, values: np.ndarray) -> float:
    if base_fn == "AVERAGE":
        return float(values.mean())
    if base_fn == "MINIMUM":
        return float(values.min())
    if base_fn == "MAXIMUM":
        return float(values.max())
    if base_fn == "SUM":
        return float(values.sum())
    if base_fn == "COUNT":
        return float(values.size)
    if base_fn == "STDDEV":
        if values.size < 2:
            return 0.0
        return float(values.std(ddof=1))
    raise ValueError(f"unknown base function {base_fn!r}")


def aggregate_series(
    series: Series,
    base_fn: str,
    quant: str,
    tz_name: str,
    coverage_threshold: float,
    metric_id: str = "",
) -> MetricSeries:
    """Bucket the series' own grid span and aggregate per bucket.

    A bucket with no VALID samples is MISSING regardless of the threshold;
    there is nothing to aggregate.
    """
    if series.grid.count == 0:
        raise EmptyRange("metric evaluation needs a non-empty range")
    tz = ZoneInfo(tz_name)
    fields = calendar_fields(series.grid, tz_name)
    keys = _bucket_keys(fields, quant)
    valid = series.valid_mask()
    ts = series.grid.timestamps()
    buckets = []
    # keys are non-decreasing along the grid; split once
    boundaries = np.flatnonzero(np.diff(keys)) + 1
    for lo, hi in zip(np.r_[0, boundaries], np.r_[boundaries, keys.size]):
        key = int(keys[lo])
        cal_start, cal_end = _bucket_bounds(key, quant, tz)
        start = max(cal_start, int(ts[lo]))
        end = min(cal_end, series.grid.end)
        window_valid = valid[lo:hi]
        expected = hi - lo
        n_valid = int(window_valid.sum())
        coverage = n_valid / expected
        if n_valid == 0 or coverage < coverage_threshold:
            value = None
        else:
            value = _aggregate(base_fn, series.values[lo:hi][window_valid])
        buckets.append(MetricBucket(start, end, value, coverage))
    return MetricSeries(metric_id, tuple(buckets))


def eval_metric(metric: MetricDecl, context_series: Series, tz_name: str) -> MetricSeries:
    if context_series.kind != SeriesKind.NUMERIC:
        raise ValueError(f"metric '{metric.name}' needs a numeric context series")
    return aggregate_series(context_series, metric.base_fn, metric.quant,
                            tz_name, metric.coverage, metric.name)


def metric_csv(result: MetricSeries, tz_name: str) -> str:
    """`bucket_start,bucket_end,value,coverage` -- ISO-8601 local time,
    empty value field for MISSING buckets."""
    tz = ZoneInfo(tz_name)
    out = io.StringIO()
    out.write("bucket_start,bucket_end,value,coverage\n")
    for b in result.buckets:
        start = datetime.fromtimestamp(b.start, tz).isoformat()
        end = datetime.fromtimestamp(b.end, tz).isoformat()
        value = "" if b.value is None else repr(b.value)
        out.write(f"{start},{end},{value},{b.coverage!r}\n")
    return out.getvalue()


@dataclass(frozen=True)
class ConformanceSummary:
    counts: dict  # BoolValue name -> int
    fractions: dict  # BoolValue name -> float
    total: int


def conformance(rule_series: Series) -> ConformanceSummary:
    """Per-value counts and fractions of a four-valued rule series."""
    codes = codes_from_series(rule_series)
    total = codes.size
    counts = {v.name: int((codes == v).sum()) for v in BoolValue}
    fractions = {name: (c / total if total else 0.0) for name, c in counts.items()}
    return ConformanceSummary(counts, fractions, total)

"""Civil-time calendar fields and time-routine membership.

All calendar logic (routines, metric buckets, carpet-plot columns) runs in
one workspace-level IANA timezone. Field extraction per grid is cached:
the same grid is reused by every rule and metric of a run.
"""

from __future__ import annotations

from datetime import datetime
from functools import lru_cache
from zoneinfo import ZoneInfo

import numpy as np

from .lang.ast import TimeRoutineDecl
from .timeseries import TimeGrid


@lru_cache(maxsize=64)
def calendar_fields(grid: TimeGrid, tz_name: str) -> dict:
    """Per-slot civil-time fields: year month day hour minute second
    weekday (Mon=0) and the proleptic-Gregorian ordinal of the local date.
    """
    tz = ZoneInfo(tz_name)
    n = grid.count
    out = {name: np.empty(n, dtype=np.int64)
           for name in ("year", "month", "day", "hour", "minute", "second",
                        "weekday", "ordinal")}
    ts = grid.timestamps()
    for i in range(n):
        dt = datetime.fromtimestamp(int(ts[i]), tz)
        out["year"][i] = dt.year
        out["month"][i] = dt.month
        out["day"][i] = dt.day
        out["hour"][i] = dt.hour
        out["minute"][i] = dt.minute
        out["second"][i] = dt.second
        out["weekday"][i] = dt.weekday()
        out["ordinal"][i] = dt.toordinal()
    for arr in out.values():
        arr.flags.writeable = False
    return out


def routine_mask(
    routine: TimeRoutineDecl,
    grid: TimeGrid,
    tz_name: str,
    registry: dict | None = None,
) -> np.ndarray:
    """Boolean membership per grid slot.

    member(t) = (own ranges match t  OR  any included routine matches t)
                AND NOT any excluded routine matches t

    ``registry`` maps routine names to declarations for include/exclude
    references (resolution guarantees acyclicity).
    """
    registry = registry or {}
    fields = calendar_fields(grid, tz_name)
    mask = np.zeros(grid.count, dtype=bool)
    for rng in routine.ranges:
        m = np.ones(grid.count, dtype=bool)
        for field_name, allowed in rng.items():
            m &= np.isin(fields[field_name], sorted(allowed))
        mask |= m
    for name in routine.includes:
        mask |= routine_mask(registry[name], grid, tz_name, registry)
    for name in routine.excludes:
        mask &= ~routine_mask(registry[name], grid, tz_name, registry)
    return mask


def eval_timeroutine(routine, grid: TimeGrid, tz_name: str, registry: dict | None = None):
    """Routine membership as a two-valued BOOLEAN series (never MISSING)."""
    from .fourvalued import BoolValue, series_from_codes

    mask = routine_mask(routine, grid, tz_name, registry)
    codes = np.where(mask, BoolValue.TRUE, BoolValue.FALSE).astype(np.uint8)
    return series_from_codes(f"routine:{routine.name}", grid, codes)

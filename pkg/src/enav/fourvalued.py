"""Four-valued rule logic: TRUE, FALSE, MISSING, UNDEFINED.

MISSING means no context data was available at a timestamp; UNDEFINED means
evaluation itself was impossible (division by zero, out-of-domain lookup).
The connectives are strong-Kleene, extended so that UNDEFINED dominates
MISSING wherever a definite result is out of reach:

    AND: FALSE if either is FALSE; else UNDEFINED if either is UNDEFINED;
         else MISSING if either is MISSING; else TRUE.
    OR:  TRUE if either is TRUE; else UNDEFINED; else MISSING; else FALSE.
    NOT: swaps TRUE/FALSE, fixes MISSING and UNDEFINED.
    IMPLIES(a, b) = OR(NOT a, b).

Restricted to {TRUE, FALSE} this is classical Boolean logic.

Scalar values are :class:`BoolValue`; bulk evaluation works on uint8 code
arrays via the same lookup tables.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .timeseries import Quality, Series, SeriesKind


class BoolValue(IntEnum):
    FALSE = 0
    TRUE = 1
    MISSING = 2
    UNDEFINED = 3


F, T, M, U = BoolValue.FALSE, BoolValue.TRUE, BoolValue.MISSING, BoolValue.UNDEFINED

NOT_TABLE = np.array([T, F, M, U], dtype=np.uint8)

AND_TABLE = np.array([
    #     b=F  T  F  U
    [F, F, F, F],  # a = FALSE
    [F, T, M, U],  # a = TRUE
    [F, M, M, U],  # a = MISSING
    [F, U, U, U],  # a = UNDEFINED
], dtype=np.uint8)

OR_TABLE = np.array([
    [F, T, M, U],  # a = FALSE
    [T, T, T, T],  # a = TRUE
    [M, T, M, U],  # a = MISSING
    [U, T, U, U],  # a = UNDEFINED
], dtype=np.uint8)


def not_(a):
    return NOT_TABLE[a]

def and_(a, b):
    return AND_TABLE[a, b]

def or_(a, b):
    return OR_TABLE[a, b]

def implies(a, b):
    return OR_TABLE[NOT_TABLE[a], b]


def bool_not(a: BoolValue) -> BoolValue:
    return BoolValue(int(NOT_TABLE[a]))

def bool_and(a: BoolValue, b: BoolValue) -> BoolValue:
    return BoolValue(int(AND_TABLE[a, b]))

def bool_or(a: BoolValue, b: BoolValue) -> BoolValue:
    return BoolValue(int(OR_TABLE[a, b]))

def bool_implies(a: BoolValue, b: BoolValue) -> BoolValue:
    return BoolValue(int(implies(a, b)))


def codes_from_series(series: Series) -> np.ndarray:
    """Series -> uint8 BoolValue codes."""
    if series.kind != SeriesKind.BOOLEAN:
        raise ValueError("expected a BOOLEAN series")
    codes = np.empty(series.grid.count, dtype=np.uint8)
    codes[series.quality == Quality.MISSING] = M
    codes[series.quality == Quality.UNDEFINED] = U
    valid = series.quality == Quality.VALID
    codes[valid] = np.where(series.values[valid] != 0.0, T, F)
    return codes


def series_from_codes(sensor_id: str, grid, codes: np.ndarray) -> Series:
    """uint8 BoolValue codes -> BOOLEAN Series."""
    codes = np.asarray(codes, dtype=np.uint8)
    values = np.full(codes.shape, np.nan)
    quality = np.full(codes.shape, Quality.VALID, dtype=np.uint8)
    values[codes == T] = 1.0
    values[codes == F] = 0.0
    quality[codes == M] = Quality.MISSING
    quality[codes == U] = Quality.UNDEFINED
    return Series(sensor_id, grid, values, quality, SeriesKind.BOOLEAN)

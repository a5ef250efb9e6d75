"""Numeric helpers shared by the float and exact-rational modes."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Iterable, List, Union

import numpy as np

Number = Union[float, Fraction]

DEFAULT_TOLERANCE = 1e-9
LP_FEASIBILITY_TOLERANCE = 1e-7


def total(values: Iterable[Number]) -> Number:
    """Sum values exactly for rationals, correctly rounded for floats.

    The float path uses ``math.fsum`` so the result does not depend on the
    summation order.
    """
    items: List[Number] = list(values)
    if any(isinstance(value, Fraction) for value in items):
        return sum(items, Fraction(0))
    return math.fsum(items)


def to_rational(value: Any) -> Fraction:
    """Convert a number to a Fraction through its shortest decimal form."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(repr(float(value)))


def parse_number(value: Any) -> Number:
    """Parse a number read from an instance or menu file."""
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, Fraction):
        return value
    return float(value)


def format_number(value: Any) -> Any:
    """Render a number for JSON or CSV output without losing precision."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}" if value.denominator != 1 else str(value.numerator)
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    return float(value)


def format_cell(value: Any) -> str:
    """Render a value as a CSV cell."""
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return str(format_number(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def ceil_log2(value: Any) -> int:
    """Smallest integer a with 2**a >= value, for value > 0."""
    exact = Fraction(value)
    if exact <= 0:
        raise ValueError(f"ceil_log2 needs a positive value, got {value}")
    a = exact.numerator.bit_length() - exact.denominator.bit_length()
    while Fraction(2) ** a < exact:
        a += 1
    while Fraction(2) ** (a - 1) >= exact:
        a -= 1
    return a


def floor_log2(value: Any) -> int:
    """Largest integer a with 2**a <= value, for value > 0."""
    exact = Fraction(value)
    a = ceil_log2(exact)
    return a if Fraction(2) ** a == exact else a - 1


def zeros(size: int, exact: bool = False) -> np.ndarray:
    """Zero vector in float64, or object dtype holding Fractions."""
    if exact:
        out = np.empty(size, dtype=object)
        out[:] = [Fraction(0)] * size
        return out
    return np.zeros(size, dtype=float)


def ceil_with_tolerance(value: Number, tol: float = DEFAULT_TOLERANCE) -> int:
    """Ceiling that ignores overshoot below ``tol``."""
    if isinstance(value, Fraction):
        return math.ceil(value)
    return int(math.ceil(float(value) - tol))

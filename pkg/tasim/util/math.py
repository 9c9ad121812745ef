"""Numeric helpers: dB conversion, exact-rational logs, clamping, relative error."""

import math
from fractions import Fraction


def db_to_linear(value_db: float) -> float:
    """Convert dB to linear scale: 10**(value_db/10)."""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """
    Convert a linear quantity to dB.

    Raises:
        ValueError: If value is not positive
    """
    if value <= 0:
        raise ValueError(f"Cannot express non-positive value in dB: {value}")
    return 10.0 * math.log10(value)


def log_abs_fraction(value: Fraction) -> float:
    """
    Natural log of |value| for an exact rational, without float overflow.

    math.log accepts arbitrarily large integers, so numerator and denominator
    are taken separately.

    Raises:
        ValueError: If value is zero
    """
    if value == 0:
        raise ValueError("log of zero")
    return math.log(abs(value.numerator)) - math.log(value.denominator)


def clamp(value: float, min_val: float, max_val: float) -> float:
    """
    Clamp a value to be within [min_val, max_val].

    Raises:
        ValueError: If min_val > max_val
    """
    if min_val > max_val:
        raise ValueError(f"min_val ({min_val}) must be <= max_val ({max_val})")
    return max(min_val, min(value, max_val))


def relative_error(value: float, reference: float) -> float:
    """|value - reference| / |reference|, falling back to absolute error at zero."""
    if reference == 0:
        return abs(value)
    return abs(value - reference) / abs(reference)

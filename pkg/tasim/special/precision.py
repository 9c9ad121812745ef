"""Evaluation of alternating exponential-polynomial series with precision escalation.

Every closed form in this package has the shape

    constant + sum_i coef_i * K(term_i)

where coef_i are exact rationals of alternating sign and K is a positive
kernel (a Bessel-K, U-function or exponential factor) known in log domain.
The sum is tried in double precision first. When the terms cancel by more
than CANCELLATION_LIMIT, or the sum comes out non-positive, it is redone in
an mpmath context with enough digits to absorb the cancellation, and accepted
once two evaluations 15 digits apart agree.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Protocol, Sequence

from tasim.special import functions
from tasim.util.math import log_abs_fraction

logger = logging.getLogger(__name__)

CANCELLATION_LIMIT = 1e7
BASE_DIGITS = 30
GUARD_DIGITS = 15
MAX_DIGITS = 500
AGREEMENT = 1e-12


class NumericalFailureError(Exception):
    """Error raised when a closed form cannot be evaluated reliably."""
    pass


class SeriesTerm(Protocol):
    coef: Fraction
    rate: Fraction
    power: int


class DoubleBackend:
    """Log-domain primitives in double precision."""

    name = "double"

    def number(self, value: float | Fraction) -> float:
        return float(value)

    def log(self, value: float | Fraction) -> float:
        if isinstance(value, Fraction):
            return log_abs_fraction(value)
        return math.log(value)

    def lgamma(self, value: float) -> float:
        return math.lgamma(value)

    def log_bessel_k(self, nu: float, z: float) -> float:
        return functions.log_bessel_k(nu, z)

    def log_hyperu(self, a: float, b: float, z: float) -> float:
        value, sign = functions.log_hyperu(a, b, z)
        if sign < 0:
            raise NumericalFailureError(f"U({a}, {b}, {z}) is negative")
        return value

    def sqrt(self, value: float) -> float:
        return math.sqrt(value)


class MpBackend:
    """The same primitives in an mpmath context."""

    def __init__(self, dps: int):
        self.ctx = functions.mp_context(dps)
        self.name = f"mp{dps}"

    def number(self, value: float | Fraction) -> Any:
        if isinstance(value, Fraction):
            return self.ctx.mpf(value.numerator) / value.denominator
        return self.ctx.mpf(value)

    def log(self, value: float | Fraction) -> Any:
        return self.ctx.log(abs(self.number(value)))

    def lgamma(self, value: float) -> Any:
        return self.ctx.loggamma(self.number(value))

    def log_bessel_k(self, nu: float, z: Any) -> Any:
        return self.ctx.log(self.ctx.besselk(abs(self.number(nu)), z))

    def log_hyperu(self, a: Any, b: Any, z: Any) -> Any:
        return self.ctx.log(self.ctx.hyperu(a, b, z))

    def sqrt(self, value: Any) -> Any:
        return self.ctx.sqrt(value)


Backend = DoubleBackend | MpBackend
Kernel = Callable[[Backend, SeriesTerm], Any]


@dataclass(frozen=True)
class SeriesEvaluation:
    """Value of a series together with how it was obtained."""
    value: float
    precision: str
    terms: int
    cancellation: float


def _double_sum(constant: Fraction, terms: Sequence[SeriesTerm], kernel: Kernel) -> tuple[float, float]:
    backend = DoubleBackend()
    values = [float(constant)] if constant else []
    for term in terms:
        log_value = log_abs_fraction(term.coef) + kernel(backend, term)
        values.append(math.copysign(math.exp(log_value), term.coef))
    total = math.fsum(values)
    scale = max((abs(v) for v in values), default=0.0)
    return total, scale


def _mp_sum(constant: Fraction, terms: Sequence[SeriesTerm], kernel: Kernel, dps: int) -> Any:
    backend = MpBackend(dps)
    ctx = backend.ctx
    values = [backend.number(constant)]
    for term in terms:
        values.append(backend.number(term.coef) * ctx.exp(kernel(backend, term)))
    return ctx.fsum(values)


def evaluate_series(
    constant: Fraction,
    terms: Sequence[SeriesTerm],
    kernel: Kernel,
    label: str = "series",
    abs_tol: float | None = None,
) -> SeriesEvaluation:
    """
    Evaluate constant + sum(coef * exp(kernel(term))) for a positive result.

    Args:
        constant: Exact constant part
        terms: Objects carrying an exact `coef` plus whatever the kernel reads
        kernel: Returns log K(term) using the given backend's primitives
        label: Name used in log messages
        abs_tol: When given, a double-precision result whose rounding error
            bound is below abs_tol is accepted as is (negative values are
            floored at 0) instead of being refined to full relative accuracy

    Returns:
        SeriesEvaluation with the value and the precision that produced it

    Raises:
        NumericalFailureError: If no precision up to MAX_DIGITS gives a
            stable value
    """
    ratio = math.inf
    try:
        total, scale = _double_sum(constant, terms, kernel)
        if abs_tol is not None and math.isfinite(total):
            if scale * (len(terms) + 1) * 2.2e-16 <= abs_tol:
                return SeriesEvaluation(max(total, 0.0), "double", len(terms), math.inf)
        if math.isfinite(total) and total > 0:
            ratio = scale / total
            if ratio <= CANCELLATION_LIMIT:
                return SeriesEvaluation(total, "double", len(terms), ratio)
    except (OverflowError, ValueError, ZeroDivisionError, functions.SpecFunError, NumericalFailureError) as e:
        logger.debug(f"{label}: double precision failed ({e})")

    if math.isfinite(ratio):
        dps = BASE_DIGITS + math.ceil(math.log10(ratio))
    else:
        dps = 2 * BASE_DIGITS
    logger.debug(f"{label}: cancellation ratio {ratio:.3g}, escalating to {dps} digits")

    while dps <= MAX_DIGITS:
        try:
            first = _mp_sum(constant, terms, kernel, dps)
            second = _mp_sum(constant, terms, kernel, dps + GUARD_DIGITS)
        except Exception as e:  # mpmath raises a variety of types on non-convergence
            logger.debug(f"{label}: evaluation at {dps} digits failed ({e})")
        else:
            if second > 0 and abs(first - second) <= AGREEMENT * abs(second):
                value = float(second)
                return SeriesEvaluation(value, f"mp{dps + GUARD_DIGITS}", len(terms), ratio)
            logger.debug(f"{label}: {dps} and {dps + GUARD_DIGITS} digits disagree")
        dps *= 2

    logger.warning(f"{label}: no stable value up to {MAX_DIGITS} digits")
    raise NumericalFailureError(
        f"{label} could not be evaluated reliably (cancellation ratio {ratio:.3g}); "
        "use the quadrature oracle (--method oracle) for this point"
    )

"""Special-function kernel used by every closed-form expression.

Gamma, regularized incomplete gamma, modified Bessel K, Whittaker W and the
Gaussian Q-function. Double-precision values come from scipy.special; the
confluent hypergeometric U (and hence Whittaker W) is evaluated with mpmath in
a private context so concurrent callers never share precision state.
"""

import logging
import math
import threading

import numpy as np
from mpmath.ctx_mp import MPContext
from mpmath.libmp.libhyper import NoConvergence
from scipy import special
from scipy.stats import norm

from tasim.models import SpecFunResult

logger = logging.getLogger(__name__)

INTEGER_ORDER_TOLERANCE = 1e-6
HYPERU_DIGITS = 20

_local = threading.local()


class SpecFunError(Exception):
    """Error raised by special-function evaluation."""
    pass


class PoleError(SpecFunError):
    """Error raised when a Gamma argument hits a pole."""
    pass


class DomainError(SpecFunError):
    """Error raised for arguments outside a function's domain."""
    pass


def mp_context(dps: int) -> MPContext:
    """Thread-local mpmath context set to dps decimal digits."""
    ctx = getattr(_local, "ctx", None)
    if ctx is None:
        ctx = MPContext()
        _local.ctx = ctx
    ctx.dps = dps
    return ctx


def _check_pole(x: float) -> None:
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"Gamma function has a pole at {x}")


def gamma_fn(x: float) -> float:
    """
    Gamma function Γ(x).

    Negative non-integer arguments are accepted (reflection is handled by
    scipy.special.gamma).

    Raises:
        PoleError: If x is zero or a negative integer
    """
    _check_pole(x)
    return float(special.gamma(x))


def log_gamma(x: float) -> float:
    """log|Γ(x)|, safe for large arguments."""
    _check_pole(x)
    return float(special.gammaln(x))


def reg_lower_gamma(a: float, x: float) -> float:
    """
    Regularized lower incomplete gamma P(a, x) = γ(a, x)/Γ(a).

    Raises:
        DomainError: If a <= 0 or x < 0
    """
    if not a > 0 or not x >= 0:
        raise DomainError(f"reg_lower_gamma requires a > 0 and x >= 0, got a={a}, x={x}")
    return float(special.gammainc(a, x))


def reg_upper_gamma(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if not a > 0 or not x >= 0:
        raise DomainError(f"reg_upper_gamma requires a > 0 and x >= 0, got a={a}, x={x}")
    return float(special.gammaincc(a, x))


def _order(nu: float) -> float:
    nu = abs(nu)
    nearest = round(nu)
    if abs(nu - nearest) < INTEGER_ORDER_TOLERANCE:
        return float(nearest)
    return nu


def bessel_k(nu: float, z: float) -> float:
    """
    Modified Bessel function of the second kind K_nu(z) for real nu.

    Orders within 1e-6 of an integer use the integer-order routine. Underflows
    to 0 for large z; use bessel_k_scaled or log_bessel_k there.

    Raises:
        DomainError: If z <= 0
    """
    if not z > 0:
        raise DomainError(f"bessel_k requires z > 0, got {z}")
    nu = _order(nu)
    if nu.is_integer():
        return float(special.kn(int(nu), z))
    return float(special.kv(nu, z))


def bessel_k_scaled(nu: float, z: float) -> float:
    """Exponentially scaled e^z K_nu(z)."""
    if not z > 0:
        raise DomainError(f"bessel_k_scaled requires z > 0, got {z}")
    return float(special.kve(_order(nu), z))


def log_bessel_k(nu: float, z: float) -> float:
    """log K_nu(z) without overflow or underflow."""
    if not z > 0:
        raise DomainError(f"log_bessel_k requires z > 0, got {z}")
    nu = _order(nu)
    scaled = special.kve(nu, z)
    if 0 < scaled < np.inf:
        return math.log(scaled) - z
    # tiny z with a large order overflows in double
    ctx = mp_context(HYPERU_DIGITS)
    return float(ctx.log(ctx.besselk(nu, z)))


def log_hyperu(a: float, b: float, z: float) -> tuple[float, int]:
    """
    log|U(a, b, z)| and its sign for the confluent hypergeometric U.

    Raises:
        DomainError: If z <= 0
        SpecFunError: If mpmath fails to converge
    """
    if not z > 0:
        raise DomainError(f"log_hyperu requires z > 0, got {z}")
    if a == 0:
        return 0.0, 1
    ctx = mp_context(HYPERU_DIGITS)
    try:
        value = ctx.hyperu(a, b, z)
    except NoConvergence as e:
        raise SpecFunError(f"U({a}, {b}, {z}) did not converge: {e}") from e
    if value == 0:
        raise SpecFunError(f"U({a}, {b}, {z}) underflowed to zero")
    return float(ctx.log(abs(value))), 1 if value > 0 else -1


def whittaker_w(a: float, b: float, z: float) -> SpecFunResult:
    """
    Whittaker function W_{a,b}(z) for z > 0.

    Uses W_{a,b}(z) = e^{-z/2} z^{b+1/2} U(b - a + 1/2, 1 + 2b, z) in log
    domain with |b| (W is even in b). The U evaluation is repeated with more
    digits; converged means both passes agree to 1e-12 relative.

    Raises:
        DomainError: If z <= 0
    """
    if not z > 0:
        raise DomainError(f"whittaker_w requires z > 0, got {z}")
    b = abs(b)
    passes = 0
    logs = []
    for digits in (HYPERU_DIGITS, HYPERU_DIGITS + 15):
        passes += 1
        ctx = mp_context(digits)
        try:
            u = ctx.hyperu(b - a + 0.5, 1 + 2 * b, z) if b - a + 0.5 != 0 else ctx.mpf(1)
        except NoConvergence as e:
            logger.debug(f"whittaker_w({a}, {b}, {z}) failed at {digits} digits: {e}")
            return SpecFunResult(math.nan, False, passes, f"U did not converge: {e}")
        if u == 0:
            return SpecFunResult(0.0, False, passes, "U underflowed to zero")
        logs.append((float(-z / 2 + (b + 0.5) * ctx.log(z) + ctx.log(abs(u))), 1 if u > 0 else -1))

    (log_first, sign), (log_second, _) = logs
    value = sign * math.exp(log_second)
    converged = math.isfinite(value) and abs(log_first - log_second) <= 1e-12
    diagnostic = "" if converged else f"passes disagree: {log_first} vs {log_second}"
    return SpecFunResult(value, converged, passes, diagnostic)


def gaussian_q(x):
    """Gaussian Q-function, Q(x) = P(N(0,1) > x), for a scalar or an array."""
    value = norm.sf(x)
    return float(value) if np.ndim(value) == 0 else value

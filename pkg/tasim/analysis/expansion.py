"""Finite-series expansion of the maximum of independent Gamma variates.

For integer shapes the CDF of each shadowing coefficient is
1 - exp(-c x) * sum_{k<m} (c x)^k / k!, with c = m/gamma~. Multiplying out
the product over links gives

    F_max(x) = 1 + sum_{S != {}} sum_k kappa * exp(-B x) * x**A

with kappa = (-1)^|S| * prod_{l in S} c_l^{k_l} / k_l!, B = sum_{l in S} c_l
and A = sum_{l in S} k_l. Links outside S contribute a factor of exactly 1.
All coefficients are kept as exact rationals.
"""

import itertools
import logging
import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional

from tasim.models import ChannelConfig, ExpansionTerm
from tasim.special.precision import evaluate_series

logger = logging.getLogger(__name__)

DEFAULT_TERM_CAP = 1_000_000


class CapacityError(Exception):
    """Error raised when an expansion would exceed the term cap."""
    pass


def link_rates(cfg: ChannelConfig) -> tuple[Fraction, ...]:
    """Exact c_l = m_alpha,l / gamma~_l from the binary value of each mean SNR."""
    return tuple(Fraction(int(m)) / Fraction(g) for m, g in zip(cfg.m_alpha, cfg.mean_snrs))


def term_count(m_alpha: Iterable[int]) -> int:
    """Number of terms with a non-empty subset: prod(m + 1) - 1."""
    return math.prod(int(m) + 1 for m in m_alpha) - 1


@lru_cache(maxsize=256)
def _enumerate(
    L: int,
    shapes: tuple[int, ...],
    rates: tuple[Fraction, ...],
    links: tuple[int, ...],
) -> tuple[ExpansionTerm, ...]:
    terms = []
    for included in itertools.product((0, 1), repeat=len(links)):
        active = [link for link, flag in zip(links, included) if flag]
        if not active:
            continue
        sign = -1 if len(active) % 2 else 1
        B = sum((rates[link] for link in active), Fraction(0))
        n = tuple(1 if link in active else 0 for link in range(L))
        for orders in itertools.product(*(range(shapes[link]) for link in active)):
            kappa = Fraction(sign)
            k = [0] * L
            for link, order in zip(active, orders):
                kappa *= rates[link] ** order / math.factorial(order)
                k[link] = order
            terms.append(ExpansionTerm(n=n, k=tuple(k), kappa=kappa, rate=B, A=sum(orders)))
    return tuple(terms)


def enumerate_terms(
    cfg: ChannelConfig,
    subset: Optional[Iterable[int]] = None,
    cap: int = DEFAULT_TERM_CAP,
) -> list[ExpansionTerm]:
    """
    Enumerate every expansion term with a non-empty link subset.

    Args:
        cfg: Scenario pinned to one SNR point
        subset: 1-based link indices to expand over (default: all L links)
        cap: Maximum number of terms

    Returns:
        Terms in enumeration order; n and k vectors have length L with zeros
        for links outside the subset

    Raises:
        CapacityError: If the term count exceeds cap
    """
    links = tuple(range(cfg.L)) if subset is None else tuple(sorted(i - 1 for i in subset))
    shapes = cfg.shadow_shapes
    count = term_count(shapes[i] for i in links)
    if count > cap:
        raise CapacityError(
            f"Expansion needs {count} terms (cap {cap}); reduce L or the shadowing shapes m_alpha"
        )
    terms = _enumerate(cfg.L, shapes, link_rates(cfg), links)
    logger.debug(f"Enumerated {len(terms)} expansion terms over links {[i + 1 for i in links]}")
    return list(terms)


def merge_terms(terms: Iterable[ExpansionTerm]) -> list[tuple[Fraction, Fraction, int]]:
    """
    Combine terms sharing (B, A) by exact summation of kappa.

    Returns:
        (kappa, B, A) triples sorted by (B, A), zero coefficients dropped
    """
    merged: dict[tuple[Fraction, int], Fraction] = {}
    for term in terms:
        key = (term.rate, term.A)
        merged[key] = merged.get(key, Fraction(0)) + term.kappa
    return [(kappa, rate, A) for (rate, A), kappa in sorted(merged.items()) if kappa != 0]


class _ExpPoly:
    """coef * exp(-rate x) * x**power."""

    __slots__ = ("coef", "rate", "power")

    def __init__(self, coef: Fraction, rate: Fraction, power: int):
        self.coef = coef
        self.rate = rate
        self.power = power


def _exp_poly_kernel(x: float):
    def kernel(backend, term):
        value = -backend.number(term.rate) * backend.number(x)
        if term.power:
            value += term.power * backend.log(backend.number(x))
        return value
    return kernel


def cdf_alpha_max(cfg: ChannelConfig, x: float) -> float:
    """
    CDF of the largest shadowing coefficient, 1 + sum kappa e^{-Bx} x^A.

    Args:
        cfg: Scenario pinned to one SNR point
        x: SNR value >= 0

    Returns:
        Probability in [0, 1]
    """
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return 0.0
    series = [_ExpPoly(kappa, rate, A) for kappa, rate, A in merge_terms(enumerate_terms(cfg))]
    result = evaluate_series(Fraction(1), series, _exp_poly_kernel(x), label="cdf_alpha_max", abs_tol=1e-12)
    return min(result.value, 1.0)


def pdf_alpha_max(cfg: ChannelConfig, x: float) -> float:
    """
    Density of the largest shadowing coefficient, sum kappa e^{-Bx} x^{A-1}(A - Bx).

    Args:
        cfg: Scenario pinned to one SNR point
        x: SNR value > 0
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    series = []
    for kappa, rate, A in merge_terms(enumerate_terms(cfg)):
        if A:
            series.append(_ExpPoly(kappa * A, rate, A - 1))
        series.append(_ExpPoly(-kappa * rate, rate, A))
    return evaluate_series(Fraction(0), series, _exp_poly_kernel(x), label="pdf_alpha_max", abs_tol=1e-12).value


def selection_probabilities_exact(cfg: ChannelConfig) -> list[Fraction]:
    """
    Exact probability that each antenna carries the largest shadowing coefficient.

    P_r = c^m/Γ(m) * sum over subsets of the other links (empty one included)
    of kappa Γ(A + m)/(B + c)^{A + m}, with c = m_alpha,r/gamma~_r.
    """
    if cfg.L == 1:
        return [Fraction(1)]
    rates = link_rates(cfg)
    probabilities = []
    for r in range(cfg.L):
        m = cfg.shadow_shapes[r]
        c = rates[r]
        others = [i + 1 for i in range(cfg.L) if i != r]
        total = Fraction(math.factorial(m - 1)) / c ** m  # empty subset
        for term in enumerate_terms(cfg, others):
            total += term.kappa * math.factorial(term.A + m - 1) / (term.rate + c) ** (term.A + m)
        probabilities.append(c ** m / math.factorial(m - 1) * total)
    return probabilities


def selection_probabilities(cfg: ChannelConfig) -> list[float]:
    """
    Probability that each antenna is selected under shadowing-based selection.

    Returns:
        List of length L summing to 1
    """
    return [float(p) for p in selection_probabilities_exact(cfg)]

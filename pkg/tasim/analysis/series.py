"""Shadowing laws seen by each candidate antenna, as exponential-polynomial series.

Every closed form integrates a fading kernel against a shadowing law of the
form

    H(v) = constant + sum_i coef_i * exp(-rate_i v) * v**power_i,   H(0) = 0

with a matching branch weight. Two selection models produce such laws:

- INDEPENDENT: every branch r sees the distribution of the largest shadowing
  coefficient, F_max, weighted by its selection probability P_r.
- JOINT: branch r sees the exact conditional law of alpha_r given that r was
  selected, G_r(v)/P_r with G_r(v) = P(alpha_r <= v, r selected).

Both models agree when the shadowing is identically distributed.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

from tasim.analysis import expansion
from tasim.models import ChannelConfig, SelectionModel
from tasim.special.precision import NumericalFailureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShadowTerm:
    """coef * exp(-rate v) * v**power with an exact coefficient and rate."""
    coef: Fraction
    rate: Fraction
    power: int


@dataclass(frozen=True)
class ShadowSeries:
    """A CDF-like law H(v) = constant + sum of ShadowTerms."""
    constant: Fraction
    terms: tuple[ShadowTerm, ...]

    def __len__(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class Branch:
    """One candidate antenna: its weight, fading shape and shadowing law."""
    r: int  # 1-based antenna index
    m_beta: float
    weight: Fraction
    series: ShadowSeries


def _merged(pieces: dict[tuple[Fraction, int], Fraction]) -> tuple[ShadowTerm, ...]:
    return tuple(
        ShadowTerm(coef, rate, power)
        for (rate, power), coef in sorted(pieces.items())
        if coef != 0
    )


def max_series(cfg: ChannelConfig) -> ShadowSeries:
    """F_max(v) = 1 + sum kappa e^{-Bv} v^A over all non-empty subsets."""
    terms = expansion.merge_terms(expansion.enumerate_terms(cfg))
    return ShadowSeries(Fraction(1), tuple(ShadowTerm(kappa, rate, A) for kappa, rate, A in terms))


def joint_series(cfg: ChannelConfig, r: int) -> tuple[Fraction, ShadowSeries]:
    """
    Selection probability of antenna r and the law of alpha_r given r selected.

    With c = m_alpha,r/gamma~_r and the expansion terms t of the other links
    (the empty subset included):

        G_r(v) = P_r - sum_t sum_{j < n_t} w_t C_t^j e^{-C_t v} v^j / j!

    where C_t = B_t + c, n_t = m_alpha,r + A_t and
    w_t = kappa_t c^m Γ(n_t) / (Γ(m) C_t^{n_t}). The returned series is G_r/P_r.

    Args:
        cfg: Scenario pinned to one SNR point
        r: 1-based antenna index

    Returns:
        (P_r, normalized series)
    """
    if not 1 <= r <= cfg.L:
        raise ValueError(f"Antenna index {r} out of range 1..{cfg.L}")
    m = cfg.shadow_shapes[r - 1]
    c = expansion.link_rates(cfg)[r - 1]
    others = [i + 1 for i in range(cfg.L) if i != r - 1]
    subset_terms = [(Fraction(1), Fraction(0), 0)]  # empty subset
    if others:
        subset_terms += [(t.kappa, t.rate, t.A) for t in expansion.enumerate_terms(cfg, others)]

    head = c ** m / math.factorial(m - 1)
    pieces: dict[tuple[Fraction, int], Fraction] = {}
    total = Fraction(0)
    for kappa, B, A in subset_terms:
        C = B + c
        n = m + A
        w = kappa * head * math.factorial(n - 1) / C ** n
        total += w
        for j in range(n):
            key = (C, j)
            pieces[key] = pieces.get(key, Fraction(0)) - w * C ** j / math.factorial(j)

    if total <= 0:
        raise NumericalFailureError(f"Selection probability of antenna {r} is not positive ({float(total)})")
    normalized = {key: coef / total for key, coef in pieces.items()}
    return total, ShadowSeries(Fraction(1), _merged(normalized))


def branches(cfg: ChannelConfig, selection: SelectionModel = SelectionModel.INDEPENDENT) -> list[Branch]:
    """
    Per-antenna weights and shadowing laws under the given selection model.

    Args:
        cfg: Scenario pinned to one SNR point
        selection: INDEPENDENT (product form) or JOINT (exact joint law)

    Returns:
        One Branch per antenna, weights summing to 1
    """
    selection = SelectionModel(selection)
    if selection == SelectionModel.INDEPENDENT or cfg.L == 1:
        weights = expansion.selection_probabilities_exact(cfg)
        shared = max_series(cfg)
        result = [
            Branch(r + 1, float(cfg.m_beta[r]), weights[r], shared)
            for r in range(cfg.L)
        ]
    else:
        result = []
        for r in range(1, cfg.L + 1):
            weight, series = joint_series(cfg, r)
            result.append(Branch(r, float(cfg.m_beta[r - 1]), weight, series))

    logger.debug(
        f"{selection.value} branches: weights={[round(float(b.weight), 6) for b in result]}, "
        f"terms={[len(b.series) for b in result]}"
    )
    return result

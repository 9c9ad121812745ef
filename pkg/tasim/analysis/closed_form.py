"""Exact closed-form performance metrics of shadowing-based antenna selection.

Each metric is a weighted sum over candidate antennas of a fading kernel
integrated against that antenna's shadowing law (see series.py). For a
shadowing term e^{-Bv} v^A and fading shape m:

- CDF:    (2/Γ(m)) (xm)^{(m+A)/2} B^{(m-A)/2} K_{m-A}(2 sqrt(Bmx))
- MGF:    Γ(A+1) m B^{-A} mu^m U(m+1, m+1-A, mu),                mu = Bm/s
- SEP:    Γ(A+1/2)Γ(m+1/2)/(sqrt(pi) Γ(m)) xi^m B^{-A} U(m+1/2, m+1-A, xi),
          xi = Bm/b
- moment: -p Γ(p+A)/B^{p+A}, times E[beta^p] = Γ(m+p)/(Γ(m) m^p)

U(a, b, z) is the confluent hypergeometric function of the second kind; the
MGF kernel is the Whittaker-W form rewritten through
W_{k,mu}(z) = e^{-z/2} z^{mu+1/2} U(mu-k+1/2, 1+2mu, z).
"""

import logging
import math
from fractions import Fraction
from typing import Optional

from tasim.analysis import series as shadow
from tasim.analysis.series import Branch
from tasim.models import ChannelConfig, MetricResult, Method, Modulation, SelectionModel
from tasim.special.functions import DomainError
from tasim.special.precision import NumericalFailureError, SeriesEvaluation, evaluate_series
from tasim.util.math import clamp, log_abs_fraction

logger = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-9
FAILURE_TOLERANCE = 1e-6
PRINTED_MOMENT_TOLERANCE = 1e-6


def _cdf_kernel(m: float, x: float):
    def kernel(backend, term):
        m_ = backend.number(m)
        xm = backend.number(x) * m_
        B = backend.number(term.rate)
        A = term.power
        return (
            backend.log(2) - backend.lgamma(m_)
            + (m_ + A) / 2 * backend.log(xm)
            + (m_ - A) / 2 * backend.log(B)
            + backend.log_bessel_k(m_ - A, 2 * backend.sqrt(B * xm))
        )
    return kernel


def _mgf_kernel(m: float, s: float):
    # the Whittaker W term through W_{a,b}(z) = e^{-z/2} z^{b+1/2} U(b - a + 1/2, 1 + 2b, z),
    # with e^{-z/2} z^{b+1/2} folded into the prefactor
    def kernel(backend, term):
        m_ = backend.number(m)
        B = backend.number(term.rate)
        A = term.power
        mu = B * m_ / backend.number(s)
        return (
            backend.lgamma(A + 1) + backend.log(m_) + m_ * backend.log(mu) - A * backend.log(B)
            + backend.log_hyperu(m_ + 1, m_ + 1 - A, mu)
        )
    return kernel


def _sep_kernel(m: float, b: float):
    # same Whittaker-to-U identity as the MGF kernel
    def kernel(backend, term):
        m_ = backend.number(m)
        B = backend.number(term.rate)
        A = term.power
        xi = B * m_ / backend.number(b)
        half = backend.number(0.5)
        return (
            backend.lgamma(A + half) + backend.lgamma(m_ + half) - backend.lgamma(m_) - backend.lgamma(half)
            + m_ * backend.log(xi) - A * backend.log(B)
            + backend.log_hyperu(m_ + half, m_ + 1 - A, xi)
        )
    return kernel


def _evaluate(branch: Branch, kernel, label: str) -> SeriesEvaluation:
    return evaluate_series(branch.series.constant, branch.series.terms, kernel, label=f"{label}[r={branch.r}]")


def _bounded(value: float, label: str, upper: float = 1.0) -> float:
    """Clamp a probability-like value that may overshoot its bounds by rounding."""
    if -CLAMP_TOLERANCE <= value <= upper + CLAMP_TOLERANCE:
        return clamp(value, 0.0, upper)
    if -FAILURE_TOLERANCE <= value <= upper + FAILURE_TOLERANCE:
        logger.debug(f"{label}: clamping {value!r} into [0, {upper}]")
        return clamp(value, 0.0, upper)
    raise NumericalFailureError(
        f"{label} evaluated to {value!r}, outside [0, {upper}]; "
        "use the quadrature oracle (--method oracle) for this point"
    )


def _digits(precision: str) -> int:
    return int(precision[2:]) if precision.startswith("mp") else 0


def _meta(evaluations: list[SeriesEvaluation], selection: SelectionModel, **extra) -> dict:
    precisions = sorted({e.precision for e in evaluations}, key=_digits)
    meta = {
        "terms": sum(e.terms for e in evaluations),
        "precision": precisions[-1] if precisions else "double",
        "selection": SelectionModel(selection).value,
    }
    meta.update(extra)
    return meta


def cdf_conditional(
    cfg: ChannelConfig,
    r: int,
    x: float,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> MetricResult:
    """
    CDF of the received SNR when antenna r transmits.

    Args:
        cfg: Scenario pinned to one SNR point
        r: 1-based antenna index
        x: SNR threshold >= 0 (linear)
        selection: Shadowing law used for the selected antenna

    Returns:
        MetricResult with a probability in [0, 1]

    Raises:
        NumericalFailureError: If the series cannot be evaluated reliably
    """
    if not 1 <= r <= cfg.L:
        raise ValueError(f"Antenna index {r} out of range 1..{cfg.L}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    if x == 0:
        return MetricResult(0.0, Method.CLOSED, {"terms": 0, "precision": "exact"})

    branch = shadow.branches(cfg, selection)[r - 1]
    evaluation = _evaluate(branch, _cdf_kernel(branch.m_beta, x), "cdf")
    value = _bounded(evaluation.value, f"cdf_conditional(r={r}, x={x})")
    return MetricResult(value, Method.CLOSED, _meta([evaluation], selection))


def outage(
    cfg: ChannelConfig,
    gamma_th: float,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> MetricResult:
    """
    Outage probability P(gamma_end < gamma_th), averaged over the selected antenna.

    Args:
        cfg: Scenario pinned to one SNR point
        gamma_th: Threshold SNR >= 0 (linear)
        selection: Shadowing law used for the selected antenna
    """
    if gamma_th < 0:
        raise ValueError(f"gamma_th must be non-negative, got {gamma_th}")
    if gamma_th == 0:
        return MetricResult(0.0, Method.CLOSED, {"terms": 0, "precision": "exact"})

    evaluations = []
    total = 0.0
    for branch in shadow.branches(cfg, selection):
        evaluation = _evaluate(branch, _cdf_kernel(branch.m_beta, gamma_th), "outage")
        evaluations.append(evaluation)
        total += float(branch.weight) * evaluation.value
    value = _bounded(total, f"outage(gamma_th={gamma_th})")
    logger.debug(f"outage at {gamma_th}: {value:.6e} ({evaluations[-1].precision})")
    return MetricResult(value, Method.CLOSED, _meta(evaluations, selection))


def _alpha_moment(branch: Branch, p: int) -> Fraction:
    """Exact E[alpha^p] under the branch's shadowing law."""
    total = Fraction(0)
    for term in branch.series.terms:
        total -= term.coef * math.factorial(p + term.power - 1) / term.rate ** (p + term.power)
    return p * total


def _log_beta_moment(m: float, p: int) -> float:
    return math.lgamma(m + p) - math.lgamma(m) - p * math.log(m)


def printed_moment(cfg: ChannelConfig, p: int) -> float:
    """
    The moment expression in its typeset form.

    Kept as a cross-check only: it groups the Gamma arguments and the radical
    differently from E[alpha_max^p] E[beta^p] and does not reproduce the
    single-branch exponential moments.
    """
    branches = shadow.branches(cfg, SelectionModel.INDEPENDENT)
    values = []
    for branch in branches:
        m = branch.m_beta
        for term in branch.series.terms:
            A = term.power
            B = float(term.rate)
            log_value = (
                math.log(float(branch.weight))
                + math.lgamma(p + m + A / 2) + math.lgamma(p + A + m / 2) - math.lgamma(m)
                - 0.5 * ((A + m + 2 * p) * math.log(m) + (2 * A + m + 2 * p) * math.log(B))
                + log_abs_fraction(term.coef)
            )
            values.append(math.copysign(math.exp(log_value), term.coef))
    return -p * math.fsum(values)


def moment(
    cfg: ChannelConfig,
    p: int,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> MetricResult:
    """
    p-th moment of the received SNR, E[gamma_end^p].

    The value is sum_r P_r E[alpha^p] E[beta_r^p], with the shadowing part an
    exact rational. Under the independent model the typeset expression is
    evaluated alongside and any disagreement is logged.

    Args:
        cfg: Scenario pinned to one SNR point
        p: Positive integer order

    Raises:
        DomainError: If p is not a positive integer
    """
    if isinstance(p, bool) or not float(p).is_integer() or p < 1:
        raise DomainError(f"Moment order must be a positive integer, got {p}")
    p = int(p)

    values = []
    branches = shadow.branches(cfg, selection)
    for branch in branches:
        alpha = _alpha_moment(branch, p)
        values.append(float(branch.weight * alpha) * math.exp(_log_beta_moment(branch.m_beta, p)))
    value = math.fsum(values)
    meta = {"terms": sum(len(b.series) for b in branches), "precision": "exact", "selection": SelectionModel(selection).value}

    if SelectionModel(selection) == SelectionModel.INDEPENDENT:
        printed = printed_moment(cfg, p)
        meta["printed"] = printed
        if not abs(printed - value) <= PRINTED_MOMENT_TOLERANCE * abs(value):
            logger.warning(
                f"Typeset moment expression gives {printed:.10g} for p={p}, "
                f"factorized value is {value:.10g}; using the factorized value"
            )
    return MetricResult(value, Method.CLOSED, meta)


def amount_of_fading(cfg: ChannelConfig, selection: SelectionModel = SelectionModel.INDEPENDENT) -> MetricResult:
    """AF = (E[gamma^2] - E[gamma]^2) / E[gamma]^2."""
    first = moment(cfg, 1, selection).value
    second = moment(cfg, 2, selection).value
    value = (second - first ** 2) / first ** 2
    return MetricResult(value, Method.CLOSED, {"moments": (first, second), "selection": SelectionModel(selection).value})


def mgf(
    cfg: ChannelConfig,
    s: float,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> MetricResult:
    """
    Moment generating function M(s) = E[exp(-s gamma_end)] for s >= 0.

    Args:
        cfg: Scenario pinned to one SNR point
        s: Laplace variable >= 0; M(0) = 1
    """
    if s < 0:
        raise ValueError(f"s must be non-negative, got {s}")
    if s == 0:
        return MetricResult(1.0, Method.CLOSED, {"terms": 0, "precision": "exact"})

    evaluations = []
    total = 0.0
    for branch in shadow.branches(cfg, selection):
        evaluation = _evaluate(branch, _mgf_kernel(branch.m_beta, s), "mgf")
        evaluations.append(evaluation)
        total += float(branch.weight) * evaluation.value
    value = _bounded(total, f"mgf(s={s})")
    return MetricResult(value, Method.CLOSED, _meta(evaluations, selection))


def sep(
    cfg: ChannelConfig,
    mod: Optional[Modulation] = None,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> MetricResult:
    """
    Average symbol error probability E[a Q(sqrt(2 b gamma_end))].

    Args:
        cfg: Scenario pinned to one SNR point
        mod: Modulation (defaults to the scenario's)
        selection: Shadowing law used for the selected antenna

    Returns:
        MetricResult in (0, a/2]; meta["approximate"] is set for M-PSK/M-QAM
    """
    mod = mod or cfg.modulation
    if mod is None:
        raise ValueError("No modulation given and the scenario defines none")
    errors = mod.validate()
    if errors:
        raise ValueError("; ".join(errors))

    evaluations = []
    total = 0.0
    for branch in shadow.branches(cfg, selection):
        evaluation = _evaluate(branch, _sep_kernel(branch.m_beta, mod.b), "sep")
        evaluations.append(evaluation)
        total += float(branch.weight) * evaluation.value
    half_a = mod.a / 2
    value = half_a * _bounded(total, f"sep({mod.label})")
    return MetricResult(
        value,
        Method.CLOSED,
        _meta(evaluations, selection, modulation=mod.label, approximate=mod.approximate),
    )

"""Quadrature oracles: the defining integrals, evaluated numerically.

Nothing here touches the finite-series expansion. The shadowing laws are
built from regularized incomplete gammas and Gamma densities only:

    F_max(u) = prod_l P(m_l, u m_l / gamma~_l)
    f_max(u) = sum_j f_j(u) prod_{l != j} F_l(u)
    g_r(u)   = f_r(u) prod_{l != r} F_l(u)      (alpha_r = u and r selected)

Semi-infinite integrals are mapped with u = scale * t/(1 - t) and split at
t = 1/2, each half getting half of the tolerance. Tolerances are relative,
with an absolute floor of tol * ABSOLUTE_FLOOR.
"""

import logging
import math
from typing import Callable, Optional

from scipy import integrate

from tasim.models import ChannelConfig, Modulation, QuadratureReport, SelectionModel
from tasim.special import functions

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
ABSOLUTE_FLOOR = 1e-8
SUBDIVISION_LIMIT = 200


class OracleError(Exception):
    """Error raised for invalid oracle requests."""
    pass


def shadow_cdf(cfg: ChannelConfig, ell: int, u: float) -> float:
    """CDF of alpha_ell (0-based ell) at u."""
    m = cfg.shadow_shapes[ell]
    return functions.reg_lower_gamma(m, u * m / cfg.mean_snrs[ell]) if u > 0 else 0.0


def shadow_pdf(cfg: ChannelConfig, ell: int, u: float) -> float:
    """Density of alpha_ell ~ Gamma(m, gamma~/m) (0-based ell) at u > 0."""
    if not u > 0:
        return 0.0
    m = cfg.shadow_shapes[ell]
    c = m / cfg.mean_snrs[ell]
    return math.exp(m * math.log(c) + (m - 1) * math.log(u) - c * u - functions.log_gamma(m))


def product_cdf(cfg: ChannelConfig, u: float, exclude: Optional[int] = None) -> float:
    """prod_l F_l(u), optionally leaving out link `exclude` (0-based)."""
    return math.prod(shadow_cdf(cfg, ell, u) for ell in range(cfg.L) if ell != exclude)


def order_statistics_pdf(cfg: ChannelConfig, u: float) -> float:
    """Density of the largest shadowing coefficient, sum_j f_j prod_{l != j} F_l."""
    return math.fsum(shadow_pdf(cfg, j, u) * product_cdf(cfg, u, exclude=j) for j in range(cfg.L))


def selected_subdensity(cfg: ChannelConfig, r: int, u: float) -> float:
    """Joint density of alpha_r = u and antenna r (0-based) being selected."""
    return shadow_pdf(cfg, r, u) * product_cdf(cfg, u, exclude=r)


def _half(f: Callable[[float], float], scale: float, a: float, b: float, tol: float):
    def mapped(t: float) -> float:
        if t >= 1.0:
            return 0.0
        return f(scale * t / (1.0 - t)) * scale / (1.0 - t) ** 2

    result = integrate.quad(
        mapped, a, b,
        epsabs=tol * ABSOLUTE_FLOOR / 2, epsrel=tol / 2,
        limit=SUBDIVISION_LIMIT, full_output=1,
    )
    value, error, info = result[0], result[1], result[2]
    warned = len(result) > 3
    if warned:
        logger.debug(f"quad on t in [{a}, {b}] reported: {result[3]}")
    return value, error, info["last"], warned


def integrate_semi_infinite(f: Callable[[float], float], scale: float, tol: float = DEFAULT_TOL) -> QuadratureReport:
    """
    Integral of f over (0, inf) by adaptive Gauss-Kronrod on the mapped interval.

    Args:
        f: Integrand on (0, inf)
        scale: Where the mass of f sits; the mapping puts u = scale at t = 1/2
        tol: Relative tolerance

    Returns:
        QuadratureReport; converged when neither half warned and the error
        estimate is within tol * max(|value|, ABSOLUTE_FLOOR)
    """
    if not tol >= 1e-12:
        raise OracleError(f"Tolerance must be >= 1e-12, got {tol}")
    if not scale > 0:
        raise OracleError(f"Mapping scale must be positive, got {scale}")
    lower = _half(f, scale, 0.0, 0.5, tol)
    upper = _half(f, scale, 0.5, 1.0, tol)
    value = lower[0] + upper[0]
    error = lower[1] + upper[1]
    converged = not (lower[3] or upper[3]) and error <= tol * max(abs(value), ABSOLUTE_FLOOR)
    return QuadratureReport(value, error, lower[2] + upper[2], converged)


def _combine(weights: list[float], reports: list[QuadratureReport]) -> QuadratureReport:
    return QuadratureReport(
        value=math.fsum(w * r.value for w, r in zip(weights, reports)),
        abs_err_est=math.fsum(abs(w) * r.abs_err_est for w, r in zip(weights, reports)),
        subdivisions=sum(r.subdivisions for r in reports),
        converged=all(r.converged for r in reports),
    )


def _shadow_scale(cfg: ChannelConfig) -> float:
    return max(cfg.mean_snrs)


def _fading_cdf(m_beta: float, x: float, u: float) -> float:
    # P(beta < x/u) for beta ~ Gamma(m, 1/m)
    return functions.reg_lower_gamma(m_beta, x * m_beta / u)


def quad_selection_probability(cfg: ChannelConfig, r: int, tol: float = DEFAULT_TOL) -> QuadratureReport:
    """
    P_r as the integral of prod_{l != r} F_l(x) f_r(x).

    Args:
        cfg: Scenario pinned to one SNR point
        r: 1-based antenna index
    """
    if not 1 <= r <= cfg.L:
        raise OracleError(f"Antenna index {r} out of range 1..{cfg.L}")
    scale = cfg.mean_snrs[r - 1]
    return integrate_semi_infinite(lambda u: selected_subdensity(cfg, r - 1, u), scale, tol)


def quad_cdf_conditional(
    cfg: ChannelConfig,
    r: int,
    x: float,
    tol: float = DEFAULT_TOL,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> QuadratureReport:
    """
    CDF of the received SNR on antenna r: integral of P(m_beta, x m_beta/u) over the shadowing law.

    Under the joint model the shadowing law is g_r(u)/P_r.
    """
    if not 1 <= r <= cfg.L:
        raise OracleError(f"Antenna index {r} out of range 1..{cfg.L}")
    if x < 0:
        raise OracleError(f"x must be non-negative, got {x}")
    if x == 0:
        return QuadratureReport(0.0, 0.0, 0, True)

    m_beta = float(cfg.m_beta[r - 1])
    scale = _shadow_scale(cfg)
    if SelectionModel(selection) == SelectionModel.INDEPENDENT:
        return integrate_semi_infinite(
            lambda u: _fading_cdf(m_beta, x, u) * order_statistics_pdf(cfg, u), scale, tol
        )

    weight = quad_selection_probability(cfg, r, tol / 10)
    joint = integrate_semi_infinite(
        lambda u: _fading_cdf(m_beta, x, u) * selected_subdensity(cfg, r - 1, u), scale, tol / 2
    )
    return QuadratureReport(
        joint.value / weight.value,
        joint.abs_err_est / weight.value + joint.value * weight.abs_err_est / weight.value ** 2,
        joint.subdivisions + weight.subdivisions,
        joint.converged and weight.converged,
    )


def _outage_integrand(cfg: ChannelConfig, selection: SelectionModel, tol: float):
    """u -> sum_r w_r P(m_r, x m_r/u) h_r(u), returned as a function of x."""
    m_beta = [float(m) for m in cfg.m_beta]
    if SelectionModel(selection) == SelectionModel.INDEPENDENT:
        weights = [quad_selection_probability(cfg, r, tol).value for r in range(1, cfg.L + 1)]

        def integrand(x: float, u: float) -> float:
            fading = math.fsum(w * _fading_cdf(m, x, u) for w, m in zip(weights, m_beta))
            return fading * order_statistics_pdf(cfg, u)
    else:
        def integrand(x: float, u: float) -> float:
            return math.fsum(
                _fading_cdf(m_beta[r], x, u) * selected_subdensity(cfg, r, u) for r in range(cfg.L)
            )
    return integrand


def quad_outage(
    cfg: ChannelConfig,
    gamma_th: float,
    tol: float = DEFAULT_TOL,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> QuadratureReport:
    """Unconditional outage probability as a single integral over the shadowing."""
    if gamma_th < 0:
        raise OracleError(f"gamma_th must be non-negative, got {gamma_th}")
    if gamma_th == 0:
        return QuadratureReport(0.0, 0.0, 0, True)
    integrand = _outage_integrand(cfg, selection, tol / 10)
    return integrate_semi_infinite(lambda u: integrand(gamma_th, u), _shadow_scale(cfg), tol)


def _nested(cfg: ChannelConfig, selection: SelectionModel, tol: float):
    """F_gamma_end(x) by inner quadrature, tracking the inner reports."""
    integrand = _outage_integrand(cfg, selection, tol / 10)
    scale = _shadow_scale(cfg)
    inner: list[QuadratureReport] = []

    def cdf(x: float) -> float:
        if x <= 0:
            return 0.0
        report = integrate_semi_infinite(lambda u: integrand(x, u), scale, tol / 10)
        inner.append(report)
        return report.value
    return cdf, inner


def quad_mgf(
    cfg: ChannelConfig,
    s: float,
    tol: float = DEFAULT_TOL,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> QuadratureReport:
    """M(s) = s * integral of e^{-sx} F(x), with F itself from quadrature."""
    if not s > 0:
        raise OracleError(f"s must be positive, got {s}")
    cdf, inner = _nested(cfg, selection, tol)
    outer = integrate_semi_infinite(lambda x: s * math.exp(-s * x) * cdf(x), 1.0 / s, tol)
    return _with_inner(outer, inner)


def quad_sep(
    cfg: ChannelConfig,
    mod: Modulation,
    tol: float = DEFAULT_TOL,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> QuadratureReport:
    """
    SEP = (a sqrt(b)/sqrt(pi)) * integral of e^{-b t^2} F(t^2) dt.

    This is the x^{-1/2}-weighted form after x = t^2.
    """
    a, b = mod.a, mod.b
    cdf, inner = _nested(cfg, selection, tol)
    factor = a * math.sqrt(b) / math.sqrt(math.pi)
    outer = integrate_semi_infinite(lambda t: factor * math.exp(-b * t * t) * cdf(t * t), 1.0 / math.sqrt(b), tol)
    return _with_inner(outer, inner)


def _with_inner(outer: QuadratureReport, inner: list[QuadratureReport]) -> QuadratureReport:
    converged = outer.converged and all(r.converged for r in inner)
    if not converged:
        logger.debug(f"nested quadrature: {sum(not r.converged for r in inner)} inner integral(s) did not converge")
    return QuadratureReport(
        outer.value,
        outer.abs_err_est,
        outer.subdivisions + sum(r.subdivisions for r in inner),
        converged,
    )


def moment_factorized(
    cfg: ChannelConfig,
    p: int,
    tol: float = DEFAULT_TOL,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> QuadratureReport:
    """
    E[gamma^p] = sum_r P_r E[alpha^p] Γ(m_r + p)/(Γ(m_r) m_r^p).

    The shadowing moments come from quadrature over f_max (independent) or
    over each g_r (joint, which already carries P_r).
    """
    if isinstance(p, bool) or not float(p).is_integer() or p < 1:
        raise OracleError(f"Moment order must be a positive integer, got {p}")
    p = int(p)
    scale = _shadow_scale(cfg)
    beta_moments = [
        math.exp(functions.log_gamma(m + p) - functions.log_gamma(m) - p * math.log(m)) for m in cfg.m_beta
    ]

    if SelectionModel(selection) == SelectionModel.INDEPENDENT:
        alpha = integrate_semi_infinite(lambda u: u ** p * order_statistics_pdf(cfg, u), scale, tol)
        weights = [quad_selection_probability(cfg, r, tol).value for r in range(1, cfg.L + 1)]
        return _combine([math.fsum(w * b for w, b in zip(weights, beta_moments))], [alpha])

    reports = [
        integrate_semi_infinite(lambda u, r=r: u ** p * selected_subdensity(cfg, r, u), scale, tol)
        for r in range(cfg.L)
    ]
    return _combine(beta_moments, reports)

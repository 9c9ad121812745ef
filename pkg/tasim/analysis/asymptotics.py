"""High-SNR behaviour: diversity order, the coefficient zeta, array gain.

At high SNR the outage probability and the SEP follow power laws

    P_out ~ (zeta/d) (gamma_th/gamma_bar)^d
    P_s   ~ 2^{d-1} a zeta Γ(d+1/2) / (d sqrt(pi)) (2 b gamma_bar)^{-d}

with d = min(sum m_alpha, min m_beta). Which factor limits the slope decides
the regime and the form of zeta.
"""

import logging
import math
import warnings
from typing import Optional

from scipy import integrate

from tasim.analysis.expansion import selection_probabilities_exact
from tasim.models import (
    AsymptoticConfig,
    AsymptoticProfile,
    ChannelConfig,
    MetricResult,
    Method,
    Modulation,
    Regime,
    ZetaForm,
)
from tasim.special import functions
from tasim.special.functions import PoleError

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
SHAPE_TIE_TOLERANCE = 1e-12
EXP_ARGUMENT_LIMIT = 700.0


class AsymptoticError(Exception):
    """Error raised when an asymptotic quantity is undefined for a scenario."""
    pass


def diversity_order(cfg: ChannelConfig) -> float:
    """G_d = min(sum_l m_alpha,l, min_r m_beta,r)."""
    return float(min(sum(cfg.shadow_shapes), min(cfg.m_beta)))


def _regime(delta: float) -> Regime:
    if delta > 0:
        return Regime.ALPHA_DOMINANT
    if delta < 0:
        return Regime.BETA_DOMINANT
    return Regime.BALANCED


def _resolve(cfg: ChannelConfig, asym: Optional[AsymptoticConfig]) -> AsymptoticConfig:
    asym = asym or AsymptoticConfig.default_for(cfg)
    errors = asym.validate(cfg)
    if errors:
        raise AsymptoticError("; ".join(errors))
    return asym


def _inverse_moment(shapes: tuple[int, ...], kappa: tuple[float, ...], q: float) -> float:
    """
    E[(alpha_max/gamma_bar)^{-q}] for q < sum(shapes).

    alpha_l/gamma_bar is Gamma(m_l, 1/(m_l kappa_l)), so with t = log y the
    expectation is q * integral of y^{-q} prod P(m_l, y m_l kappa_l) dt.
    The integrand is formed in logs; QUADPACK's infinite-interval mapping
    samples |t| far beyond the range of exp.
    """
    def integrand(t: float) -> float:
        if t > EXP_ARGUMENT_LIMIT:
            # every P(m, .) is 1 out here
            return math.exp(-q * t)
        y = math.exp(t)
        value = math.prod(functions.reg_lower_gamma(m, y * m * k) for m, k in zip(shapes, kappa))
        if not value > 0:
            return 0.0
        return math.exp(math.log(value) - q * t)

    split = -math.log(max(m * k for m, k in zip(shapes, kappa)))
    lower, lower_err = integrate.quad(integrand, -math.inf, split, limit=200, epsabs=0.0, epsrel=1e-11)
    upper, upper_err = integrate.quad(integrand, split, math.inf, limit=200, epsabs=0.0, epsrel=1e-11)
    logger.debug(f"inverse moment q={q}: {lower + upper:.12g} (error estimate {lower_err + upper_err:.2g})")
    return q * (lower + upper)


def _printed_zeta(
    regime: Regime,
    cfg: ChannelConfig,
    asym: AsymptoticConfig,
    d_alpha: int,
    d_beta: float,
    P_beta: float,
    log_z: float,
    eval_point: float,
) -> float:
    shapes = cfg.shadow_shapes
    delta = d_alpha - d_beta
    match regime:
        case Regime.ALPHA_DOMINANT:
            head = (
                math.log(P_beta) + log_z + functions.log_gamma(delta)
                + d_beta * math.log(d_beta) - functions.log_gamma(d_beta)
            )
            return sum(
                math.exp(head + delta * math.log(k) + (1 - delta) * math.log(m))
                for m, k in zip(shapes, asym.kappa)
            )
        case Regime.BALANCED:
            scale = math.exp(log_z + d_alpha * math.log(d_beta)) * P_beta / functions.gamma_fn(d_beta)
            return scale * sum(
                m * math.log((asym.gamma_bar / k) * EULER_GAMMA / (d_beta * eval_point * m))
                for m, k in zip(shapes, asym.kappa)
            )
        case Regime.BETA_DOMINANT:
            return math.exp(
                math.log(P_beta) + math.log(cfg.L) + log_z + functions.log_gamma(-delta)
                + d_alpha * math.log(d_beta) - functions.log_gamma(d_beta)
            )


def zeta_coefficient(
    cfg: ChannelConfig,
    asym: Optional[AsymptoticConfig] = None,
    eval_point: float = 1.0,
    form: ZetaForm = ZetaForm.EXACT,
) -> AsymptoticProfile:
    """
    Diversity quantities and the high-SNR coefficient zeta.

    The exact form follows from the small-x behaviour of the product law:

    - alpha dominant: zeta = P_beta d_b^{d_b} E[(alpha_max/gamma_bar)^{-d_b}] / Γ(d_b)
    - beta dominant:  zeta = d_a Z' sum_r P_r m_r^{d_a} Γ(m_r - d_a) / Γ(m_r),
      Z' = prod (m_l kappa_l)^{m_l} / Γ(m_l + 1)

    The balanced regime has no SNR-independent coefficient; the typeset
    expression is evaluated at eval_point and a warning is issued.

    Args:
        cfg: Scenario pinned to one SNR point
        asym: Reference SNR and kappa_l (default: gamma_bar = Es/N0)
        eval_point: Threshold substituted in the balanced-regime expression
        form: EXACT or PRINTED coefficient in the two strict regimes

    Raises:
        AsymptoticError: If asym is inconsistent with cfg or a Gamma pole is hit
    """
    asym = _resolve(cfg, asym)
    form = ZetaForm(form)
    shapes = cfg.shadow_shapes
    d_alpha = sum(shapes)
    d_beta = float(min(cfg.m_beta))
    d = min(float(d_alpha), d_beta)
    delta = d_alpha - d_beta
    regime = _regime(delta)

    probabilities = selection_probabilities_exact(cfg)
    P_beta = float(sum(
        p for p, m in zip(probabilities, cfg.m_beta) if abs(m - d_beta) <= SHAPE_TIE_TOLERANCE
    ))
    log_z = sum(m * math.log(m / k) - math.lgamma(m + 1) for m, k in zip(shapes, asym.kappa))

    try:
        printed = _printed_zeta(regime, cfg, asym, d_alpha, d_beta, P_beta, log_z, eval_point)
        if regime == Regime.BALANCED:
            warnings.warn(
                "balanced regime: the coefficient depends on the evaluation point "
                f"(eval_point={eval_point}); only the slope is meaningful",
                stacklevel=2,
            )
            zeta = printed
            form = ZetaForm.PRINTED
        elif form == ZetaForm.PRINTED:
            warnings.warn("using the typeset asymptotic coefficient", stacklevel=2)
            zeta = printed
        elif regime == Regime.ALPHA_DOMINANT:
            zeta = (
                P_beta * math.exp(d_beta * math.log(d_beta) - functions.log_gamma(d_beta))
                * _inverse_moment(shapes, asym.kappa, d_beta)
            )
        else:
            log_z_exact = sum(m * math.log(m * k) - math.lgamma(m + 1) for m, k in zip(shapes, asym.kappa))
            zeta = d_alpha * math.exp(log_z_exact) * sum(
                float(p) * math.exp(
                    d_alpha * math.log(m) + functions.log_gamma(m - d_alpha) - functions.log_gamma(m)
                )
                for p, m in zip(probabilities, cfg.m_beta)
            )
    except PoleError as e:
        raise AsymptoticError(f"{e}; perturb m_beta slightly to move off the pole") from e
    except OverflowError as e:
        raise AsymptoticError(f"zeta overflowed in the {regime.value} regime: {e}") from e

    logger.debug(f"{regime.value}: d={d}, zeta={zeta:.6g} ({form.value}), printed={printed:.6g}")
    return AsymptoticProfile(
        d_alpha=d_alpha,
        d_beta=d_beta,
        d=d,
        regime=regime,
        zeta=zeta,
        zeta_printed=printed,
        log_z=log_z,
        P_beta=P_beta,
        Delta_d=delta,
        form=form,
    )


def _positive_zeta(profile: AsymptoticProfile) -> float:
    if not profile.zeta > 0:
        raise AsymptoticError(
            f"zeta = {profile.zeta:.6g} is not positive ({profile.regime.value}); "
            "try another eval_point"
        )
    return profile.zeta


def asymptotic_outage(
    cfg: ChannelConfig,
    asym: Optional[AsymptoticConfig],
    gamma_th: float,
    profile: Optional[AsymptoticProfile] = None,
) -> MetricResult:
    """High-SNR outage (zeta/d)(gamma_th/gamma_bar)^d."""
    asym = _resolve(cfg, asym)
    profile = profile or zeta_coefficient(cfg, asym)
    zeta = _positive_zeta(profile)
    if gamma_th <= 0:
        return MetricResult(0.0, Method.ASYMPTOTIC, {"d": profile.d, "regime": profile.regime.value})
    value = zeta / profile.d * (gamma_th / asym.gamma_bar) ** profile.d
    return MetricResult(value, Method.ASYMPTOTIC, {"d": profile.d, "regime": profile.regime.value})


def _sep_scale(profile: AsymptoticProfile, mod: Modulation) -> float:
    d = profile.d
    return 2 ** (d - 1) * mod.a * _positive_zeta(profile) * functions.gamma_fn(d + 0.5) / (d * math.sqrt(math.pi))


def asymptotic_sep(
    cfg: ChannelConfig,
    asym: Optional[AsymptoticConfig],
    mod: Modulation,
    profile: Optional[AsymptoticProfile] = None,
) -> MetricResult:
    """High-SNR SEP 2^{d-1} a zeta Γ(d+1/2)/(d sqrt(pi)) (2 b gamma_bar)^{-d}."""
    asym = _resolve(cfg, asym)
    profile = profile or zeta_coefficient(cfg, asym)
    value = _sep_scale(profile, mod) * (2 * mod.b * asym.gamma_bar) ** (-profile.d)
    return MetricResult(
        value,
        Method.ASYMPTOTIC,
        {"d": profile.d, "regime": profile.regime.value, "approximate": mod.approximate},
    )


def array_gain(
    cfg: ChannelConfig,
    asym: Optional[AsymptoticConfig],
    mod: Modulation,
    profile: Optional[AsymptoticProfile] = None,
) -> float:
    """
    Array gain G_a with P_s ~ (G_a gamma_bar)^{-G_d}.

    Raises:
        AsymptoticError: If zeta is not positive
    """
    asym = _resolve(cfg, asym)
    profile = profile or zeta_coefficient(cfg, asym)
    return 2 * mod.b * _sep_scale(profile, mod) ** (-1 / profile.d)

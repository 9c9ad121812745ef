"""Cross-validation of every closed form against the quadrature oracles."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from tasim.analysis import closed_form, expansion
from tasim.models import ChannelConfig, Modulation, ModulationFamily, SelectionModel
from tasim.oracle import quadrature
from tasim.special import functions
from tasim.special.functions import SpecFunError
from tasim.special.precision import NumericalFailureError
from tasim.util.math import relative_error

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-10
NESTED_ORACLE_TOL = 1e-8
MGF_POINTS = (0.1, 1.0, 10.0)
MOMENT_ORDERS = (1, 2)
NEGLIGIBLE = 1e-12


class ToleranceProfile(str, Enum):
    """Scaling applied to every required tolerance."""
    DEFAULT = "default"
    STRICT = "strict"
    LOOSE = "loose"

    @property
    def factor(self) -> float:
        return {"default": 1.0, "strict": 0.1, "loose": 100.0}[self.value]


# required tolerance per check under the default profile
REQUIRED = {
    "expansion_vs_product": 1e-10,
    "pdf_vs_order_statistics": 1e-9,
    "selection_sum": 1e-9,
    "selection_vs_quad": 1e-8,
    "cdf_vs_quad": 1e-6,
    "outage_vs_quad": 1e-6,
    "mgf_at_zero": 1e-9,
    "mgf_vs_quad": 1e-6,
    "sep_vs_quad": 1e-6,
    "moments_vs_factorized": 1e-8,
    "bessel_recurrence": 1e-9,
    "whittaker_vs_bessel": 1e-8,
    "incomplete_gamma_complement": 1e-13,
}


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one validation check."""
    name: str
    snr_db: float
    achieved: float
    required: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.achieved <= self.required

    @property
    def severity(self) -> float:
        """achieved / required; above 1 means failure."""
        if self.required <= 0:
            return math.inf
        return self.achieved / self.required


def _x_grid(cfg: ChannelConfig, count: int) -> np.ndarray:
    snrs = cfg.mean_snrs
    return np.geomspace(1e-3 * min(snrs), 20 * max(snrs), count)


def _expansion_vs_product(cfg: ChannelConfig) -> tuple[float, str]:
    worst, where = 0.0, 0.0
    for x in _x_grid(cfg, 50):
        gap = abs(expansion.cdf_alpha_max(cfg, x) - quadrature.product_cdf(cfg, x))
        if gap > worst:
            worst, where = gap, x
    return worst, f"max abs gap at x={where:.4g}"


def _pdf_vs_order_statistics(cfg: ChannelConfig) -> tuple[float, str]:
    grid = _x_grid(cfg, 50)
    reference = [quadrature.order_statistics_pdf(cfg, x) for x in grid]
    scale = max(reference)
    gaps = [abs(expansion.pdf_alpha_max(cfg, x) - ref) for x, ref in zip(grid, reference)]
    return max(gaps) / scale, "max abs gap relative to the peak density"


def _selection_sum(cfg: ChannelConfig) -> tuple[float, str]:
    return abs(math.fsum(expansion.selection_probabilities(cfg)) - 1.0), "|sum P_r - 1|"


def _selection_vs_quad(cfg: ChannelConfig) -> tuple[float, str]:
    closed = expansion.selection_probabilities(cfg)
    gaps = [abs(p - quadrature.quad_selection_probability(cfg, r, ORACLE_TOL).value) for r, p in enumerate(closed, 1)]
    worst = max(range(cfg.L), key=lambda i: gaps[i])
    return gaps[worst], f"antenna {worst + 1}"


def _cdf_vs_quad(cfg: ChannelConfig, selection: SelectionModel) -> tuple[float, str]:
    worst, where = 0.0, ""
    for r in range(1, cfg.L + 1):
        for x in _x_grid(cfg, 10):
            closed = closed_form.cdf_conditional(cfg, r, x, selection).value
            oracle = quadrature.quad_cdf_conditional(cfg, r, x, ORACLE_TOL, selection).value
            if closed < NEGLIGIBLE and oracle < NEGLIGIBLE:
                continue
            error = relative_error(closed, oracle)
            if error > worst:
                worst, where = error, f"r={r}, x={x:.4g}"
    return worst, where


def _outage_vs_quad(cfg: ChannelConfig, selection: SelectionModel) -> tuple[float, str]:
    worst, where = 0.0, ""
    for x in _x_grid(cfg, 4):
        closed = closed_form.outage(cfg, x, selection).value
        oracle = quadrature.quad_outage(cfg, x, ORACLE_TOL, selection).value
        if closed < NEGLIGIBLE and oracle < NEGLIGIBLE:
            continue
        error = relative_error(closed, oracle)
        if error > worst:
            worst, where = error, f"gamma_th={x:.4g}"
    return worst, where


def _mgf_at_zero(cfg: ChannelConfig, selection: SelectionModel) -> tuple[float, str]:
    return abs(closed_form.mgf(cfg, 0.0, selection).value - 1.0), "|M(0) - 1|"


def _mgf_vs_quad(cfg: ChannelConfig, selection: SelectionModel) -> tuple[float, str]:
    errors = {
        s: relative_error(
            closed_form.mgf(cfg, s, selection).value,
            quadrature.quad_mgf(cfg, s, NESTED_ORACLE_TOL, selection).value,
        )
        for s in MGF_POINTS
    }
    s = max(errors, key=errors.get)
    return errors[s], f"s={s}"


def _sep_vs_quad(cfg: ChannelConfig, selection: SelectionModel, mod: Modulation) -> tuple[float, str]:
    closed = closed_form.sep(cfg, mod, selection).value
    oracle = quadrature.quad_sep(cfg, mod, NESTED_ORACLE_TOL, selection).value
    return relative_error(closed, oracle), mod.label


def _moments_vs_factorized(cfg: ChannelConfig, selection: SelectionModel) -> tuple[float, str]:
    errors = {
        p: relative_error(
            closed_form.moment(cfg, p, selection).value,
            quadrature.moment_factorized(cfg, p, ORACLE_TOL, selection).value,
        )
        for p in MOMENT_ORDERS
    }
    p = max(errors, key=errors.get)
    return errors[p], f"p={p}"


def _bessel_recurrence(_: ChannelConfig) -> tuple[float, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for nu, z in zip(rng.uniform(-4, 4, 20), rng.uniform(0.05, 30, 20)):
        lhs = functions.bessel_k(nu + 1, z)
        rhs = functions.bessel_k(nu - 1, z) + 2 * nu / z * functions.bessel_k(nu, z)
        worst = max(worst, relative_error(lhs, rhs))
    return worst, "K_{v+1} = K_{v-1} + (2v/z) K_v"


def _whittaker_vs_bessel(_: ChannelConfig) -> tuple[float, str]:
    worst = 0.0
    for b in (0.0, 0.3, 1.0, 2.5):
        for z in (0.1, 1.0, 5.0, 20.0):
            w = functions.whittaker_w(0.0, b, z).value
            k = math.sqrt(z / math.pi) * functions.bessel_k(b, z / 2)
            worst = max(worst, relative_error(w, k))
    return worst, "W_{0,b}(z) = sqrt(z/pi) K_b(z/2)"


def _incomplete_gamma_complement(_: ChannelConfig) -> tuple[float, str]:
    worst = 0.0
    for a in (0.5, 1.0, 2.0, 4.5, 10.0):
        for x in (0.0, 0.1, 1.0, 3.0, 25.0):
            total = functions.reg_lower_gamma(a, x) + functions.reg_upper_gamma(a, x)
            worst = max(worst, abs(total - 1.0))
    return worst, "P(a, x) + Q(a, x) = 1"


def _checks(selection: SelectionModel, mod: Modulation) -> list[tuple[str, Callable[[ChannelConfig], tuple[float, str]]]]:
    return [
        ("expansion_vs_product", _expansion_vs_product),
        ("pdf_vs_order_statistics", _pdf_vs_order_statistics),
        ("selection_sum", _selection_sum),
        ("selection_vs_quad", _selection_vs_quad),
        ("cdf_vs_quad", lambda cfg: _cdf_vs_quad(cfg, selection)),
        ("outage_vs_quad", lambda cfg: _outage_vs_quad(cfg, selection)),
        ("mgf_at_zero", lambda cfg: _mgf_at_zero(cfg, selection)),
        ("mgf_vs_quad", lambda cfg: _mgf_vs_quad(cfg, selection)),
        ("sep_vs_quad", lambda cfg: _sep_vs_quad(cfg, selection, mod)),
        ("moments_vs_factorized", lambda cfg: _moments_vs_factorized(cfg, selection)),
    ]


_KERNEL_CHECKS = [
    ("bessel_recurrence", _bessel_recurrence),
    ("whittaker_vs_bessel", _whittaker_vs_bessel),
    ("incomplete_gamma_complement", _incomplete_gamma_complement),
]


def validation_points(cfg: ChannelConfig) -> list[float]:
    """First, middle and last SNR of the scenario (deduplicated)."""
    points = cfg.snr_points()
    return sorted({points[0], points[len(points) // 2], points[-1]})


def _run(name: str, check, cfg: ChannelConfig, snr_db: float, required: float) -> CheckResult:
    try:
        achieved, detail = check(cfg)
    except (NumericalFailureError, SpecFunError, expansion.CapacityError, quadrature.OracleError) as e:
        achieved, detail = math.inf, f"{type(e).__name__}: {e}"
    if not math.isfinite(achieved) and not detail:
        detail = "non-finite result"
    if math.isnan(achieved):
        achieved = math.inf
    result = CheckResult(name, snr_db, achieved, required, detail)
    logger.debug(f"{name} @ {snr_db} dB: {achieved:.3g} (required {required:.3g})")
    return result


def run_validation(
    cfg: ChannelConfig,
    profile: ToleranceProfile = ToleranceProfile.DEFAULT,
    selection: SelectionModel = SelectionModel.INDEPENDENT,
) -> list[CheckResult]:
    """
    Run the full cross-check suite.

    Args:
        cfg: Scenario (single point or sweep; sweeps are checked at their
            first, middle and last SNR)
        profile: Tolerance scaling
        selection: Selection model used by the closed forms and oracles

    Returns:
        One CheckResult per check and SNR point, then the kernel self-checks
    """
    factor = ToleranceProfile(profile).factor
    mod = cfg.modulation or Modulation(ModulationFamily.BPSK)
    results = []
    for snr_db in validation_points(cfg):
        point = cfg.at_snr(snr_db)
        for name, check in _checks(selection, mod):
            results.append(_run(name, check, point, snr_db, REQUIRED[name] * factor))
    reference = cfg.at_snr(cfg.snr_points()[0])
    for name, check in _KERNEL_CHECKS:
        results.append(_run(name, check, reference, math.nan, REQUIRED[name] * factor))
    failed = sum(not r.passed for r in results)
    logger.info(f"Validation: {len(results) - failed}/{len(results)} checks passed")
    return results


def worst_offender(results: list[CheckResult]):
    """The failed check furthest from its tolerance, or None when all pass."""
    failed = [r for r in results if not r.passed]
    if not failed:
        return None
    return max(failed, key=lambda r: r.severity)

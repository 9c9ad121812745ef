"""Markdown rendering of validation results.

The report has three parts:
- a header naming the scenario and tolerance profile
- the pass/fail table, one row per check and SNR point
- a verdict line naming the worst offender when anything failed
"""

import math

from tasim.models import ChannelConfig
from tasim.oracle.validation import CheckResult, worst_offender
from tasim.util.fmt import format_markdown_table, format_scientific, format_status


def render(cfg: ChannelConfig, results: list[CheckResult], profile: str) -> str:
    """Generate the validation report.

    Args:
        cfg: Scenario that was validated
        results: Output of run_validation
        profile: Tolerance profile name

    Returns:
        Markdown-formatted report
    """
    return "\n\n".join([
        _render_header(cfg, profile),
        _render_table(results),
        _render_verdict(results),
    ])


def _render_header(cfg: ChannelConfig, profile: str) -> str:
    points = ", ".join(f"{p:g}" for p in cfg.snr_points()) if not cfg.is_sweep else (
        f"{cfg.snr_db.start_db:g} to {cfg.snr_db.stop_db:g} dB, step {cfg.snr_db.step_db:g}"
    )
    return f"""# Closed-form validation

**Antennas:** {cfg.L}  |  **m_alpha:** {list(cfg.m_alpha)}  |  **m_beta:** {list(cfg.m_beta)}  |  **omega:** {list(cfg.omega)}

**SNR:** {points}  |  **Profile:** {profile}"""


def _render_table(results: list[CheckResult]) -> str:
    rows = [
        [
            r.name,
            "-" if math.isnan(r.snr_db) else f"{r.snr_db:g}",
            format_scientific(r.achieved, 2),
            format_scientific(r.required, 0),
            format_status(r.passed),
            r.detail,
        ]
        for r in results
    ]
    return format_markdown_table(
        ["Check", "SNR (dB)", "Achieved", "Required", "Status", "Detail"],
        rows,
        align=["left", "right", "right", "right", "left", "left"],
    )


def _render_verdict(results: list[CheckResult]) -> str:
    worst = worst_offender(results)
    if worst is None:
        return f"**All {len(results)} checks passed.**"
    failed = sum(not r.passed for r in results)
    where = "" if math.isnan(worst.snr_db) else f" at {worst.snr_db:g} dB"
    return (
        f"**{failed} of {len(results)} checks failed.** Worst offender: {worst.name}{where}, "
        f"achieved {format_scientific(worst.achieved, 2)} vs required {format_scientific(worst.required, 0)}"
        + (f" ({worst.detail})" if worst.detail else "")
    )

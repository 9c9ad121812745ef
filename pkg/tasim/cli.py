"""Click-based CLI for shadowing-based transmit antenna selection analysis."""

import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Optional

import click

from tasim.models import (
    ChannelConfig,
    Method,
    MetricResult,
    Modulation,
    ModulationFamily,
    Policy,
    QuadratureReport,
    SelectionModel,
    SimulationEstimate,
    SimulationOptions,
    SweepRow,
    SweepSpec,
)

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(levelname)s: %(message)s",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VALIDATION = 3

OUTAGE_METHODS = (Method.CLOSED, Method.ASYMPTOTIC, Method.ORACLE, Method.MC)
SEP_METHODS = (Method.CLOSED, Method.ASYMPTOTIC, Method.ORACLE, Method.MC)
MOMENT_METHODS = (Method.CLOSED, Method.ORACLE, Method.MC)
MGF_METHODS = (Method.CLOSED, Method.ORACLE)
SELPROB_METHODS = (Method.CLOSED, Method.ORACLE, Method.MC)

SELECTION_CHOICES = [s.value for s in SelectionModel]


class TasimContext:
    """Context object for CLI commands."""

    def __init__(self):
        self.verbose: bool = False
        self.threads: int = 1

    def log(self, msg: str, level: str = "info"):
        """Log a message at the specified level."""
        if level == "debug" and not self.verbose:
            return
        getattr(logger, level)(msg)


pass_context = click.make_pass_decorator(TasimContext, ensure=True)


@dataclass
class Evaluator:
    """One method producing one or more named metrics at a single SNR point."""
    method: Method
    metrics: list[str]
    compute: Callable[[ChannelConfig], list[Any]]


def _thread_cap(value: Optional[str]) -> int:
    default = os.cpu_count() or 1
    if value is None or not value.strip():
        return default
    try:
        threads = int(value)
    except ValueError:
        logger.warning(f"Ignoring TASIM_THREADS={value!r}: not an integer")
        return default
    if threads < 1:
        logger.warning(f"Ignoring TASIM_THREADS={value!r}: must be >= 1")
        return default
    return threads


@click.group()
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable verbose logging (debug level).",
)
@click.pass_context
def main(ctx: click.Context, verbose: bool):
    """
    Transmit antenna selection based on shadowing side information.

    Closed-form, asymptotic, quadrature-oracle and Monte Carlo evaluation of
    outage, SEP, moments, MGF and selection probabilities for i.n.d.
    Generalized-K links. Sweeps are written as CSV.

    Exit codes: 0 ok, 1 configuration error, 2 numerical failure (failed
    rows are written as nan), 3 validation failure.

    Environment variables:
      TASIM_THREADS   Worker threads for sweeps and Monte Carlo partitions
    """
    # Initialize context
    ctx.obj = TasimContext()
    ctx.obj.verbose = verbose

    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Verbose logging enabled")

    from dotenv import load_dotenv
    load_dotenv()

    ctx.obj.threads = _thread_cap(os.getenv("TASIM_THREADS"))
    logger.debug(f"Using up to {ctx.obj.threads} worker thread(s)")


# ---------------------------------------------------------------------------
# Option parsing
# ---------------------------------------------------------------------------


def _fail(message: str, code: int = EXIT_CONFIG):
    click.echo(f"Error: {message}", err=True)
    sys.exit(code)


def _fail_validation(errors: list[str]):
    click.echo("Validation errors:", err=True)
    for error in errors:
        click.echo(f"  - {error}", err=True)
    sys.exit(EXIT_CONFIG)


def parse_sweep(text: str) -> float | SweepSpec:
    """Parse 'start:stop:step' (dB) or a single dB value."""
    parts = text.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError as e:
        raise ValueError(f"--snr-db expects a number or start:stop:step, got '{text}'") from e
    if len(values) == 1:
        return values[0]
    if len(values) != 3:
        raise ValueError(f"--snr-db expects a number or start:stop:step, got '{text}'")
    return SweepSpec(*values)


def parse_methods(text: str, allowed: tuple[Method, ...], command: str) -> list[Method]:
    """Parse a comma-separated method list, keeping the given order and dropping repeats."""
    methods: list[Method] = []
    for name in (part.strip().lower() for part in text.split(",") if part.strip()):
        try:
            method = Method(name)
        except ValueError as e:
            raise ValueError(f"Unknown method '{name}'") from e
        if method not in allowed:
            choices = ", ".join(m.value for m in allowed)
            raise ValueError(f"Method '{name}' is not available for {command} (choose from {choices})")
        if method not in methods:
            methods.append(method)
    if not methods:
        raise ValueError("At least one method is required")
    return methods


def parse_policies(text: Optional[str], default: Policy) -> list[Policy]:
    if text is None:
        return [default]
    policies: list[Policy] = []
    for name in (part.strip().lower() for part in text.split(",") if part.strip()):
        try:
            policy = Policy(name)
        except ValueError as e:
            raise ValueError(f"Unknown policy '{name}'") from e
        if policy not in policies:
            policies.append(policy)
    return policies or [default]


def _parse_numbers(text: str, option: str, convert=float) -> list:
    try:
        return [convert(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ValueError(f"{option} expects a comma-separated list, got '{text}'") from e


def parse_orders(text: str) -> list[int]:
    orders = _parse_numbers(text, "--orders", int)
    bad = [p for p in orders if p < 1]
    if bad or not orders:
        raise ValueError(f"--orders must list positive integers, got '{text}'")
    return orders


def parse_s_grid(text: str) -> list[float]:
    grid = _parse_numbers(text, "--s-grid")
    if not grid or any(not (s >= 0 and math.isfinite(s)) for s in grid):
        raise ValueError(f"--s-grid must list finite non-negative values, got '{text}'")
    return grid


def _load_scenario(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    modulation: Optional[str] = None,
) -> ChannelConfig:
    from tasim.config import ConfigError, ConfigValidationError, ensure_valid, load_config

    try:
        cfg = load_config(config_path)
        changes: dict[str, Any] = {}
        if snr_db is not None:
            changes["snr_db"] = parse_sweep(snr_db)
        if modulation is not None:
            changes["modulation"] = Modulation.parse(modulation)
        if changes:
            cfg = ensure_valid(replace(cfg, **changes))
    except ConfigValidationError as e:
        _fail_validation(e.errors)
    except (ConfigError, ValueError) as e:
        _fail(str(e))

    ctx.log(f"Scenario: L={cfg.L}, m_alpha={list(cfg.m_alpha)}, m_beta={list(cfg.m_beta)}", "debug")
    return cfg


def _simulation_options(
    cfg: ChannelConfig,
    trials: Optional[int],
    seed: Optional[int],
    pe: Optional[float],
    rho: Optional[float],
    partitions: Optional[int],
) -> SimulationOptions:
    overrides = {
        key: value
        for key, value in (("trials", trials), ("seed", seed), ("pe", pe), ("rho", rho), ("partitions", partitions))
        if value is not None
    }
    opts = replace(cfg.sim or SimulationOptions(), **overrides)
    errors = opts.validate()
    if errors:
        _fail_validation(errors)
    return opts


def _sim_options(func):
    """Monte Carlo overrides shared by every command that accepts --methods mc."""
    options = [
        click.option("--trials", type=int, help="Monte Carlo trials per SNR point (>= 10000)."),
        click.option("--seed", type=int, help="Seed of the root random stream."),
        click.option("--pe", type=float, help="Feedback bit-error probability in [0, 1)."),
        click.option("--rho", type=float, help="Shadowing power correlation in [0, 1)."),
        click.option("--partitions", type=int, help="Independent sub-streams (parallel units)."),
        click.option(
            "--policy",
            type=str,
            help="Comma-separated selection policies: ssi, random, random_unshadowed.",
        ),
    ]
    for option in reversed(options):
        func = option(func)
    return func


# ---------------------------------------------------------------------------
# Sweep engine
# ---------------------------------------------------------------------------


def _numerical_errors() -> tuple[type[Exception], ...]:
    from tasim.analysis.asymptotics import AsymptoticError
    from tasim.analysis.expansion import CapacityError
    from tasim.oracle.quadrature import OracleError
    from tasim.sim.monte_carlo import SimulationError
    from tasim.special.functions import SpecFunError
    from tasim.special.precision import NumericalFailureError

    return (
        NumericalFailureError, SpecFunError, CapacityError, AsymptoticError, OracleError, SimulationError,
        OverflowError,
    )


def _to_row(snr_db: float, metric: str, method: Method, result: Any) -> SweepRow:
    if isinstance(result, SimulationEstimate):
        return SweepRow(snr_db, metric, method, result.value, result.stderr, result.trials)
    if isinstance(result, QuadratureReport) and not result.converged:
        logger.warning(f"{metric} @ {snr_db:g} dB: oracle did not reach the requested tolerance")
    return SweepRow(snr_db, metric, method, float(result.value))


def _failed_row(snr_db: float, metric: str, method: Method) -> SweepRow:
    stderr = math.nan if method == Method.MC else None
    return SweepRow(snr_db, metric, method, math.nan, stderr)


def _evaluate_point(
    cfg: ChannelConfig,
    snr_db: float,
    evaluators: list[Evaluator],
) -> tuple[list[SweepRow], int]:
    errors = _numerical_errors()
    point = cfg.at_snr(snr_db)
    rows: list[SweepRow] = []
    failures = 0
    for evaluator in evaluators:
        try:
            results = evaluator.compute(point)
            rows.extend(
                _to_row(snr_db, metric, evaluator.method, result)
                for metric, result in zip(evaluator.metrics, results)
            )
        except errors as e:
            logger.warning(
                f"{', '.join(evaluator.metrics)} ({evaluator.method.value}) failed at {snr_db:g} dB: {e}"
            )
            failures += len(evaluator.metrics)
            rows.extend(_failed_row(snr_db, metric, evaluator.method) for metric in evaluator.metrics)
    return rows, failures


def run_sweep(ctx: TasimContext, cfg: ChannelConfig, evaluators: list[Evaluator]) -> tuple[list[SweepRow], int]:
    """
    Evaluate every evaluator at every SNR point of the scenario.

    Points run in parallel up to ctx.threads; rows come back in SNR order.

    Returns:
        (rows, number of failed rows)
    """
    points = cfg.snr_points()
    workers = max(1, min(ctx.threads, len(points)))
    ctx.log(f"Evaluating {len(points)} SNR point(s) with {workers} worker(s)", "debug")
    if workers == 1:
        outcomes = [_evaluate_point(cfg, snr, evaluators) for snr in points]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda snr: _evaluate_point(cfg, snr, evaluators), points))
    rows = [row for point_rows, _ in outcomes for row in point_rows]
    return rows, sum(failures for _, failures in outcomes)


def _emit(rows: list[SweepRow], failures: int, out: Optional[str]):
    from tasim.report.csv_report import write_csv

    text = write_csv(rows, out)
    if not out:
        click.echo(text, nl=False)
    if failures:
        _fail(f"{failures} row(s) failed and are marked nan", EXIT_NUMERICAL)


def _mc_workers(ctx: TasimContext, cfg: ChannelConfig) -> int:
    # sweeps already parallelise across points
    return ctx.threads if len(cfg.snr_points()) == 1 else 1


def _mc_evaluators(
    ctx: TasimContext,
    cfg: ChannelConfig,
    metrics: list[str],
    opts: SimulationOptions,
    policies: list[Policy],
    estimate: Callable[[ChannelConfig, SimulationOptions, int], list[SimulationEstimate]],
) -> list[Evaluator]:
    """One Monte Carlo evaluator per policy; non-ssi metrics get a _<policy> suffix."""
    from tasim.sim.monte_carlo import SimulationError, check_run

    workers = _mc_workers(ctx, cfg)
    evaluators = []
    for policy in policies:
        run = replace(opts, policy=policy)
        try:
            check_run(cfg.at_snr(cfg.snr_points()[0]), run)
        except SimulationError as e:
            _fail(str(e))
        names = metrics if policy == Policy.SSI else [f"{m}_{policy.value}" for m in metrics]
        evaluators.append(Evaluator(Method.MC, names, lambda c, run=run: estimate(c, run, workers)))
    ctx.log(f"Monte Carlo: {opts.trials} trials, seed {opts.seed}, policies {[p.value for p in policies]}", "debug")
    return evaluators


def _asymptotic_evaluator(metric: str, compute: Callable[[ChannelConfig, Any], MetricResult], mod=None) -> Evaluator:
    """The asymptotic metric together with the diversity order (and array gain for SEP)."""
    from tasim.analysis import asymptotics
    from tasim.util.math import linear_to_db

    metrics = [metric, "diversity_order"] + (["array_gain_db"] if mod is not None else [])

    def rows(c: ChannelConfig) -> list[Any]:
        profile = asymptotics.zeta_coefficient(c)
        results = [compute(c, profile), MetricResult(profile.d, Method.ASYMPTOTIC)]
        if mod is not None:
            gain = asymptotics.array_gain(c, None, mod, profile)
            results.append(MetricResult(linear_to_db(gain), Method.ASYMPTOTIC))
        return results

    return Evaluator(Method.ASYMPTOTIC, metrics, rows)


def _parsed(parse: Callable, *args):
    try:
        return parse(*args)
    except ValueError as e:
        _fail(str(e))


def _resolve_modulation(cfg: ChannelConfig) -> Modulation:
    if cfg.modulation is not None:
        return cfg.modulation
    logger.debug("No modulation configured; using BPSK")
    return Modulation(ModulationFamily.BPSK)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option(
    "--methods",
    "--method",
    "methods",
    type=str,
    default="closed",
    show_default=True,
    help="Comma-separated methods: closed, asymptotic, oracle, mc.",
)
@click.option(
    "--selection",
    type=click.Choice(SELECTION_CHOICES, case_sensitive=False),
    default="independent",
    show_default=True,
    help="Shadowing law of the selected antenna for closed and oracle methods.",
)
@click.option("--gamma-th-db", type=float, default=0.0, show_default=True, help="Outage threshold in dB.")
@_sim_options
@click.option("--out", type=click.Path(), help="Output CSV path (if not provided, prints to stdout).")
@pass_context
def outage(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    methods: str,
    selection: str,
    gamma_th_db: float,
    trials: Optional[int],
    seed: Optional[int],
    pe: Optional[float],
    rho: Optional[float],
    partitions: Optional[int],
    policy: Optional[str],
    out: Optional[str],
):
    """
    Outage probability sweep.

    Examples:
      tasim outage --config scenarios/outage_l2.json --methods closed,mc
      tasim outage --config scenarios/outage_l2.json --snr-db 0:60:5 --methods closed,asymptotic
    """
    from tasim.analysis import asymptotics, closed_form
    from tasim.oracle import quadrature
    from tasim.sim import monte_carlo
    from tasim.util.math import db_to_linear

    cfg = _load_scenario(ctx, config_path, snr_db)
    chosen = _parsed(parse_methods, methods, OUTAGE_METHODS, "outage")
    selection = SelectionModel(selection.lower())
    gamma_th = db_to_linear(gamma_th_db)
    ctx.log(f"Outage at gamma_th = {gamma_th_db:g} dB over {len(cfg.snr_points())} SNR point(s)")

    evaluators: list[Evaluator] = []
    for method in chosen:
        match method:
            case Method.CLOSED:
                evaluators.append(Evaluator(method, ["outage"], lambda c: [closed_form.outage(c, gamma_th, selection)]))
            case Method.ASYMPTOTIC:
                evaluators.append(_asymptotic_evaluator(
                    "outage", lambda c, profile: asymptotics.asymptotic_outage(c, None, gamma_th, profile)
                ))
            case Method.ORACLE:
                evaluators.append(Evaluator(
                    method, ["outage"], lambda c: [quadrature.quad_outage(c, gamma_th, selection=selection)]
                ))
            case Method.MC:
                opts = _simulation_options(cfg, trials, seed, pe, rho, partitions)
                policies = _parsed(parse_policies, policy, opts.policy)
                evaluators.extend(_mc_evaluators(
                    ctx, cfg, ["outage"], opts, policies,
                    lambda c, run, workers: [monte_carlo.estimate_outage(c, run, gamma_th, workers)],
                ))

    rows, failures = run_sweep(ctx, cfg, evaluators)
    _emit(rows, failures, out)


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option(
    "--modulation",
    type=str,
    help="bpsk, bfsk, pam:M, psk:M or qam:M (default: the scenario's, else bpsk).",
)
@click.option(
    "--methods",
    "--method",
    "methods",
    type=str,
    default="closed",
    show_default=True,
    help="Comma-separated methods: closed, asymptotic, oracle, mc.",
)
@click.option(
    "--selection",
    type=click.Choice(SELECTION_CHOICES, case_sensitive=False),
    default="independent",
    show_default=True,
    help="Shadowing law of the selected antenna for closed and oracle methods.",
)
@_sim_options
@click.option("--out", type=click.Path(), help="Output CSV path (if not provided, prints to stdout).")
@pass_context
def sep(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    modulation: Optional[str],
    methods: str,
    selection: str,
    trials: Optional[int],
    seed: Optional[int],
    pe: Optional[float],
    rho: Optional[float],
    partitions: Optional[int],
    policy: Optional[str],
    out: Optional[str],
):
    """
    Average symbol error probability sweep.

    Asymptotic rows also report the diversity order and the array gain (dB).

    Examples:
      tasim sep --config scenarios/sep_l4.json --methods closed,asymptotic
      tasim sep --config scenarios/sep_l2.json --methods closed,mc --policy ssi,random
      tasim sep --config scenarios/sep_l2.json --methods mc --pe 0.1
    """
    from tasim.analysis import asymptotics, closed_form
    from tasim.oracle import quadrature
    from tasim.oracle.validation import NESTED_ORACLE_TOL
    from tasim.sim import monte_carlo

    cfg = _load_scenario(ctx, config_path, snr_db, modulation)
    mod = _resolve_modulation(cfg)
    chosen = _parsed(parse_methods, methods, SEP_METHODS, "sep")
    selection = SelectionModel(selection.lower())
    ctx.log(f"SEP for {mod.label} over {len(cfg.snr_points())} SNR point(s)")
    if mod.approximate:
        ctx.log(f"{mod.label} uses the a*Q(sqrt(2*b*snr)) approximation", "debug")

    evaluators: list[Evaluator] = []
    for method in chosen:
        match method:
            case Method.CLOSED:
                evaluators.append(Evaluator(method, ["sep"], lambda c: [closed_form.sep(c, mod, selection)]))
            case Method.ASYMPTOTIC:
                evaluators.append(_asymptotic_evaluator(
                    "sep", lambda c, profile: asymptotics.asymptotic_sep(c, None, mod, profile), mod
                ))
            case Method.ORACLE:
                evaluators.append(Evaluator(
                    method, ["sep"], lambda c: [quadrature.quad_sep(c, mod, NESTED_ORACLE_TOL, selection)]
                ))
            case Method.MC:
                opts = _simulation_options(cfg, trials, seed, pe, rho, partitions)
                policies = _parsed(parse_policies, policy, opts.policy)
                evaluators.extend(_mc_evaluators(
                    ctx, cfg, ["sep"], opts, policies,
                    lambda c, run, workers: [monte_carlo.estimate_sep(c, run, mod, workers)],
                ))

    rows, failures = run_sweep(ctx, cfg, evaluators)
    _emit(rows, failures, out)


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option("--orders", type=str, default="1,2", show_default=True, help="Comma-separated moment orders.")
@click.option(
    "--methods",
    "--method",
    "methods",
    type=str,
    default="closed",
    show_default=True,
    help="Comma-separated methods: closed, oracle, mc.",
)
@click.option(
    "--selection",
    type=click.Choice(SELECTION_CHOICES, case_sensitive=False),
    default="independent",
    show_default=True,
    help="Shadowing law of the selected antenna for closed and oracle methods.",
)
@_sim_options
@click.option("--out", type=click.Path(), help="Output CSV path (if not provided, prints to stdout).")
@pass_context
def moments(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    orders: str,
    methods: str,
    selection: str,
    trials: Optional[int],
    seed: Optional[int],
    pe: Optional[float],
    rho: Optional[float],
    partitions: Optional[int],
    policy: Optional[str],
    out: Optional[str],
):
    """
    Moments E[gamma^p] of the received SNR.

    Metrics are moment_p<p>; when orders 1 and 2 are both requested the
    closed and oracle methods also report the amount of fading (af).

    Examples:
      tasim moments --config scenarios/outage_l2.json --orders 1,2,3
      tasim moments --config scenarios/outage_l2.json --methods closed,mc
    """
    from tasim.analysis import closed_form
    from tasim.oracle import quadrature
    from tasim.sim import monte_carlo

    cfg = _load_scenario(ctx, config_path, snr_db)
    chosen = _parsed(parse_methods, methods, MOMENT_METHODS, "moments")
    order_list = _parsed(parse_orders, orders)
    selection = SelectionModel(selection.lower())
    names = [f"moment_p{p}" for p in order_list]
    with_af = 1 in order_list and 2 in order_list

    def closed(c: ChannelConfig) -> list[Any]:
        results: list[Any] = [closed_form.moment(c, p, selection) for p in order_list]
        if with_af:
            results.append(closed_form.amount_of_fading(c, selection))
        return results

    def oracle(c: ChannelConfig) -> list[Any]:
        results: list[Any] = [quadrature.moment_factorized(c, p, selection=selection) for p in order_list]
        if with_af:
            first = results[order_list.index(1)].value
            second = results[order_list.index(2)].value
            results.append(MetricResult(second / first ** 2 - 1.0, Method.ORACLE))
        return results

    evaluators: list[Evaluator] = []
    for method in chosen:
        match method:
            case Method.CLOSED:
                evaluators.append(Evaluator(method, names + (["af"] if with_af else []), closed))
            case Method.ORACLE:
                evaluators.append(Evaluator(method, names + (["af"] if with_af else []), oracle))
            case Method.MC:
                opts = _simulation_options(cfg, trials, seed, pe, rho, partitions)
                policies = _parsed(parse_policies, policy, opts.policy)
                for p, name in zip(order_list, names):
                    evaluators.extend(_mc_evaluators(
                        ctx, cfg, [name], opts, policies,
                        lambda c, run, workers, p=p: [monte_carlo.estimate_moments(c, run, p, workers)],
                    ))

    rows, failures = run_sweep(ctx, cfg, evaluators)
    _emit(rows, failures, out)


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option("--s-grid", type=str, default="0,0.1,1,10", show_default=True, help="Comma-separated s >= 0.")
@click.option(
    "--methods",
    "--method",
    "methods",
    type=str,
    default="closed",
    show_default=True,
    help="Comma-separated methods: closed, oracle.",
)
@click.option(
    "--selection",
    type=click.Choice(SELECTION_CHOICES, case_sensitive=False),
    default="independent",
    show_default=True,
    help="Shadowing law of the selected antenna.",
)
@click.option("--out", type=click.Path(), help="Output CSV path (if not provided, prints to stdout).")
@pass_context
def mgf(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    s_grid: str,
    methods: str,
    selection: str,
    out: Optional[str],
):
    """
    Moment generating function E[exp(-s gamma)] on a grid of s.

    Metrics are named mgf@<s>.

    Example:
      tasim mgf --config scenarios/outage_l2.json --s-grid 0,0.5,2 --methods closed,oracle
    """
    from tasim.analysis import closed_form
    from tasim.oracle import quadrature
    from tasim.oracle.validation import NESTED_ORACLE_TOL

    cfg = _load_scenario(ctx, config_path, snr_db)
    chosen = _parsed(parse_methods, methods, MGF_METHODS, "mgf")
    grid = _parsed(parse_s_grid, s_grid)
    selection = SelectionModel(selection.lower())
    names = [f"mgf@{s:g}" for s in grid]

    def oracle_at(c: ChannelConfig, s: float) -> QuadratureReport:
        if s == 0:
            return QuadratureReport(1.0, 0.0, 0, True)
        return quadrature.quad_mgf(c, s, NESTED_ORACLE_TOL, selection)

    evaluators: list[Evaluator] = []
    for method in chosen:
        match method:
            case Method.CLOSED:
                evaluators.append(Evaluator(method, names, lambda c: [closed_form.mgf(c, s, selection) for s in grid]))
            case Method.ORACLE:
                evaluators.append(Evaluator(method, names, lambda c: [oracle_at(c, s) for s in grid]))

    rows, failures = run_sweep(ctx, cfg, evaluators)
    _emit(rows, failures, out)


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option(
    "--methods",
    "--method",
    "methods",
    type=str,
    default="closed",
    show_default=True,
    help="Comma-separated methods: closed, oracle, mc.",
)
@_sim_options
@click.option("--out", type=click.Path(), help="Output CSV path (if not provided, prints to stdout).")
@pass_context
def selprob(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    methods: str,
    trials: Optional[int],
    seed: Optional[int],
    pe: Optional[float],
    rho: Optional[float],
    partitions: Optional[int],
    policy: Optional[str],
    out: Optional[str],
):
    """
    Probability that each antenna is selected (p_select_<r>, r = 1..L).

    With --methods mc and --pe the rows give the frequency with which each
    antenna is actually used after feedback errors.

    Example:
      tasim selprob --config scenarios/sep_l2.json --methods closed,oracle,mc
    """
    from tasim.analysis import expansion
    from tasim.oracle import quadrature
    from tasim.sim import monte_carlo

    cfg = _load_scenario(ctx, config_path, snr_db)
    chosen = _parsed(parse_methods, methods, SELPROB_METHODS, "selprob")
    names = [f"p_select_{r}" for r in range(1, cfg.L + 1)]

    evaluators: list[Evaluator] = []
    for method in chosen:
        match method:
            case Method.CLOSED:
                evaluators.append(Evaluator(
                    method, names,
                    lambda c: [MetricResult(p, Method.CLOSED) for p in expansion.selection_probabilities(c)],
                ))
            case Method.ORACLE:
                evaluators.append(Evaluator(
                    method, names,
                    lambda c: [quadrature.quad_selection_probability(c, r) for r in range(1, c.L + 1)],
                ))
            case Method.MC:
                opts = _simulation_options(cfg, trials, seed, pe, rho, partitions)
                policies = _parsed(parse_policies, policy, opts.policy)
                evaluators.extend(_mc_evaluators(
                    ctx, cfg, names, opts, policies,
                    monte_carlo.estimate_selection_frequencies,
                ))

    rows, failures = run_sweep(ctx, cfg, evaluators)
    _emit(rows, failures, out)


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option("--gamma-th-db", type=float, default=0.0, show_default=True, help="Outage threshold in dB.")
@click.option("--modulation", type=str, help="bpsk, bfsk, pam:M, psk:M or qam:M (default: the scenario's).")
@_sim_options
@click.option("--out", type=click.Path(), help="Output CSV path; also writes <out>.meta.json.")
@pass_context
def simulate(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    gamma_th_db: float,
    modulation: Optional[str],
    trials: Optional[int],
    seed: Optional[int],
    pe: Optional[float],
    rho: Optional[float],
    partitions: Optional[int],
    policy: Optional[str],
    out: Optional[str],
):
    """
    Monte Carlo run of every metric the simulator estimates.

    Emits outage, sep (when a modulation is configured or given),
    moment_p1, moment_p2 and p_select_<r> for each requested policy. With
    --out the run metadata (seeds, sub-stream derivation, feedback mapping,
    correlation model) is written next to the CSV.

    Example:
      tasim simulate --config scenarios/sep_l2.json --trials 200000 --seed 7 --out run.csv
    """
    from tasim.config import config_to_dict
    from tasim.report.csv_report import write_sidecar
    from tasim.sim import monte_carlo
    from tasim.util.math import db_to_linear

    cfg = _load_scenario(ctx, config_path, snr_db, modulation)
    opts = _simulation_options(cfg, trials, seed, pe, rho, partitions)
    policies = _parsed(parse_policies, policy, opts.policy)
    gamma_th = db_to_linear(gamma_th_db)
    mod = cfg.modulation
    names = [f"p_select_{r}" for r in range(1, cfg.L + 1)]

    estimators: list[tuple[list[str], Callable]] = [
        (["outage"], lambda c, run, workers: [monte_carlo.estimate_outage(c, run, gamma_th, workers)]),
    ]
    if mod is not None:
        estimators.append((["sep"], lambda c, run, workers: [monte_carlo.estimate_sep(c, run, mod, workers)]))
    for p in (1, 2):
        estimators.append((
            [f"moment_p{p}"],
            lambda c, run, workers, p=p: [monte_carlo.estimate_moments(c, run, p, workers)],
        ))
    estimators.append((names, monte_carlo.estimate_selection_frequencies))

    evaluators: list[Evaluator] = []
    for metrics, estimate in estimators:
        evaluators.extend(_mc_evaluators(ctx, cfg, metrics, opts, policies, estimate))

    rows, failures = run_sweep(ctx, cfg, evaluators)
    if out:
        reference = cfg.at_snr(cfg.snr_points()[0])
        write_sidecar(out, {
            "scenario": config_to_dict(cfg),
            "gamma_th_db": gamma_th_db,
            "modulation": mod.label if mod else None,
            "runs": {p.value: monte_carlo.run_metadata(reference, replace(opts, policy=p)) for p in policies},
        })
    _emit(rows, failures, out)


@main.command()
@click.option("--config", "config_path", type=str, required=True, help="Scenario JSON file.")
@click.option("--snr-db", type=str, help="Override the SNR: a dB value or start:stop:step.")
@click.option(
    "--profile",
    type=click.Choice(["default", "strict", "loose"], case_sensitive=False),
    default="default",
    show_default=True,
    help="Tolerance profile: strict divides every tolerance by 10, loose multiplies by 100.",
)
@click.option(
    "--selection",
    type=click.Choice(SELECTION_CHOICES, case_sensitive=False),
    default="independent",
    show_default=True,
    help="Shadowing law used by the closed forms and oracles being compared.",
)
@click.option("--out", type=click.Path(), help="Also write the markdown report to this file.")
@pass_context
def validate(
    ctx: TasimContext,
    config_path: str,
    snr_db: Optional[str],
    profile: str,
    selection: str,
    out: Optional[str],
):
    """
    Cross-check every closed form against the quadrature oracles.

    Runs the CDF, selection probability, outage, MGF, SEP, moment and
    expansion-vs-product checks at the first, middle and last SNR point,
    plus special-function self-checks, and prints a pass/fail table.
    Exits 3 when any check fails.

    Example:
      tasim validate --config scenarios/sep_l2.json --profile strict
    """
    from tasim.oracle.validation import ToleranceProfile, run_validation, worst_offender
    from tasim.report import markdown_report

    cfg = _load_scenario(ctx, config_path, snr_db)
    tolerance = ToleranceProfile(profile.lower())
    selection_model = SelectionModel(selection.lower())
    ctx.log(f"Validating with the {tolerance.value} profile ({selection_model.value} selection)")

    results = run_validation(cfg, tolerance, selection_model)
    report = markdown_report.render(cfg, results, tolerance.value)
    if out:
        with open(out, "w") as f:
            f.write(report + "\n")
        ctx.log(f"Report written to {out}")
    click.echo(report)

    worst = worst_offender(results)
    if worst is not None:
        where = "" if math.isnan(worst.snr_db) else f" at {worst.snr_db:g} dB"
        click.echo(
            f"Validation failed: worst offender {worst.name}{where}, "
            f"achieved {worst.achieved:.3g} vs required {worst.required:.3g}",
            err=True,
        )
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()

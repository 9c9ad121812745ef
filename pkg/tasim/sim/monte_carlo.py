"""Monte Carlo engine for shadowing-based transmit antenna selection.

Per trial, every link draws a shadowing power alpha_l ~ Gamma(m_alpha,l,
gamma~_l/m_alpha,l) and a fading power beta_l ~ Gamma(m_beta,l, 1/m_beta,l).
The transmitter uses one antenna r and the receiver sees
gamma = alpha_r * beta_r.

Within each chunk of trials the draws happen in a fixed order:

1. alpha for all links (the correlated construction when rho > 0)
2. beta for all links
3. antenna indices, for the random policies only

Feedback bit flips (pe > 0, L > 1, ssi policy) come from a separate
per-partition stream. The channel draws are therefore the same for every
pe, a run with pe = 0 is bit-identical to an error-free run, and since the
same uniforms are compared against pe, the trials flipped at a smaller pe
are also flipped at a larger one.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from tasim.models import ChannelConfig, Modulation, Policy, SimulationEstimate, SimulationOptions
from tasim.sim.streams import (
    FEEDBACK_DERIVATION,
    partition_sizes,
    sample_gamma,
    spawn_feedback_streams,
    spawn_streams,
    stream_metadata,
)
from tasim.special.functions import gaussian_q

logger = logging.getLogger(__name__)

FEEDBACK_MAPPING = "k = ceil(log2 L) index bits flip independently with probability pe; corrupted index taken modulo L"
CORRELATION_MODEL = (
    "alpha_l = (gamma~_l/m)/2 * sum of 2m squared standard normals; normals of different links "
    "share a common component with correlation sqrt(rho), giving power correlation rho"
)

Statistic = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SimulationError(Exception):
    """Error raised for invalid Monte Carlo runs."""
    pass


class UnsupportedConfigurationError(SimulationError):
    """Error raised when a scenario is outside what a simulation mode supports."""
    pass


def feedback_bits(L: int) -> int:
    """Number of bits used to report an antenna index: ceil(log2 L)."""
    return math.ceil(math.log2(L)) if L > 1 else 0


def feedback_corrupt(r, L: int, pe: float, rng: np.random.Generator):
    """
    Pass antenna indices through a binary symmetric feedback channel.

    Each of the k = ceil(log2 L) bits flips with probability pe; the
    corrupted value is mapped back into range modulo L.

    Args:
        r: 0-based index or array of indices
        L: Number of antennas
        pe: Bit-error probability in [0, 1)
        rng: Generator the flips are drawn from (nothing is drawn when pe = 0)

    Returns:
        Received index (same shape as r)
    """
    k = feedback_bits(L)
    if pe <= 0 or k == 0:
        return r
    indices = np.asarray(r)
    flips = rng.random(indices.shape + (k,)) < pe
    mask = (flips * (1 << np.arange(k))).sum(axis=-1)
    received = (indices ^ mask) % L
    return int(received) if np.ndim(r) == 0 else received


def correlated_shadow_draw(cfg: ChannelConfig, rho: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Shadowing powers with pairwise power correlation rho between links.

    Args:
        cfg: Scenario pinned to one SNR point; all m_alpha must be equal
        rho: Power correlation in [0, 1)
        rng: Generator to draw from
        size: Number of trials

    Returns:
        Array of shape (size, L); column l is Gamma(m, gamma~_l/m)

    Raises:
        UnsupportedConfigurationError: If the shadowing shapes differ
    """
    shapes = set(cfg.shadow_shapes)
    if len(shapes) != 1:
        raise UnsupportedConfigurationError(
            f"Correlated shadowing needs equal m_alpha on all links, got {list(cfg.m_alpha)}"
        )
    if not 0 <= rho < 1:
        raise SimulationError(f"rho must be in [0, 1), got {rho}")
    m = shapes.pop()
    normal_corr = math.sqrt(rho)
    common = rng.standard_normal((size, 2 * m))
    own = rng.standard_normal((size, 2 * m, cfg.L))
    z = math.sqrt(normal_corr) * common[:, :, None] + math.sqrt(1 - normal_corr) * own
    scales = np.asarray(cfg.mean_snrs) / m
    return 0.5 * np.square(z).sum(axis=1) * scales


def _draw_alpha(cfg: ChannelConfig, opts: SimulationOptions, rng: np.random.Generator, n: int) -> np.ndarray:
    if opts.rho > 0:
        return correlated_shadow_draw(cfg, opts.rho, rng, n)
    return np.column_stack([
        sample_gamma(m, g / m, rng, n) for m, g in zip(cfg.shadow_shapes, cfg.mean_snrs)
    ])


def draw_trials(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    rng: np.random.Generator,
    n: int,
    feedback_rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Draw n trials.

    Args:
        cfg: Scenario pinned to one SNR point
        opts: Policy, pe and rho
        rng: Stream for the channel draws and random antenna indices
        n: Number of trials
        feedback_rng: Stream for feedback bit flips (default: rng)

    Returns:
        (0-based index of the antenna actually used, received SNR) arrays
    """
    alpha = _draw_alpha(cfg, opts, rng, n)
    beta = np.column_stack([sample_gamma(m, 1.0 / m, rng, n) for m in cfg.m_beta])
    rows = np.arange(n)

    if opts.policy == Policy.SSI:
        selected = np.argmax(alpha, axis=1)  # first maximum on ties
        selected = feedback_corrupt(selected, cfg.L, opts.pe, rng if feedback_rng is None else feedback_rng)
        return selected, alpha[rows, selected] * beta[rows, selected]

    selected = rng.integers(0, cfg.L, n)
    if opts.policy == Policy.RANDOM:
        return selected, alpha[rows, selected] * beta[rows, selected]
    mean_snrs = np.asarray(cfg.mean_snrs)
    return selected, mean_snrs[selected] * beta[rows, selected]


def draw_trial(cfg: ChannelConfig, opts: SimulationOptions, rng: np.random.Generator) -> tuple[int, float]:
    """Single trial: (0-based antenna index, received SNR)."""
    selected, gamma = draw_trials(cfg, opts, rng, 1)
    return int(selected[0]), float(gamma[0])


@dataclass
class Accumulator:
    """
    Running sums of a (possibly vector-valued) per-trial statistic.

    Partial sums are kept per chunk and combined with exactly rounded
    summation, so merging is commutative and associative bit for bit.
    """
    partial_sums: list[np.ndarray] = field(default_factory=list)
    partial_squares: list[np.ndarray] = field(default_factory=list)
    count: int = 0

    def add(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.partial_sums.append(values.sum(axis=0))
        self.partial_squares.append(np.square(values).sum(axis=0))
        self.count += values.shape[0]

    def merge(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(
            self.partial_sums + other.partial_sums,
            self.partial_squares + other.partial_squares,
            self.count + other.count,
        )

    @staticmethod
    def _exact(partials: list[np.ndarray]) -> np.ndarray:
        stacked = np.vstack(partials)
        return np.array([math.fsum(column) for column in stacked.T])

    @property
    def total(self) -> np.ndarray:
        return self._exact(self.partial_sums)

    @property
    def total_sq(self) -> np.ndarray:
        return self._exact(self.partial_squares)

    def mean(self) -> np.ndarray:
        if self.count == 0:
            raise SimulationError("No trials accumulated")
        return self.total / self.count

    def stderr(self, proportion: bool = False) -> np.ndarray:
        """Standard error of the mean: sqrt(p(1-p)/n) for proportions, s/sqrt(n) otherwise."""
        n = self.count
        mean = self.mean()
        if proportion:
            return np.sqrt(mean * (1 - mean) / n)
        variance = np.maximum(self.total_sq - n * mean ** 2, 0.0) / (n - 1)
        return np.sqrt(variance / n)


def run_partition(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    rng: np.random.Generator,
    trials: int,
    statistic: Statistic,
    feedback_rng: Optional[np.random.Generator] = None,
) -> Accumulator:
    """Accumulate statistic(selected, gamma) over trials drawn in chunks from one stream."""
    accumulator = Accumulator()
    remaining = trials
    while remaining > 0:
        n = min(opts.chunk_size, remaining)
        selected, gamma = draw_trials(cfg, opts, rng, n, feedback_rng)
        accumulator.add(statistic(selected, gamma))
        remaining -= n
    return accumulator


def check_run(cfg: ChannelConfig, opts: SimulationOptions) -> None:
    """Reject invalid options, unpinned sweeps and unsupported correlation set-ups."""
    errors = opts.validate()
    if errors:
        raise SimulationError("; ".join(errors))
    if cfg.is_sweep:
        raise SimulationError("Scenario holds an SNR sweep; pin a point with at_snr() first")
    if opts.rho > 0 and len(set(cfg.shadow_shapes)) != 1:
        raise UnsupportedConfigurationError(
            f"Correlated shadowing needs equal m_alpha on all links, got {list(cfg.m_alpha)}"
        )


def run_partitions(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    statistic: Statistic,
    max_workers: Optional[int] = None,
) -> Accumulator:
    """
    Run all partitions, in parallel when max_workers allows, and merge them in order.

    Raises:
        SimulationError: If the options are invalid
        UnsupportedConfigurationError: If rho > 0 with unequal m_alpha
    """
    check_run(cfg, opts)
    sizes = partition_sizes(opts.trials, opts.partitions)
    jobs = list(zip(
        spawn_streams(opts.seed, opts.partitions),
        spawn_feedback_streams(opts.seed, opts.partitions),
        sizes,
    ))
    logger.debug(f"Running {opts.trials} trials in partitions of {sizes}")

    workers = max(1, min(max_workers or 1, opts.partitions))
    if workers == 1:
        results = [run_partition(cfg, opts, rng, n, statistic, flips) for rng, flips, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda job: run_partition(cfg, opts, job[0], job[2], statistic, job[1]), jobs))

    merged = Accumulator()
    for result in results:
        merged = merged.merge(result)
    return merged


def run_metadata(cfg: ChannelConfig, opts: SimulationOptions) -> dict:
    """Everything needed to reproduce a run, including the modelling interpretations used."""
    metadata = stream_metadata(opts.seed, opts.partitions)
    metadata.update({
        "trials": opts.trials,
        "chunk_size": opts.chunk_size,
        "policy": opts.policy.value,
        "pe": opts.pe,
        "rho": opts.rho,
    })
    if opts.pe > 0 and opts.policy == Policy.SSI:
        metadata["feedback_mapping"] = FEEDBACK_MAPPING
        metadata["feedback_derivation"] = FEEDBACK_DERIVATION
    if opts.rho > 0:
        metadata["correlation_model"] = CORRELATION_MODEL
    return metadata


def _estimate(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    statistic: Statistic,
    proportion: bool,
    max_workers: Optional[int],
) -> SimulationEstimate:
    accumulator = run_partitions(cfg, opts, statistic, max_workers)
    value = float(accumulator.mean()[0])
    stderr = float(accumulator.stderr(proportion)[0])
    return SimulationEstimate(value, stderr, accumulator.count, opts.seed, opts.policy, run_metadata(cfg, opts))


def estimate_outage(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    gamma_th: float,
    max_workers: Optional[int] = None,
) -> SimulationEstimate:
    """Fraction of trials with received SNR below gamma_th."""
    return _estimate(cfg, opts, lambda _, gamma: gamma < gamma_th, True, max_workers)


def estimate_sep(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    mod: Optional[Modulation] = None,
    max_workers: Optional[int] = None,
) -> SimulationEstimate:
    """
    Semi-analytic SEP: the sample mean of a Q(sqrt(2 b gamma)).

    Raises:
        SimulationError: If no modulation is given or configured
    """
    mod = mod or cfg.modulation
    if mod is None:
        raise SimulationError("No modulation given and the scenario defines none")
    a, b = mod.a, mod.b
    return _estimate(cfg, opts, lambda _, gamma: a * gaussian_q(np.sqrt(2 * b * gamma)), False, max_workers)


def estimate_moments(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    p: int,
    max_workers: Optional[int] = None,
) -> SimulationEstimate:
    """Sample p-th moment of the received SNR."""
    if isinstance(p, bool) or not float(p).is_integer() or p < 1:
        raise SimulationError(f"Moment order must be a positive integer, got {p}")
    return _estimate(cfg, opts, lambda _, gamma: gamma ** int(p), False, max_workers)


def estimate_selection_frequencies(
    cfg: ChannelConfig,
    opts: SimulationOptions,
    max_workers: Optional[int] = None,
) -> list[SimulationEstimate]:
    """Empirical frequency with which each antenna is used, one estimate per antenna."""
    L = cfg.L
    accumulator = run_partitions(
        cfg, opts, lambda selected, _: np.eye(L)[selected], max_workers
    )
    means = accumulator.mean()
    errors = accumulator.stderr(proportion=True)
    metadata = run_metadata(cfg, opts)
    return [
        SimulationEstimate(float(means[r]), float(errors[r]), accumulator.count, opts.seed, opts.policy, metadata)
        for r in range(L)
    ]

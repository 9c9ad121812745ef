"""Deterministic random streams for partitioned Monte Carlo runs.

A run with master seed S and P partitions gives partition i the generator
PCG64(SeedSequence(S).spawn(P)[i]). The trials are split as evenly as
possible, with the remainder going to the first partitions. Feedback bit
flips use a separate generator per partition, PCG64 of the first child of
that partition's SeedSequence, so they never shift the channel draws.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)

STREAM_DERIVATION = "numpy SeedSequence(seed).spawn(partitions)[i] -> PCG64"
FEEDBACK_DERIVATION = "numpy SeedSequence(seed).spawn(partitions)[i].spawn(1)[0] -> PCG64"


def partition_sizes(trials: int, partitions: int) -> list[int]:
    """
    Split trials across partitions.

    Raises:
        ValueError: If partitions < 1 or trials < partitions
    """
    if partitions < 1:
        raise ValueError(f"partitions must be >= 1, got {partitions}")
    if trials < partitions:
        raise ValueError(f"Cannot split {trials} trials over {partitions} partitions")
    base, remainder = divmod(trials, partitions)
    return [base + (1 if i < remainder else 0) for i in range(partitions)]


def spawn_streams(seed: int, partitions: int) -> list[np.random.Generator]:
    """Independent generators, one per partition, derived from the master seed."""
    children = np.random.SeedSequence(seed).spawn(partitions)
    logger.debug(f"Spawned {partitions} stream(s) from seed {seed}")
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def spawn_feedback_streams(seed: int, partitions: int) -> list[np.random.Generator]:
    """Feedback-flip generators, one per partition, independent of the trial streams."""
    children = np.random.SeedSequence(seed).spawn(partitions)
    return [np.random.Generator(np.random.PCG64(child.spawn(1)[0])) for child in children]


def stream_metadata(seed: int, partitions: int) -> dict:
    """Reproducibility record for a run."""
    return {
        "seed": seed,
        "partitions": partitions,
        "derivation": STREAM_DERIVATION,
        "spawn_keys": [list(child.spawn_key) for child in np.random.SeedSequence(seed).spawn(partitions)],
    }


def sample_gamma(shape: float, scale: float, rng: np.random.Generator, size=None):
    """
    Gamma variates with the given shape and scale (mean shape * scale).

    Raises:
        ValueError: If shape or scale is not positive
    """
    if not shape > 0 or not scale > 0:
        raise ValueError(f"Gamma shape and scale must be positive, got shape={shape}, scale={scale}")
    return rng.gamma(shape, scale, size)

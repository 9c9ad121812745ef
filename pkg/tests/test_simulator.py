"""Tests for the Monte Carlo engine and its random streams."""

import math

import numpy as np
import pytest
from scipy import stats

from tasim.analysis import closed_form, expansion
from tasim.models import ChannelConfig, Modulation, ModulationFamily, Policy, SelectionModel, SimulationOptions
from tasim.sim import monte_carlo
from tasim.sim.monte_carlo import (
    Accumulator,
    SimulationError,
    UnsupportedConfigurationError,
    feedback_bits,
    feedback_corrupt,
)
from tasim.sim.streams import (
    partition_sizes,
    sample_gamma,
    spawn_feedback_streams,
    spawn_streams,
    stream_metadata,
)
from tasim.special.functions import reg_lower_gamma

BPSK = Modulation(ModulationFamily.BPSK)


def _within(estimate, expected: float, sigmas: float = 4.0):
    assert abs(estimate.value - expected) <= sigmas * estimate.stderr + 1e-12, (
        f"{estimate.value} vs {expected} (stderr {estimate.stderr})"
    )


class TestStreams:
    """Tests for partitioned random streams."""

    def test_partition_sizes(self):
        assert partition_sizes(10, 3) == [4, 3, 3]
        assert sum(partition_sizes(1_000_003, 8)) == 1_000_003

    def test_partition_errors(self):
        with pytest.raises(ValueError, match="partitions"):
            partition_sizes(10, 0)
        with pytest.raises(ValueError, match="Cannot split"):
            partition_sizes(2, 3)

    def test_streams_are_reproducible(self):
        first = [rng.random(3) for rng in spawn_streams(42, 2)]
        second = [rng.random(3) for rng in spawn_streams(42, 2)]
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)
        assert not np.array_equal(first[0], first[1])

    def test_metadata(self):
        meta = stream_metadata(5, 3)
        assert meta["seed"] == 5
        assert meta["partitions"] == 3
        assert meta["spawn_keys"] == [[0], [1], [2]]
        assert "SeedSequence" in meta["derivation"]

    def test_sample_gamma_moments(self):
        rng = np.random.default_rng(1)
        draws = sample_gamma(2.0, 1.5, rng, 200_000)
        assert draws.mean() == pytest.approx(3.0, rel=0.01)

    def test_feedback_streams_are_separate_and_reproducible(self):
        trials = [rng.random(3) for rng in spawn_streams(42, 2)]
        flips = [rng.random(3) for rng in spawn_feedback_streams(42, 2)]
        again = [rng.random(3) for rng in spawn_feedback_streams(42, 2)]
        for a, b in zip(flips, again):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(trials, flips):
            assert not np.array_equal(a, b)

    def test_sample_gamma_passes_ks_against_regularized_gamma(self):
        shape, scale = 2.5, 0.8
        draws = sample_gamma(shape, scale, np.random.default_rng(17), 100_000)
        cdf = np.vectorize(lambda x: reg_lower_gamma(shape, x / scale))
        assert stats.kstest(draws, cdf).pvalue > 0.01

    def test_sample_gamma_rejects_bad_parameters(self):
        with pytest.raises(ValueError, match="positive"):
            sample_gamma(0.0, 1.0, np.random.default_rng(0))


class TestFeedback:
    """Tests for the feedback bit-error channel."""

    @pytest.mark.parametrize("L, bits", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3)])
    def test_bits(self, L, bits):
        assert feedback_bits(L) == bits

    def test_error_free_channel_draws_nothing(self):
        rng = np.random.default_rng(0)
        state = rng.bit_generator.state
        indices = np.array([0, 1, 2])
        assert feedback_corrupt(indices, 3, 0.0, rng) is indices
        assert rng.bit_generator.state == state

    def test_scalar_index(self):
        received = feedback_corrupt(1, 4, 0.5, np.random.default_rng(3))
        assert isinstance(received, int)
        assert 0 <= received < 4

    def test_modulo_mapping_rates(self):
        """With L=3 and pe=0.1, index 0 survives with 0.82 and indices 1, 2 with 0.81."""
        rng = np.random.default_rng(11)
        n = 200_000
        for r, expected in [(0, 0.82), (1, 0.81), (2, 0.81)]:
            received = feedback_corrupt(np.full(n, r), 3, 0.1, rng)
            assert np.all(received < 3)
            assert np.mean(received == r) == pytest.approx(expected, abs=0.004)


class TestAccumulator:
    """Tests for exact, order-independent accumulation."""

    def test_merge_is_order_independent(self):
        rng = np.random.default_rng(2)
        parts = []
        for _ in range(4):
            acc = Accumulator()
            acc.add(rng.random(1000) * 1e8)
            acc.add(rng.random(1000) * 1e-8)
            parts.append(acc)
        forward = parts[0].merge(parts[1]).merge(parts[2]).merge(parts[3])
        backward = parts[3].merge(parts[2]).merge(parts[1]).merge(parts[0])
        assert forward.total[0] == backward.total[0]
        assert forward.count == sum(part.count for part in parts) == 8000

    def test_vector_statistic(self):
        acc = Accumulator()
        acc.add(np.eye(2)[[0, 1, 1, 1]])
        np.testing.assert_allclose(acc.mean(), [0.25, 0.75])

    def test_empty(self):
        with pytest.raises(SimulationError, match="No trials"):
            Accumulator().mean()

    @pytest.mark.parametrize("metric", ["outage", "moment_p2"])
    def test_stderr_matches_bootstrap(self, metric):
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=0.0)
        rng = np.random.default_rng(31)
        _, gamma = monte_carlo.draw_trials(cfg, SimulationOptions(), rng, 20_000)
        if metric == "outage":
            values, proportion = (gamma < 1.0).astype(float), True
            expected = closed_form.outage(cfg, 1.0).value
        else:
            values, proportion = gamma ** 2, False
            expected = closed_form.moment(cfg, 2).value
        acc = Accumulator()
        acc.add(values)
        stderr = float(acc.stderr(proportion)[0])

        resamples = rng.integers(0, values.size, (200, values.size))
        bootstrap = values[resamples].mean(axis=1)
        assert stderr == pytest.approx(bootstrap.std(ddof=1), rel=0.2)
        assert bootstrap.min() - stderr <= expected <= bootstrap.max() + stderr


class TestRuns:
    """Tests for reproducibility and option handling."""

    def test_same_seed_same_estimate(self):
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=10.0)
        opts = SimulationOptions(trials=20_000, seed=9, partitions=4)
        first = monte_carlo.estimate_outage(cfg, opts, 1.0)
        second = monte_carlo.estimate_outage(cfg, opts, 1.0, max_workers=4)
        assert first.value == second.value
        assert first.stderr == second.stderr
        assert first.trials == 20_000

    def test_error_free_feedback_is_bit_exact(self):
        cfg = ChannelConfig.iid(3, 1, 1.0, snr_db=10.0)
        default = monte_carlo.estimate_sep(cfg, SimulationOptions(trials=20_000, seed=2), BPSK)
        explicit = monte_carlo.estimate_sep(cfg, SimulationOptions(trials=20_000, seed=2, pe=0.0), BPSK)
        assert (default.value, default.stderr) == (explicit.value, explicit.stderr)

    def test_feedback_errors_ignored_for_single_antenna(self):
        cfg = ChannelConfig.iid(1, 1, 1.0, snr_db=10.0)
        clean = monte_carlo.estimate_sep(cfg, SimulationOptions(trials=20_000, seed=1), BPSK)
        noisy = monte_carlo.estimate_sep(cfg, SimulationOptions(trials=20_000, seed=1, pe=0.2), BPSK)
        assert clean.value == noisy.value

    def test_sweep_must_be_pinned(self):
        from tasim.models import SweepSpec
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=SweepSpec(0, 10, 5))
        with pytest.raises(SimulationError, match="sweep"):
            monte_carlo.estimate_outage(cfg, SimulationOptions(trials=10_000), 1.0)

    def test_invalid_options(self):
        cfg = ChannelConfig.iid(2, 1, 1.0)
        with pytest.raises(SimulationError, match="sim.trials"):
            monte_carlo.estimate_outage(cfg, SimulationOptions(trials=10), 1.0)

    def test_correlation_needs_equal_shadowing_shapes(self):
        cfg = ChannelConfig(2, [1, 2], [1, 1], [1, 1], 0.0)
        with pytest.raises(UnsupportedConfigurationError, match="equal m_alpha"):
            monte_carlo.estimate_outage(cfg, SimulationOptions(trials=10_000, rho=0.5), 1.0)

    def test_sep_needs_modulation(self):
        with pytest.raises(SimulationError, match="No modulation"):
            monte_carlo.estimate_sep(ChannelConfig.iid(2, 1, 1.0), SimulationOptions(trials=10_000))

    def test_moment_order(self):
        with pytest.raises(SimulationError, match="positive integer"):
            monte_carlo.estimate_moments(ChannelConfig.iid(2, 1, 1.0), SimulationOptions(trials=10_000), 0)

    def test_metadata_records_interpretations(self):
        cfg = ChannelConfig.iid(3, 1, 1.0)
        meta = monte_carlo.run_metadata(cfg, SimulationOptions(pe=0.1, rho=0.5, partitions=2))
        assert meta["feedback_mapping"] == monte_carlo.FEEDBACK_MAPPING
        assert "spawn(1)" in meta["feedback_derivation"]
        assert meta["correlation_model"] == monte_carlo.CORRELATION_MODEL
        assert meta["partitions"] == 2
        assert "feedback_mapping" not in monte_carlo.run_metadata(cfg, SimulationOptions())

    def test_draw_trial(self):
        cfg = ChannelConfig.iid(3, 1, 1.0)
        r, gamma = monte_carlo.draw_trial(cfg, SimulationOptions(), np.random.default_rng(0))
        assert 0 <= r < 3
        assert gamma > 0


class TestAgreementWithClosedForms:
    """Monte Carlo estimates agree with the exact expressions within 4 standard errors."""

    def test_outage_iid(self):
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=10.0)
        estimate = monte_carlo.estimate_outage(cfg, SimulationOptions(trials=200_000, seed=1, partitions=4), 1.0)
        _within(estimate, closed_form.outage(cfg, 1.0).value)

    def test_outage_follows_the_joint_law(self):
        cfg = ChannelConfig(2, [3, 2], [2.0, 3.0], [1, 1], 5.0)
        estimate = monte_carlo.estimate_outage(cfg, SimulationOptions(trials=200_000, seed=2, partitions=4), 1.0)
        _within(estimate, closed_form.outage(cfg, 1.0, SelectionModel.JOINT).value)

    def test_sep_follows_the_joint_law(self):
        cfg = ChannelConfig(3, [1, 2, 1], [2.0, 3.0, 1.0], [1.0, 0.5, 2.0], 10.0)
        estimate = monte_carlo.estimate_sep(cfg, SimulationOptions(trials=200_000, seed=3, partitions=4), BPSK)
        _within(estimate, closed_form.sep(cfg, BPSK, SelectionModel.JOINT).value)

    def test_moments(self):
        cfg = ChannelConfig.iid(2, 2, 2.0, snr_db=0.0)
        opts = SimulationOptions(trials=200_000, seed=4)
        for p in (1, 2):
            _within(monte_carlo.estimate_moments(cfg, opts, p), closed_form.moment(cfg, p).value)

    def test_selection_frequencies(self):
        cfg = ChannelConfig(3, [1, 2, 1], [1, 1, 1], [1.0, 0.5, 2.0], 0.0)
        estimates = monte_carlo.estimate_selection_frequencies(cfg, SimulationOptions(trials=100_000, seed=5))
        for estimate, expected in zip(estimates, expansion.selection_probabilities(cfg)):
            _within(estimate, expected)
        assert math.fsum(e.value for e in estimates) == pytest.approx(1.0, abs=1e-12)

    def test_random_policy(self):
        cfg = ChannelConfig(2, [1, 2], [1.5, 2.0], [1.0, 0.5], 5.0)
        estimate = monte_carlo.estimate_outage(
            cfg, SimulationOptions(trials=200_000, seed=6, policy=Policy.RANDOM), 1.0
        )
        singles = [
            closed_form.outage(ChannelConfig(1, [m_a], [m_b], [w], 5.0), 1.0).value
            for m_a, m_b, w in zip(cfg.m_alpha, cfg.m_beta, cfg.omega)
        ]
        _within(estimate, sum(singles) / 2)
        assert estimate.policy == Policy.RANDOM

    def test_random_unshadowed_policy(self):
        cfg = ChannelConfig(2, [1, 1], [1.5, 2.0], [1.0, 0.5], 5.0)
        estimate = monte_carlo.estimate_outage(
            cfg, SimulationOptions(trials=200_000, seed=7, policy=Policy.RANDOM_UNSHADOWED), 1.0
        )
        expected = sum(reg_lower_gamma(m, m * 1.0 / g) for m, g in zip(cfg.m_beta, cfg.mean_snrs)) / 2
        _within(estimate, expected)


class TestImpairments:
    """Feedback errors and correlated shadowing degrade the selection gain."""

    def test_flipped_trials_are_nested_across_pe(self):
        cfg = ChannelConfig.iid(4, 1, 1.0, snr_db=10.0)

        def draw(pe):
            opts = SimulationOptions(pe=pe)
            return monte_carlo.draw_trials(cfg, opts, np.random.default_rng(21), 50_000, np.random.default_rng(22))

        clean, clean_gamma = draw(0.0)
        low, _ = draw(0.01)
        high, high_gamma = draw(0.1)
        flipped_low, flipped_high = low != clean, high != clean
        assert flipped_low.any()
        assert np.all(flipped_high[flipped_low])
        np.testing.assert_array_equal(high_gamma[~flipped_high], clean_gamma[~flipped_high])

    def test_sep_increases_with_feedback_errors(self):
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=20.0)
        values = [
            monte_carlo.estimate_sep(cfg, SimulationOptions(trials=400_000, seed=8, pe=pe), BPSK).value
            for pe in (0.0, 1e-3, 1e-2, 1e-1)
        ]
        assert values == sorted(values)
        assert len(set(values)) == 4

    def test_correlated_marginals(self):
        cfg = ChannelConfig(2, [2, 2], [1, 1], [1.0, 0.5], 10.0)
        alpha = monte_carlo.correlated_shadow_draw(cfg, 0.6, np.random.default_rng(12), 200_000)
        np.testing.assert_allclose(alpha.mean(axis=0), cfg.mean_snrs, rtol=0.01)
        assert np.corrcoef(alpha.T)[0, 1] == pytest.approx(0.6, abs=0.01)

    def test_strong_correlation_removes_the_selection_gain(self):
        # 0 dB: the outage is set by the bulk of the shadowing law. At 20 dB the
        # deep-fade tail leaves rho = 0.99 about 18% below a single antenna.
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=0.0)
        estimates = [
            monte_carlo.estimate_outage(cfg, SimulationOptions(trials=200_000, seed=13, rho=rho), 1.0)
            for rho in (0.0, 0.5, 0.9, 0.99)
        ]
        for lower, higher in zip(estimates, estimates[1:]):
            assert higher.value >= lower.value - 2 * higher.stderr
        single = closed_form.outage(ChannelConfig.iid(1, 1, 1.0, snr_db=0.0), 1.0).value
        assert estimates[-1].value == pytest.approx(single, rel=0.15)


class TestSweepConcordance:
    """Monte Carlo follows the closed forms across SNR sweeps."""

    @pytest.mark.parametrize("snr_db", [0.0, 10.0, 20.0, 30.0, 40.0])
    def test_outage_exponential_pair(self, snr_db):
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=snr_db)
        estimate = monte_carlo.estimate_outage(cfg, SimulationOptions(trials=400_000, seed=41, partitions=4), 1.0)
        _within(estimate, closed_form.outage(cfg, 1.0).value)

    # above 20 dB the SEP comes from fades rarer than one in a million trials
    @pytest.mark.parametrize("snr_db", [0.0, 5.0, 10.0, 15.0, 20.0])
    def test_sep_three_antennas_nakagami_fading(self, snr_db):
        cfg = ChannelConfig.iid(3, 1, 4.0, snr_db=snr_db)
        estimate = monte_carlo.estimate_sep(
            cfg, SimulationOptions(trials=1_000_000, seed=42, partitions=4), BPSK, max_workers=4
        )
        _within(estimate, closed_form.sep(cfg, BPSK).value)

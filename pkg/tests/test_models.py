"""Tests for core data models."""

import math

import pytest

from tasim.models import (
    AsymptoticConfig,
    ChannelConfig,
    Method,
    Modulation,
    ModulationFamily,
    Policy,
    SimulationOptions,
    SweepRow,
    SweepSpec,
)


class TestSweepSpec:
    """Tests for the dB sweep grid."""

    def test_inclusive_grid(self):
        assert SweepSpec(0, 10, 5).grid() == [0.0, 5.0, 10.0]

    def test_grid_never_exceeds_stop(self):
        assert SweepSpec(0, 9, 5).grid() == [0.0, 5.0]

    def test_start_equals_stop_gives_single_point(self):
        assert SweepSpec(20, 20, 5).grid() == [20.0]

    def test_fractional_step_has_no_drift(self):
        grid = SweepSpec(0, 1, 0.1).grid()
        assert len(grid) == 11
        assert grid[-1] == 1.0

    def test_invalid_step(self):
        errors = SweepSpec(0, 10, 0).validate()
        assert any("step" in e for e in errors)
        with pytest.raises(ValueError, match="step"):
            SweepSpec(0, 10, -1).grid()

    def test_start_after_stop(self):
        assert any("start" in e for e in SweepSpec(10, 0, 1).validate())


class TestModulation:
    """Tests for modulation constants and parsing."""

    def test_bpsk_constants(self):
        mod = Modulation.parse("bpsk")
        assert (mod.a, mod.b) == (1.0, 1.0)
        assert mod.M == 2
        assert not mod.approximate

    def test_bfsk_constants(self):
        mod = Modulation.parse("BFSK")
        assert (mod.a, mod.b) == (1.0, 0.5)

    def test_pam(self):
        mod = Modulation.parse("pam:4")
        # a = 2(M-1)/M, b = 3/(M^2-1)
        assert mod.a == pytest.approx(1.5)
        assert mod.b == pytest.approx(0.2)

    def test_psk_is_approximate(self):
        mod = Modulation.parse("psk:8")
        assert mod.a == 2.0
        assert mod.b == pytest.approx(math.sin(math.pi / 8) ** 2)
        assert mod.approximate

    def test_qam(self):
        mod = Modulation.parse("qam:16")
        # a = 4 - 4/sqrt(M), b = 1.5/(M-1)
        assert mod.a == pytest.approx(3.0)
        assert mod.b == pytest.approx(0.1)
        assert mod.label == "qam:16"

    def test_binary_family_ignores_size(self):
        assert Modulation(ModulationFamily.BPSK, 8).M == 2

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="Unknown modulation"):
            Modulation.parse("ook")

    def test_missing_size(self):
        with pytest.raises(ValueError, match="constellation size"):
            Modulation.parse("psk")

    def test_non_integer_size(self):
        with pytest.raises(ValueError, match="integer"):
            Modulation.parse("qam:x")

    def test_size_must_be_power_of_two(self):
        assert Modulation(ModulationFamily.PSK, 6).validate()
        assert Modulation(ModulationFamily.QAM, 2).validate()
        assert Modulation(ModulationFamily.QAM, 64).validate() == []


class TestChannelConfig:
    """Tests for scenario validation and derived quantities."""

    def test_valid_scenario(self):
        cfg = ChannelConfig(3, [1, 1, 1], [2, 3, 1], [1, 1, 1], 20.0)
        assert cfg.validate() == []
        assert cfg.m_alpha == (1, 1, 1)

    def test_non_integer_shadowing_shape(self):
        cfg = ChannelConfig(2, [1.5, 1], [1, 1], [1, 1], 0.0)
        assert any("m_alpha[0]" in e for e in cfg.validate())

    def test_fading_shape_below_half(self):
        cfg = ChannelConfig(2, [1, 1], [0.4, 1], [1, 1], 0.0)
        assert any("m_beta[0]" in e for e in cfg.validate())

    def test_non_positive_omega(self):
        cfg = ChannelConfig(2, [1, 1], [1, 1], [1, 0], 0.0)
        assert any("omega[1]" in e for e in cfg.validate())

    def test_length_mismatch(self):
        cfg = ChannelConfig(3, [1, 1], [1, 1, 1], [1, 1, 1], 0.0)
        assert cfg.validate() == ["m_alpha must have length L=3, got 2"]

    def test_invalid_L(self):
        assert "L must be" in ChannelConfig(0, [], [], [], 0.0).validate()[0]

    def test_non_finite_branch_snr(self):
        cfg = ChannelConfig(1, [1], [1], [1], 4000.0)
        assert any("not finite" in e for e in cfg.validate())

    def test_mean_snrs(self):
        cfg = ChannelConfig(2, [1, 2], [1, 1], [1.0, 0.5], 10.0)
        assert cfg.mean_snrs == pytest.approx((10.0, 5.0))

    def test_sweep_points_and_pinning(self):
        cfg = ChannelConfig.iid(2, 1, 1.0, snr_db=SweepSpec(0, 20, 10))
        assert cfg.is_sweep
        assert cfg.snr_points() == [0.0, 10.0, 20.0]
        with pytest.raises(ValueError, match="sweep"):
            cfg.snr_linear
        assert cfg.at_snr(10.0).snr_linear == pytest.approx(10.0)

    def test_iid_constructor(self):
        cfg = ChannelConfig.iid(4, 2, 3.0, omega=2.0, snr_db=5.0)
        assert cfg.m_alpha == (2, 2, 2, 2)
        assert cfg.m_beta == (3.0,) * 4
        assert cfg.omega == (2.0,) * 4

    def test_nested_options_are_validated(self):
        cfg = ChannelConfig(
            1, [1], [1], [1], 0.0,
            modulation=Modulation(ModulationFamily.QAM, 6),
            sim=SimulationOptions(trials=10),
        )
        errors = cfg.validate()
        assert any("modulation.M" in e for e in errors)
        assert any("sim.trials" in e for e in errors)


class TestAsymptoticConfig:
    """Tests for the high-SNR reference."""

    def test_default_reference(self):
        cfg = ChannelConfig(2, [1, 1], [1, 1], [1.0, 0.5], 20.0)
        asym = AsymptoticConfig.default_for(cfg)
        assert asym.gamma_bar == pytest.approx(100.0)
        assert asym.kappa == pytest.approx((1.0, 2.0))
        assert asym.validate(cfg) == []

    def test_inconsistent_kappa(self):
        cfg = ChannelConfig(2, [1, 1], [1, 1], [1.0, 0.5], 20.0)
        errors = AsymptoticConfig((1.0, 1.0), 100.0).validate(cfg)
        assert any("kappa[1]" in e for e in errors)

    def test_wrong_length(self):
        cfg = ChannelConfig.iid(2, 1, 1.0)
        assert AsymptoticConfig((1.0,), 1.0).validate(cfg)

    def test_non_positive_values(self):
        errors = AsymptoticConfig((0.0,), -1.0).validate()
        assert len(errors) == 2


class TestSimulationOptions:
    """Tests for Monte Carlo options."""

    def test_defaults_are_valid(self):
        opts = SimulationOptions()
        assert opts.validate() == []
        assert opts.policy == Policy.SSI

    def test_policy_from_string(self):
        assert SimulationOptions(policy="random").policy == Policy.RANDOM

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"trials": 9999}, "sim.trials"),
            ({"seed": -1}, "sim.seed"),
            ({"rho": 1.0}, "sim.rho"),
            ({"pe": -0.1}, "sim.pe"),
            ({"partitions": 0}, "sim.partitions"),
        ],
    )
    def test_invalid_values(self, kwargs, field):
        errors = SimulationOptions(**kwargs).validate()
        assert len(errors) == 1
        assert field in errors[0]


class TestSweepRow:
    """Tests for the CSV row invariant."""

    def test_mc_requires_stderr(self):
        assert SweepRow(0.0, "outage", Method.MC, 0.1).validate()
        assert SweepRow(0.0, "outage", Method.MC, 0.1, 0.01, 10000).validate() == []

    def test_analytic_rows_have_no_stderr(self):
        assert SweepRow(0.0, "outage", Method.CLOSED, 0.1, 0.01).validate()
        assert SweepRow(0.0, "outage", Method.CLOSED, 0.1).validate() == []

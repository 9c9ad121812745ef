"""Tests for scenario parsing and serialization."""

import json

import pytest

from tasim.config import (
    ConfigError,
    ConfigParseError,
    ConfigValidationError,
    load_config,
    mean_branch_snr,
    parse_config,
    serialize_config,
)
from tasim.models import ModulationFamily, Policy, SweepSpec


def _doc(**overrides) -> str:
    data = {"L": 2, "m_alpha": [1, 2], "m_beta": [1.5, 2], "omega": [1, 0.5], "snr_db": 10}
    data.update(overrides)
    return json.dumps(data)


class TestParseConfig:
    """Tests for parse_config."""

    def test_minimal_document(self):
        cfg = parse_config(_doc())
        assert cfg.L == 2
        assert cfg.m_alpha == (1, 2)
        assert isinstance(cfg.m_alpha[0], int)
        assert cfg.m_beta == (1.5, 2.0)
        assert cfg.snr_db == 10.0
        assert cfg.modulation is None
        assert cfg.sim is None

    def test_full_document(self):
        cfg = parse_config(_doc(
            snr_db={"start": 0, "stop": 40, "step": 5},
            modulation={"family": "qam", "M": 16},
            sim={"trials": 100000, "seed": 9, "rho": 0.5, "pe": 0.01, "policy": "random", "partitions": 4},
        ))
        assert cfg.snr_db == SweepSpec(0.0, 40.0, 5.0)
        assert cfg.modulation.family == ModulationFamily.QAM
        assert cfg.modulation.M == 16
        assert cfg.sim.policy == Policy.RANDOM
        assert cfg.sim.partitions == 4
        assert cfg.sim.rho == 0.5

    def test_integral_float_shadowing_shape_becomes_int(self):
        cfg = parse_config(_doc(m_alpha=[1.0, 2.0]))
        assert cfg.m_alpha == (1, 2)

    def test_invalid_json(self):
        with pytest.raises(ConfigParseError, match="Invalid JSON"):
            parse_config("{not json")

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigParseError, match="Unknown key 'gain'"):
            parse_config(_doc(gain=3))

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigParseError, match="Unknown key 'seeds' in sim"):
            parse_config(_doc(sim={"seeds": 1}))

    def test_missing_key(self):
        data = json.loads(_doc())
        del data["omega"]
        with pytest.raises(ConfigParseError, match="Missing key 'omega'"):
            parse_config(json.dumps(data))

    def test_missing_sweep_key(self):
        with pytest.raises(ConfigParseError, match="snr_db.step"):
            parse_config(_doc(snr_db={"start": 0, "stop": 10}))

    def test_boolean_is_not_a_number(self):
        with pytest.raises(ConfigParseError, match="m_beta\\[0\\]"):
            parse_config(_doc(m_beta=[True, 1]))

    def test_unknown_policy(self):
        with pytest.raises(ConfigParseError, match="sim.policy"):
            parse_config(_doc(sim={"policy": "greedy"}))

    def test_invariant_violation_names_the_field(self):
        with pytest.raises(ConfigValidationError) as excinfo:
            parse_config(_doc(m_alpha=[1, 1.5], omega=[1, -1]))
        errors = excinfo.value.errors
        assert any("m_alpha[1]" in e for e in errors)
        assert any("omega[1]" in e for e in errors)

    def test_validation_error_is_a_config_error(self):
        with pytest.raises(ConfigError):
            parse_config(_doc(m_beta=[0.2, 1]))


class TestSerialization:
    """Tests for serialize_config round trips."""

    def test_round_trip_with_sweep_and_options(self):
        cfg = parse_config(_doc(
            snr_db={"start": 0, "stop": 20, "step": 2.5},
            modulation={"family": "psk", "M": 8},
            sim={"trials": 20000, "seed": 3},
        ))
        assert parse_config(serialize_config(cfg)) == cfg


class TestLoadConfig:
    """Tests for reading scenario files."""

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(_doc())
        assert load_config(str(path)).L == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigParseError, match="Cannot read"):
            load_config(str(tmp_path / "absent.json"))


class TestMeanBranchSnr:
    """Tests for mean_branch_snr."""

    def test_linear_value(self):
        cfg = parse_config(_doc())
        # omega_2 = 0.5 at 10 dB
        assert mean_branch_snr(cfg, 2) == pytest.approx(5.0)

    def test_index_out_of_range(self):
        cfg = parse_config(_doc())
        with pytest.raises(ConfigError, match="out of range"):
            mean_branch_snr(cfg, 3)

    def test_sweep_must_be_pinned(self):
        cfg = parse_config(_doc(snr_db={"start": 0, "stop": 10, "step": 5}))
        with pytest.raises(ConfigError, match="sweep"):
            mean_branch_snr(cfg, 1)

"""Scenario file parsing, serialization and derived per-link quantities.

The scenario is a strict JSON document::

    {"L": 2, "m_alpha": [1, 1], "m_beta": [1, 1], "omega": [1, 1],
     "snr_db": {"start": 0, "stop": 40, "step": 5},
     "modulation": {"family": "bpsk"},
     "sim": {"trials": 1000000, "seed": 1, "rho": 0, "pe": 0, "policy": "ssi"}}

Unknown keys are rejected at every level.
"""

import json
import logging
from typing import Any

from tasim.models import (
    ChannelConfig,
    Modulation,
    ModulationFamily,
    Policy,
    SimulationOptions,
    SweepSpec,
)
from tasim.util.math import db_to_linear

logger = logging.getLogger(__name__)

_TOP_KEYS = {"L", "m_alpha", "m_beta", "omega", "snr_db", "modulation", "sim"}
_REQUIRED_KEYS = ("L", "m_alpha", "m_beta", "omega", "snr_db")
_SWEEP_KEYS = {"start", "stop", "step"}
_MODULATION_KEYS = {"family", "M"}
_SIM_KEYS = {"trials", "seed", "rho", "pe", "policy", "partitions"}


class ConfigError(Exception):
    """Error raised for invalid scenario configuration."""
    pass


class ConfigParseError(ConfigError):
    """Error raised when the scenario document is malformed."""
    pass


class ConfigValidationError(ConfigError):
    """Error raised when a parsed scenario violates an invariant."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _number(value: Any, key: str) -> float:
    if not _is_number(value):
        raise ConfigParseError(f"'{key}' must be a number, got {value!r}")
    return value


def _integer(value: Any, key: str) -> int:
    if not _is_number(value) or not float(value).is_integer():
        raise ConfigParseError(f"'{key}' must be an integer, got {value!r}")
    return int(value)


def _number_list(value: Any, key: str) -> list:
    if not isinstance(value, list):
        raise ConfigParseError(f"'{key}' must be a list of numbers, got {value!r}")
    return [_number(item, f"{key}[{i}]") for i, item in enumerate(value)]


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigParseError(f"Unknown key '{unknown[0]}' in {where}")


def _object(value: Any, key: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigParseError(f"'{key}' must be an object, got {value!r}")
    return value


def _parse_snr(value: Any) -> float | SweepSpec:
    if _is_number(value):
        return float(value)
    section = _object(value, "snr_db")
    _reject_unknown(section, _SWEEP_KEYS, "snr_db")
    for key in ("start", "stop", "step"):
        if key not in section:
            raise ConfigParseError(f"Missing key 'snr_db.{key}'")
    return SweepSpec(
        start_db=float(_number(section["start"], "snr_db.start")),
        stop_db=float(_number(section["stop"], "snr_db.stop")),
        step_db=float(_number(section["step"], "snr_db.step")),
    )


def _parse_modulation(value: Any) -> Modulation:
    section = _object(value, "modulation")
    _reject_unknown(section, _MODULATION_KEYS, "modulation")
    if "family" not in section:
        raise ConfigParseError("Missing key 'modulation.family'")
    try:
        family = ModulationFamily(str(section["family"]).lower())
    except ValueError as e:
        raise ConfigParseError(f"'modulation.family' is not a known family: {section['family']!r}") from e
    M = _integer(section.get("M", 2), "modulation.M")
    return Modulation(family, M)


def _parse_sim(value: Any) -> SimulationOptions:
    section = _object(value, "sim")
    _reject_unknown(section, _SIM_KEYS, "sim")
    kwargs: dict[str, Any] = {}
    for key in ("trials", "seed", "partitions"):
        if key in section:
            kwargs[key] = _integer(section[key], f"sim.{key}")
    for key in ("rho", "pe"):
        if key in section:
            kwargs[key] = float(_number(section[key], f"sim.{key}"))
    if "policy" in section:
        try:
            kwargs["policy"] = Policy(str(section["policy"]).lower())
        except ValueError as e:
            raise ConfigParseError(f"'sim.policy' is not a known policy: {section['policy']!r}") from e
    return SimulationOptions(**kwargs)


def _shape(value: float) -> int | float:
    # integral shadowing shapes become ints; anything else is left for validation to flag
    return int(value) if float(value).is_integer() else value


def parse_config(text: str) -> ChannelConfig:
    """
    Parse and validate a scenario document.

    Args:
        text: JSON scenario document

    Returns:
        Validated ChannelConfig

    Raises:
        ConfigParseError: If the document is malformed (names the offending key)
        ConfigValidationError: If an invariant is violated (names field and constraint)
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"Invalid JSON scenario: {e}") from e

    data = _object(data, "scenario")
    _reject_unknown(data, _TOP_KEYS, "scenario")
    for key in _REQUIRED_KEYS:
        if key not in data:
            raise ConfigParseError(f"Missing key '{key}'")

    cfg = ChannelConfig(
        L=_integer(data["L"], "L"),
        m_alpha=tuple(_shape(m) for m in _number_list(data["m_alpha"], "m_alpha")),
        m_beta=tuple(float(m) for m in _number_list(data["m_beta"], "m_beta")),
        omega=tuple(float(w) for w in _number_list(data["omega"], "omega")),
        snr_db=_parse_snr(data["snr_db"]),
        modulation=_parse_modulation(data["modulation"]) if "modulation" in data else None,
        sim=_parse_sim(data["sim"]) if "sim" in data else None,
    )
    ensure_valid(cfg)
    logger.debug(f"Parsed scenario with L={cfg.L}, SNR points={len(cfg.snr_points())}")
    return cfg


def ensure_valid(cfg: ChannelConfig) -> ChannelConfig:
    """Raise ConfigValidationError unless every invariant holds."""
    errors = cfg.validate()
    if errors:
        raise ConfigValidationError(errors)
    return cfg


def load_config(path: str) -> ChannelConfig:
    """Read and parse a scenario file."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigParseError(f"Cannot read scenario file {path}: {e}") from e
    return parse_config(text)


def config_to_dict(cfg: ChannelConfig) -> dict[str, Any]:
    """Plain-data form of a scenario, suitable for JSON."""
    data: dict[str, Any] = {
        "L": cfg.L,
        "m_alpha": [int(m) for m in cfg.m_alpha],
        "m_beta": [float(m) for m in cfg.m_beta],
        "omega": [float(w) for w in cfg.omega],
    }
    if isinstance(cfg.snr_db, SweepSpec):
        data["snr_db"] = {"start": cfg.snr_db.start_db, "stop": cfg.snr_db.stop_db, "step": cfg.snr_db.step_db}
    else:
        data["snr_db"] = float(cfg.snr_db)
    if cfg.modulation is not None:
        data["modulation"] = {"family": cfg.modulation.family.value, "M": cfg.modulation.M}
    if cfg.sim is not None:
        data["sim"] = {
            "trials": cfg.sim.trials,
            "seed": cfg.sim.seed,
            "rho": cfg.sim.rho,
            "pe": cfg.sim.pe,
            "policy": cfg.sim.policy.value,
            "partitions": cfg.sim.partitions,
        }
    return data


def serialize_config(cfg: ChannelConfig) -> str:
    """Serialize a scenario; parse_config(serialize_config(cfg)) == cfg."""
    return json.dumps(config_to_dict(cfg), indent=2)


def mean_branch_snr(cfg: ChannelConfig, ell: int) -> float:
    """
    Mean SNR of link ell (1-based): omega_ell * Es/N0, linear scale.

    Raises:
        ConfigError: If ell is outside 1..L or the scenario holds a sweep
    """
    if not 1 <= ell <= cfg.L:
        raise ConfigError(f"Link index {ell} out of range 1..{cfg.L}")
    if cfg.is_sweep:
        raise ConfigError("Scenario holds an SNR sweep; pin a point with at_snr() first")
    return cfg.omega[ell - 1] * db_to_linear(cfg.snr_db)

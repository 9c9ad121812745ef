"""Core data models for shadowing-based transmit antenna selection analysis."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Any, Optional, Union

from tasim.util.math import db_to_linear, log_abs_fraction


class Method(str, Enum):
    """How a metric value was produced."""
    CLOSED = "closed"
    ASYMPTOTIC = "asymptotic"
    ORACLE = "oracle"
    MC = "mc"


class Policy(str, Enum):
    """Transmit antenna selection policy used by the simulator."""
    SSI = "ssi"
    RANDOM = "random"
    RANDOM_UNSHADOWED = "random_unshadowed"


class SelectionModel(str, Enum):
    """Law used for the shadowing seen by the selected antenna.

    INDEPENDENT treats the selected index and the largest shadowing
    coefficient as independent. JOINT keeps their exact joint law.
    """
    INDEPENDENT = "independent"
    JOINT = "joint"


class Regime(str, Enum):
    """High-SNR regime given by the sign of d_alpha - d_beta."""
    ALPHA_DOMINANT = "alpha_dominant"
    BALANCED = "balanced"
    BETA_DOMINANT = "beta_dominant"


class ZetaForm(str, Enum):
    """Which expression to use for the asymptotic coefficient."""
    EXACT = "exact"
    PRINTED = "printed"


class ModulationFamily(str, Enum):
    """Modulations whose conditional SEP is a*Q(sqrt(2*b*snr))."""
    BPSK = "bpsk"
    BFSK = "bfsk"
    PAM = "pam"
    PSK = "psk"
    QAM = "qam"


_BINARY_FAMILIES = (ModulationFamily.BPSK, ModulationFamily.BFSK)


@dataclass(frozen=True)
class SweepSpec:
    """Inclusive dB grid from start_db towards stop_db."""
    start_db: float
    stop_db: float
    step_db: float

    def validate(self) -> list[str]:
        errors = []
        if not self.step_db > 0:
            errors.append(f"snr_db.step must be positive, got {self.step_db}")
        if self.start_db > self.stop_db:
            errors.append(f"snr_db.start ({self.start_db}) must be <= snr_db.stop ({self.stop_db})")
        return errors

    def grid(self) -> list[float]:
        """SNR points in dB; never exceeds stop_db."""
        if self.validate():
            raise ValueError("; ".join(self.validate()))
        count = math.floor((self.stop_db - self.start_db) / self.step_db + 1e-9)
        return [round(self.start_db + i * self.step_db, 10) for i in range(count + 1)]


@dataclass(frozen=True)
class Modulation:
    """Modulation family with its SEP constants (a, b)."""
    family: ModulationFamily
    M: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", ModulationFamily(self.family))
        if self.family in _BINARY_FAMILIES:
            object.__setattr__(self, "M", 2)

    @classmethod
    def parse(cls, text: str) -> "Modulation":
        """Parse the CLI form: bpsk, bfsk, pam:M, psk:M or qam:M."""
        name, _, order = text.strip().lower().partition(":")
        try:
            family = ModulationFamily(name)
        except ValueError as e:
            raise ValueError(f"Unknown modulation family '{name}'") from e
        if family in _BINARY_FAMILIES:
            return cls(family)
        if not order:
            raise ValueError(f"Modulation '{name}' requires a constellation size, e.g. {name}:4")
        try:
            M = int(order)
        except ValueError as e:
            raise ValueError(f"Constellation size must be an integer, got '{order}'") from e
        return cls(family, M)

    def validate(self) -> list[str]:
        errors = []
        if self.family in _BINARY_FAMILIES:
            return errors
        minimum = 4 if self.family == ModulationFamily.QAM else 2
        if self.M < minimum or self.M & (self.M - 1):
            errors.append(f"modulation.M must be a power of two >= {minimum}, got {self.M}")
        return errors

    @property
    def a(self) -> float:
        match self.family:
            case ModulationFamily.BPSK | ModulationFamily.BFSK:
                return 1.0
            case ModulationFamily.PAM:
                return 2.0 * (self.M - 1) / self.M
            case ModulationFamily.PSK:
                return 2.0
            case ModulationFamily.QAM:
                return 4.0 - 4.0 / math.sqrt(self.M)

    @property
    def b(self) -> float:
        match self.family:
            case ModulationFamily.BPSK:
                return 1.0
            case ModulationFamily.BFSK:
                return 0.5
            case ModulationFamily.PAM:
                return 3.0 / (self.M ** 2 - 1)
            case ModulationFamily.PSK:
                return math.sin(math.pi / self.M) ** 2
            case ModulationFamily.QAM:
                return 1.5 / (self.M - 1)

    @property
    def approximate(self) -> bool:
        """M-PSK and M-QAM use the a*Q(.) approximation."""
        return self.family in (ModulationFamily.PSK, ModulationFamily.QAM)

    @property
    def label(self) -> str:
        if self.family in _BINARY_FAMILIES:
            return self.family.value
        return f"{self.family.value}:{self.M}"


@dataclass(frozen=True)
class SimulationOptions:
    """Monte Carlo run settings."""
    trials: int = 1_000_000
    seed: int = 0
    policy: Policy = Policy.SSI
    rho: float = 0.0  # shadowing power correlation
    pe: float = 0.0  # feedback bit-error probability
    partitions: int = 1
    chunk_size: int = 1 << 16

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))

    def validate(self) -> list[str]:
        errors = []
        if self.trials < 10_000:
            errors.append(f"sim.trials must be >= 10000, got {self.trials}")
        if not 0 <= self.seed < 2 ** 64:
            errors.append(f"sim.seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0.0 <= self.rho < 1.0:
            errors.append(f"sim.rho must be in [0, 1), got {self.rho}")
        if not 0.0 <= self.pe < 1.0:
            errors.append(f"sim.pe must be in [0, 1), got {self.pe}")
        if self.partitions < 1:
            errors.append(f"sim.partitions must be >= 1, got {self.partitions}")
        if self.chunk_size < 1:
            errors.append(f"sim.chunk_size must be >= 1, got {self.chunk_size}")
        return errors


@dataclass(frozen=True)
class ChannelConfig:
    """Full scenario: antennas, per-link shape parameters, mean powers, SNR."""
    L: int
    m_alpha: tuple[int, ...]  # shadowing shape per link
    m_beta: tuple[float, ...]  # fading shape per link
    omega: tuple[float, ...]  # mean shadow power per link
    snr_db: Union[float, SweepSpec] = 0.0  # Es/N0
    modulation: Optional[Modulation] = None
    sim: Optional[SimulationOptions] = None

    def __post_init__(self):
        for name in ("m_alpha", "m_beta", "omega"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @classmethod
    def iid(
        cls,
        L: int,
        m_alpha: int,
        m_beta: float,
        omega: float = 1.0,
        snr_db: Union[float, SweepSpec] = 0.0,
    ) -> "ChannelConfig":
        """Identically distributed links."""
        return cls(L, (m_alpha,) * L, (m_beta,) * L, (omega,) * L, snr_db)

    def validate(self) -> list[str]:
        """Validate the scenario and return a list of error messages."""
        errors = []
        if isinstance(self.L, bool) or not isinstance(self.L, int) or self.L < 1:
            return [f"L must be an integer >= 1, got {self.L!r}"]

        for name in ("m_alpha", "m_beta", "omega"):
            values = getattr(self, name)
            if len(values) != self.L:
                errors.append(f"{name} must have length L={self.L}, got {len(values)}")
        if errors:
            return errors

        for i, m in enumerate(self.m_alpha):
            if isinstance(m, bool) or not float(m).is_integer() or m < 1:
                errors.append(f"m_alpha[{i}] must be a positive integer, got {m}")
        for i, m in enumerate(self.m_beta):
            if not m >= 0.5:
                errors.append(f"m_beta[{i}] must be >= 0.5, got {m}")
        for i, w in enumerate(self.omega):
            if not (w > 0 and math.isfinite(w)):
                errors.append(f"omega[{i}] must be finite and > 0, got {w}")

        if isinstance(self.snr_db, SweepSpec):
            errors.extend(self.snr_db.validate())
            points = self.snr_db.grid() if not self.snr_db.validate() else []
        else:
            points = [self.snr_db]
        if not errors:
            for snr in points:
                for i, w in enumerate(self.omega):
                    try:
                        gamma = w * db_to_linear(snr)
                    except OverflowError:
                        gamma = math.inf
                    if not (gamma > 0 and math.isfinite(gamma)):
                        errors.append(f"mean branch SNR of link {i + 1} at {snr} dB is not finite and positive")

        if self.modulation is not None:
            errors.extend(self.modulation.validate())
        if self.sim is not None:
            errors.extend(self.sim.validate())
        return errors

    @property
    def is_sweep(self) -> bool:
        return isinstance(self.snr_db, SweepSpec)

    def snr_points(self) -> list[float]:
        """SNR values in dB covered by this scenario."""
        if isinstance(self.snr_db, SweepSpec):
            return self.snr_db.grid()
        return [float(self.snr_db)]

    def at_snr(self, snr_db: float) -> "ChannelConfig":
        """Copy of this scenario pinned to a single SNR point."""
        return replace(self, snr_db=float(snr_db))

    @property
    def snr_linear(self) -> float:
        if isinstance(self.snr_db, SweepSpec):
            raise ValueError("Scenario holds an SNR sweep; pin a point with at_snr() first")
        return db_to_linear(self.snr_db)

    @property
    def mean_snrs(self) -> tuple[float, ...]:
        """Mean branch SNRs gamma~_l = omega_l * Es/N0 (linear)."""
        snr = self.snr_linear
        return tuple(w * snr for w in self.omega)

    @property
    def shadow_shapes(self) -> tuple[int, ...]:
        return tuple(int(m) for m in self.m_alpha)


@dataclass(frozen=True)
class AsymptoticConfig:
    """High-SNR reference: gamma_bar = kappa_l * gamma~_l for every link."""
    kappa: tuple[float, ...]
    gamma_bar: float

    def __post_init__(self):
        object.__setattr__(self, "kappa", tuple(self.kappa))

    @classmethod
    def default_for(cls, cfg: ChannelConfig) -> "AsymptoticConfig":
        """gamma_bar = Es/N0, so kappa_l = 1/omega_l."""
        gamma_bar = cfg.snr_linear
        return cls(tuple(gamma_bar / g for g in cfg.mean_snrs), gamma_bar)

    def validate(self, cfg: Optional[ChannelConfig] = None) -> list[str]:
        errors = []
        if not self.gamma_bar > 0:
            errors.append(f"gamma_bar must be positive, got {self.gamma_bar}")
        for i, k in enumerate(self.kappa):
            if not k > 0:
                errors.append(f"kappa[{i}] must be positive, got {k}")
        if cfg is None or errors:
            return errors
        if len(self.kappa) != cfg.L:
            return errors + [f"kappa must have length L={cfg.L}, got {len(self.kappa)}"]
        for i, (k, g) in enumerate(zip(self.kappa, cfg.mean_snrs)):
            if abs(k * g - self.gamma_bar) > 1e-12 * self.gamma_bar:
                errors.append(
                    f"kappa[{i}] * mean SNR = {k * g!r} differs from gamma_bar = {self.gamma_bar!r}"
                )
        return errors


@dataclass(frozen=True)
class ExpansionTerm:
    """One (n, k) term kappa * exp(-B x) * x**A of the max-of-Gammas CDF."""
    n: tuple[int, ...]
    k: tuple[int, ...]
    kappa: Fraction
    rate: Fraction  # exact B
    A: int

    @property
    def B(self) -> float:
        return float(self.rate)

    @property
    def sign_kappa(self) -> int:
        return 1 if self.kappa > 0 else -1

    @property
    def log_abs_kappa(self) -> float:
        return log_abs_fraction(self.kappa)


@dataclass(frozen=True)
class MetricResult:
    """A metric value tagged with the method that produced it."""
    value: float
    method: Method
    meta: dict[str, Any] = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class SpecFunResult:
    """Special-function value with convergence diagnostics."""
    value: float
    converged: bool
    terms_used: int
    diagnostic: str = ""


@dataclass(frozen=True)
class QuadratureReport:
    """Result of an adaptive-quadrature oracle."""
    value: float
    abs_err_est: float
    subdivisions: int
    converged: bool


@dataclass(frozen=True)
class SimulationEstimate:
    """Monte Carlo point estimate with provenance."""
    value: float
    stderr: float
    trials: int
    seed: int
    policy: Policy
    metadata: dict[str, Any] = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class AsymptoticProfile:
    """Diversity quantities and the asymptotic coefficient for one scenario."""
    d_alpha: int
    d_beta: float
    d: float
    regime: Regime
    zeta: float
    zeta_printed: float
    log_z: float  # log of the printed Z_L product
    P_beta: float
    Delta_d: float
    form: ZetaForm = ZetaForm.EXACT


@dataclass
class SweepRow:
    """One CSV row of a metric sweep."""
    snr_db: float
    metric: str
    method: Method
    value: float
    stderr: Optional[float] = None
    trials: Optional[int] = None

    def validate(self) -> list[str]:
        errors = []
        if (self.stderr is not None) != (self.method == Method.MC):
            errors.append(f"stderr must be present exactly for mc rows ({self.metric} @ {self.snr_db} dB)")
        return errors

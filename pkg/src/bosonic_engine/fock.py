"""Engine parameters and truncated Fock-space primitives.

Units are natural (hbar = k_B = 1). Mode A is coupled to the hot bath,
mode B to the cold one, but nothing here assumes ``beta_a < beta_b``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PhysicsDomainError

MAX_FACTORIAL_ORDER = 20


class CouplingMode(str, enum.Enum):
    DIRECT_THETA = "theta"
    ALPHA_FRACTION = "alpha"


@dataclass(frozen=True)
class CouplingSpec:
    """How the coupling strength is given.

    ``mode="theta"`` stores theta itself. ``mode="alpha"`` stores a fraction
    alpha of the coupling bound, theta = sqrt(alpha) * theta_bar, where the
    bound is taken at ``order`` (2 or 4). ``order=None`` lets the evaluating
    method pick its own order.
    """

    mode: CouplingMode = CouplingMode.DIRECT_THETA
    value: float = 0.0
    order: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", CouplingMode(self.mode))
        if self.order not in (None, 2, 4):
            raise ConfigError(f"coupling order must be 2 or 4, got {self.order!r}")
        if not math.isfinite(self.value):
            raise ConfigError("coupling value must be finite")
        if self.mode is CouplingMode.ALPHA_FRACTION:
            if not 0.0 < self.value < 1.0:
                raise ConfigError(f"alpha must lie in (0, 1), got {self.value}")
        elif self.value < 0.0:
            raise ConfigError(f"theta must be real and nonnegative, got {self.value}")

    @classmethod
    def theta(cls, value: float) -> "CouplingSpec":
        return cls(CouplingMode.DIRECT_THETA, float(value))

    @classmethod
    def alpha(cls, value: float, order: int | None = None) -> "CouplingSpec":
        return cls(CouplingMode.ALPHA_FRACTION, float(value), order)


@dataclass(frozen=True)
class EngineParams:
    """Full configuration of one two-stroke engine.

    ``n`` quanta of mode A are exchanged for ``m`` quanta of mode B by
    ``V = exp(theta a^dag^n b^m - theta* a^n b^dag^m)``.
    """

    n: int
    m: int
    omega_a: float
    omega_b: float
    beta_a: float
    beta_b: float
    coupling: CouplingSpec = field(default_factory=CouplingSpec)

    def __post_init__(self):
        for name in ("n", "m"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("omega_a", "omega_b", "beta_a", "beta_b"):
            v = float(getattr(self, name))
            if not v > 0.0 or math.isnan(v):
                raise ConfigError(f"{name} must be strictly positive, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def x(self) -> float:
        """Frequency ratio omega_b / omega_a."""
        return self.omega_b / self.omega_a

    @property
    def y(self) -> float:
        """Inverse-temperature ratio beta_b / beta_a."""
        return self.beta_b / self.beta_a

    @property
    def quantum(self) -> float:
        """Work quantum n*omega_a - m*omega_b."""
        return self.n * self.omega_a - self.m * self.omega_b

    @property
    def affinity(self) -> float:
        """m*beta_b*omega_b - n*beta_a*omega_a, the log emission/absorption ratio."""
        return self.m * self.beta_b * self.omega_b - self.n * self.beta_a * self.omega_a

    def occupations(self) -> "ThermalOccupations":
        return ThermalOccupations(
            thermal_occupation(self.beta_a, self.omega_a),
            thermal_occupation(self.beta_b, self.omega_b),
        )

    def replace(self, **changes) -> "EngineParams":
        return dataclasses.replace(self, **changes)

    def with_theta(self, theta: float) -> "EngineParams":
        return dataclasses.replace(self, coupling=CouplingSpec.theta(theta))

    @classmethod
    def from_ratios(cls, n, m, beta_omega_a, x, y, omega_a=1.0, coupling=None):
        """Build from beta_a*omega_a, x = omega_b/omega_a and y = beta_b/beta_a."""
        beta_a = beta_omega_a / omega_a
        return cls(n, m, omega_a, x * omega_a, beta_a, y * beta_a,
                   coupling if coupling is not None else CouplingSpec())


@dataclass(frozen=True)
class ThermalOccupations:
    n_a: float
    n_b: float

    @property
    def q_a(self) -> float:
        """Boltzmann ratio N_A/(N_A+1) = exp(-beta_a*omega_a)."""
        return self.n_a / (self.n_a + 1.0)

    @property
    def q_b(self) -> float:
        return self.n_b / (self.n_b + 1.0)

    def swapped(self) -> "ThermalOccupations":
        return ThermalOccupations(self.n_b, self.n_a)


@dataclass(frozen=True, eq=False)
class ModeOperatorSet:
    dim: int
    annihilation: np.ndarray
    number_diagonal: np.ndarray

    @property
    def creation(self) -> np.ndarray:
        return self.annihilation.conj().T

    @property
    def number(self) -> np.ndarray:
        return np.diag(self.number_diagonal).astype(complex)


@dataclass(frozen=True, eq=False)
class ThermalStateDiag:
    dim: int
    probabilities: np.ndarray
    tail_mass: float

    def normalized(self) -> np.ndarray:
        """Probabilities rescaled to sum to one on the truncated space."""
        return self.probabilities / self.probabilities.sum()


def _check_beta_omega(beta: float, omega: float) -> float:
    bw = beta * omega
    if not bw > 0.0:
        raise PhysicsDomainError(f"beta*omega must be positive, got {bw!r}")
    return bw


def thermal_occupation(beta: float, omega: float) -> float:
    """Bose-Einstein occupation 1/(exp(beta*omega) - 1).

    Written as exp(-x)/(1 - exp(-x)) so it neither overflows for large x nor
    loses digits for small x.
    """
    bw = _check_beta_omega(beta, omega)
    return math.exp(-bw) / -math.expm1(-bw)


def thermal_moment(occupation: float, k: int, kind: str = "normal") -> float:
    """Normally / antinormally ordered thermal moment of order ``k``.

    ``normal``: Tr[c^dag^k c^k R] = k! N^k.
    ``antinormal``: Tr[c^k c^dag^k R] = k! (N+1)^k.
    """
    if k < 0 or int(k) != k:
        raise ConfigError(f"moment order must be a nonnegative integer, got {k!r}")
    if k > MAX_FACTORIAL_ORDER:
        raise PhysicsDomainError(
            f"moment order {k} exceeds the supported range (<= {MAX_FACTORIAL_ORDER})"
        )
    if occupation < 0:
        raise PhysicsDomainError(f"occupation must be nonnegative, got {occupation}")
    if k == 0:
        return 1.0
    if kind == "normal":
        base = occupation
    elif kind == "antinormal":
        base = occupation + 1.0
    else:
        raise ConfigError(f"unknown moment kind {kind!r}")
    return float(math.factorial(k)) * base**k


def build_mode_operators(dim: int) -> ModeOperatorSet:
    """Truncated ladder operators on ``dim`` Fock levels.

    The canonical commutator holds on the first ``dim - 1`` levels only; on
    the last level [a, a^dag] = -(dim - 1).
    """
    if int(dim) != dim or dim < 2:
        raise ConfigError(f"truncation dimension must be >= 2, got {dim!r}")
    dim = int(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return ModeOperatorSet(dim, a, np.arange(dim, dtype=float))


def thermal_state_diag(beta: float, omega: float, dim: int) -> ThermalStateDiag:
    """Gibbs populations (1-q) q^l, l < dim, with q = exp(-beta*omega).

    The mass beyond the truncation, q^dim, is returned separately rather
    than folded into the retained levels.
    """
    if int(dim) != dim or dim < 2:
        raise ConfigError(f"truncation dimension must be >= 2, got {dim!r}")
    bw = _check_beta_omega(beta, omega)
    q = math.exp(-bw)
    probs = -math.expm1(-bw) * q ** np.arange(int(dim), dtype=float)
    return ThermalStateDiag(int(dim), probs, q ** int(dim))

"""Exception hierarchy.

Each top-level class carries the process exit code used by the CLI.
"""


class EngineError(Exception):
    exit_code = 1


class ConfigError(EngineError, ValueError):
    """Malformed configuration, bad truncation request or schema violation."""

    exit_code = 2


class PhysicsDomainError(EngineError, ValueError):
    """Parameters outside the physical domain of an operation."""

    exit_code = 3


class CouplingBoundError(PhysicsDomainError):
    """Coupling exceeds the bound that keeps a perturbative distribution valid."""

    def __init__(self, theta, theta_bar, order):
        self.theta = theta
        self.theta_bar = theta_bar
        self.order = order
        super().__init__(
            f"theta={theta:.6g} exceeds the order-{order} coupling bound "
            f"theta_bar={theta_bar:.6g}"
        )


class UnsupportedVariantError(PhysicsDomainError):
    pass


class DegenerateQuantumError(PhysicsDomainError):
    """n*omega_a == m*omega_b: the work quantum vanishes."""


class NoFeasiblePairError(PhysicsDomainError):
    pass


class NumericalError(EngineError, ArithmeticError):
    exit_code = 4


class TruncationError(NumericalError):
    pass


class ResourceError(NumericalError):
    """Truncation would exceed the configured dimension cap."""


class OutputError(EngineError, OSError):
    exit_code = 5

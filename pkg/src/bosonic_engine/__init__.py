"""Work statistics of two-stroke bosonic engines with polynomial coupling.

Two modes A (hot) and B (cold) are coupled by
``V = exp(theta a^dag^n b^m - theta* a^n b^dag^m)``. The package provides
an exact truncated-Fock oracle, second- and fourth-order closed forms,
thermodynamic diagnostics, working-point optimizers and a sweep CLI.
"""

from .errors import (
    ConfigError,
    CouplingBoundError,
    DegenerateQuantumError,
    EngineError,
    NoFeasiblePairError,
    NumericalError,
    OutputError,
    PhysicsDomainError,
    ResourceError,
    TruncationError,
    UnsupportedVariantError,
)
from .exact import (
    Method,
    MomentReport,
    TruncationConfig,
    WorkHeatDistribution,
    adaptive_truncation,
    build_generator,
    exact_char_fn,
    exact_moments,
    joint_moment,
    two_point_distribution,
    unitary_exp,
)
from .fock import (
    CouplingMode,
    CouplingSpec,
    EngineParams,
    ThermalOccupations,
    build_mode_operators,
    thermal_moment,
    thermal_occupation,
    thermal_state_diag,
)
from .optimize import (
    OptimizationResult,
    optimize_frequency_4th,
    optimize_nm,
    optimize_xmax,
)
from .perturbative import (
    char_fn_2nd,
    coupling_ratio,
    delta_coefficient,
    fourth_order_coefficients,
    moments_2nd,
    moments_4th,
    relative_fluctuations_2nd,
    second_order_coefficients,
    snr_4th,
    theta_bar,
    work_distribution_2nd,
    work_distribution_4th,
)
from .sweep import (
    SweepConfig,
    Table,
    ValidationReport,
    emit_csv,
    parse_config,
    run_sweep,
    validate_convergence,
)
from .thermo import (
    Regime,
    RegimeReport,
    TurReport,
    classify_regime,
    emission_absorption_ratio,
    entropy_production,
    tur_report,
)

__version__ = "0.1.0"

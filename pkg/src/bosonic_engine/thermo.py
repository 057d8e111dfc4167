"""Operating regimes, efficiency, entropy production and TUR bounds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DegenerateQuantumError, PhysicsDomainError
from .exact import Method, MomentReport
from .fock import EngineParams

BOUNDARY_RTOL = 1e-12
_SERIES_CUTOFF = 1e-4


class Regime(str, enum.Enum):
    HEAT_ENGINE = "heat_engine"
    REFRIGERATOR = "refrigerator"
    THERMAL_ACCELERATOR = "thermal_accelerator"
    BOUNDARY = "boundary"
    # only reachable when T_B > T_A: W > 0 with heat drawn from bath B
    REVERSED_ENGINE = "reversed_engine"


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    x: float
    x_min: float
    x_max: float
    efficiency: float
    carnot: float
    operation_range: float
    signs: tuple[int, int, int]  # signs of (<W>, <Q_H>, <Q_C>)


@dataclass(frozen=True)
class TurReport:
    rf: float
    sigma: float
    standard_bound: float
    tight_swap_bound: float
    fourth_bound: float | None
    asymptotic_fourth: float | None
    violates_standard: bool
    snr: float
    method: Method


def coth(z: float) -> float:
    if abs(z) < _SERIES_CUTOFF:
        return 1.0 / z + z / 3.0 - z**3 / 45.0
    return 1.0 / math.tanh(z)


def h_function(z: float) -> float:
    """z coth(z/2); even, with minimum 2 at z = 0."""
    if abs(z) < _SERIES_CUTOFF:
        return 2.0 + z * z / 6.0
    return z / math.tanh(z / 2.0)


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def classify_regime(params: EngineParams) -> RegimeReport:
    """Place the frequency ratio x = omega_b/omega_a relative to the window
    n T_B / (m T_A) < x < n / m."""
    n, m = params.n, params.m
    x = params.x
    x_min = n * params.beta_a / (m * params.beta_b)
    x_max = n / m
    carnot = 1.0 - params.beta_a / params.beta_b
    eff = 1.0 - x / x_max

    def near(a, b):
        return abs(a - b) <= BOUNDARY_RTOL * max(abs(a), abs(b))

    if near(x, x_min) or near(x, x_max):
        regime = Regime.BOUNDARY
    elif x_min < x < x_max:
        regime = Regime.HEAT_ENGINE
    elif x < x_min and x < x_max:
        regime = Regime.REFRIGERATOR
    elif x > x_max and x > x_min:
        regime = Regime.THERMAL_ACCELERATOR
    else:
        regime = Regime.REVERSED_ENGINE
    # <W> ~ eps * tanh(z/2), <Q_H> ~ n omega_a tanh(z/2), <Q_C> ~ -m omega_b tanh(z/2)
    sz = _sign(params.affinity)
    signs = (_sign(params.quantum) * sz, sz, -sz)
    return RegimeReport(regime, x, x_min, x_max, eff, carnot, carnot * x_max, signs)


def entropy_production(params: EngineParams, mean_w: float) -> float:
    """<Sigma> = (m beta_b omega_b - n beta_a omega_a)/(n omega_a - m omega_b) <W>."""
    eps = params.quantum
    if eps == 0.0:
        raise DegenerateQuantumError("n*omega_a == m*omega_b: entropy production "
                                     "is not fixed by the mean work")
    return params.affinity / eps * mean_w


def emission_absorption_ratio(params: EngineParams) -> float:
    """p(+eps)/p(-eps) = exp(m beta_b omega_b - n beta_a omega_a); saturates to inf."""
    z = params.affinity
    if z > 709.0:
        return math.inf
    return math.exp(z)


def tur_report(
    params: EngineParams,
    moments: MomentReport,
    alpha: float | None = None,
    delta: float | None = None,
) -> TurReport:
    """TUR bounds for one set of moments.

    ``alpha`` is the coupling as a fraction of the fourth-order bound and
    ``delta`` the fourth-order Delta coefficient; both are needed for the
    rescaled fourth-order bound, which is only produced for pert4 moments.
    The standard bound is the only one violations are judged against.
    """
    if moments.mean_w == 0.0:
        raise PhysicsDomainError("zero mean work: relative fluctuations undefined")
    sigma = moments.entropy_production
    rf = moments.var_w / moments.mean_w**2
    snr = 1.0 / rf if rf > 0 else math.inf
    standard = 2.0 / sigma if sigma != 0.0 else math.inf
    fourth = asym = None
    if moments.method is Method.PERT4 and alpha is not None:
        asym = sigma / 2.0 / (1.0 - alpha)
        if delta is not None:
            fourth = sigma / 2.0 / (1.0 - alpha * delta)
    return TurReport(
        rf=rf,
        sigma=sigma,
        standard_bound=standard,
        tight_swap_bound=standard + 1.0,
        fourth_bound=fourth,
        asymptotic_fourth=asym,
        violates_standard=snr > sigma / 2.0,
        snr=snr,
        method=moments.method,
    )


def delta_threshold(
    variant: str,
    y: float,
    x_values,
    bracket: tuple[float, float] = (0.05, 20.0),
) -> float:
    """Smallest beta_a*omega_a above which Delta > 0 for every x in ``x_values``.

    Delta > 0 is where the fourth-order TUR bound exceeds the standard one.
    The root of min_x Delta is bracketed by a log scan of ``bracket`` and
    then polished with Brent's method.
    """
    from scipy.optimize import brentq

    from .fock import ThermalOccupations, thermal_occupation
    from .perturbative import delta_coefficient

    xs = [float(v) for v in x_values]
    if not xs:
        raise PhysicsDomainError("x_values must be nonempty")

    def worst(bw):
        return min(
            delta_coefficient(
                ThermalOccupations(thermal_occupation(bw, 1.0),
                                   thermal_occupation(bw * x * y, 1.0)),
                variant,
            )
            for x in xs
        )

    grid = [bracket[0] * (bracket[1] / bracket[0]) ** (k / 200) for k in range(201)]
    vals = [worst(b) for b in grid]
    if vals[-1] <= 0.0:
        raise PhysicsDomainError("Delta stays nonpositive over the bracket")
    # last sign change from nonpositive to positive
    k = max(i for i in range(len(vals)) if vals[i] <= 0.0) if min(vals) <= 0.0 else None
    if k is None:
        return grid[0]
    return float(brentq(worst, grid[k], grid[k + 1], xtol=1e-12))

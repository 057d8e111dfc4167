"""Closed-form small-coupling results.

Second order holds for any (n, m); fourth order is available for the
(2, 1) and (1, 2) couplings only. The array kernels at the bottom take
occupations as numpy arrays so grid searches can vectorize them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    CouplingBoundError,
    DegenerateQuantumError,
    PhysicsDomainError,
    UnsupportedVariantError,
)
from .exact import Method, MomentReport, WorkHeatDistribution
from .fock import CouplingMode, EngineParams, ThermalOccupations, thermal_moment
from .thermo import coth, entropy_production, h_function

# slack on theta <= theta_bar so that alpha -> 1 still resolves
_BOUND_RTOL = 1e-12

VARIANTS = {(2, 1): "v21", (1, 2): "v12"}


@dataclass(frozen=True)
class SecondOrderCoefficients:
    """n! m! N_A^n (N_B+1)^m and n! m! (N_A+1)^n N_B^m."""

    emit: float
    absorb: float

    @property
    def total(self) -> float:
        return self.emit + self.absorb


@dataclass(frozen=True)
class FourthOrderCoefficients:
    A: float
    B: float
    C: float
    D: float
    variant: str

    @property
    def emission_excess(self) -> float:
        """Emission minus absorption weight; D for v21, -D for v12."""
        return self.D if self.variant == "v21" else -self.D


@dataclass(frozen=True)
class CouplingBound:
    theta_bar: float
    order: int

    @property
    def is_unbounded(self) -> bool:
        return math.isinf(self.theta_bar)


class RelativeFluctuations(NamedTuple):
    rf: float
    rf_lower_bound: float
    h_over_sigma: float
    heat_engine: bool


class SnrResult(NamedTuple):
    snr: float
    delta: float
    rescale: float


def variant_of(params: EngineParams) -> str:
    try:
        return VARIANTS[(params.n, params.m)]
    except KeyError:
        raise UnsupportedVariantError(
            f"fourth-order results exist only for (n, m) in {{(2, 1), (1, 2)}}, "
            f"got ({params.n}, {params.m})"
        ) from None


def second_order_coefficients(params: EngineParams) -> SecondOrderCoefficients:
    occ = params.occupations()
    emit = thermal_moment(occ.n_a, params.n, "normal") * thermal_moment(
        occ.n_b, params.m, "antinormal")
    absorb = thermal_moment(occ.n_a, params.n, "antinormal") * thermal_moment(
        occ.n_b, params.m, "normal")
    return SecondOrderCoefficients(emit, absorb)


def fourth_order_coefficients(
    occupations: ThermalOccupations | EngineParams, variant: str | None = None
) -> FourthOrderCoefficients:
    """A, B, C, D for the (2,1) coupling; v12 swaps N_A and N_B."""
    if isinstance(occupations, EngineParams):
        found = variant_of(occupations)
        if variant is not None and variant != found:
            raise UnsupportedVariantError(
                f"variant {variant} does not match (n, m) = "
                f"({occupations.n}, {occupations.m})")
        variant = found
        occupations = occupations.occupations()
    if variant not in ("v21", "v12"):
        raise UnsupportedVariantError(f"unknown variant {variant!r}")
    na, nb = occupations.n_a, occupations.n_b
    if variant == "v12":
        na, nb = nb, na
    A, B, C, D = _abcd(na, nb)
    return FourthOrderCoefficients(float(A), float(B), float(C), float(D), variant)


def theta_bar(params: EngineParams, order: int = 2) -> CouplingBound:
    """Largest coupling keeping the order-``order`` distribution valid."""
    if order == 2:
        bracket = second_order_coefficients(params).total
    elif order == 4:
        bracket = 2.0 * fourth_order_coefficients(params).B
    else:
        raise PhysicsDomainError(f"order must be 2 or 4, got {order!r}")
    if bracket <= 0.0:
        return CouplingBound(math.inf, order)
    return CouplingBound(1.0 / math.sqrt(bracket), order)


def resolve_theta(params: EngineParams, order: int = 2) -> float:
    """Coupling theta for ``params.coupling``.

    An alpha fraction refers to the bound of ``coupling.order`` when set and
    to ``order`` otherwise.
    """
    spec = params.coupling
    if spec.mode is CouplingMode.DIRECT_THETA:
        return spec.value
    bound = theta_bar(params, spec.order or order).theta_bar
    if math.isinf(bound):
        raise PhysicsDomainError("coupling bound is infinite; alpha fraction undefined")
    return math.sqrt(spec.value) * bound


def _theta_for(params, theta, order):
    return resolve_theta(params, order) if theta is None else float(theta)


def _enforce_bound(params, theta, order):
    bound = theta_bar(params, order).theta_bar
    if theta > bound * (1.0 + _BOUND_RTOL):
        raise CouplingBoundError(theta, bound, order)
    return bound


def _warn_bound(params, theta, order):
    bound = theta_bar(params, order).theta_bar
    if theta > bound * (1.0 + _BOUND_RTOL):
        warnings.warn(
            f"theta={theta:.6g} exceeds theta_bar={bound:.6g}; the order-{order} "
            "moments are evaluated as polynomials outside their validity range",
            stacklevel=3,
        )


# -- second order ------------------------------------------------------------


def char_fn_2nd(params: EngineParams, theta: float, xi: float) -> complex:
    """chi(xi) = 1 + theta^2 {S (cos xi - 1) + i (emit - absorb) sin xi}.

    The sign of the imaginary part follows from chi = <exp(i xi k)>, with
    the k = +1 (extraction) weight equal to theta^2 * emit.
    """
    c = second_order_coefficients(params)
    t2 = theta * theta
    return complex(1.0 + t2 * c.total * (math.cos(xi) - 1.0),
                   t2 * (c.emit - c.absorb) * math.sin(xi))


def work_distribution_2nd(params: EngineParams, theta: float | None = None
                          ) -> WorkHeatDistribution:
    theta = _theta_for(params, theta, 2)
    _enforce_bound(params, theta, 2)
    c = second_order_coefficients(params)
    t2 = theta * theta
    p0 = 1.0 - t2 * c.total
    points = ((-1, t2 * c.absorb), (0, p0), (1, t2 * c.emit)) if theta else ((0, 1.0),)
    return WorkHeatDistribution(params.quantum, params.n * params.omega_a, points,
                                0.0, Method.PERT2)


def _report(params, mean_k, second_k, var_k, method):
    """MomentReport from moments of the line index k (W = k*eps, Q_H = k*n*omega_a)."""
    eps = params.quantum
    mean_w, second_w, var_w = eps * mean_k, eps**2 * second_k, eps**2 * var_k
    mean_qh = params.n * params.omega_a * mean_k
    mean_qc = -params.m * params.omega_b * mean_k
    sigma = params.affinity * mean_k
    eff = mean_w / mean_qh if mean_qh != 0.0 else math.nan
    snr = mean_w**2 / var_w if var_w > 0.0 else math.nan
    return MomentReport(mean_w, second_w, var_w, mean_qh, mean_qc, sigma, eff, snr, method)


def moments_2nd(params: EngineParams, theta: float | None = None) -> MomentReport:
    """Mean and second moment of W to order theta^2.

    At this order var(W) equals <W^2>: the <W>^2 term is O(theta^4).
    """
    theta = _theta_for(params, theta, 2)
    _warn_bound(params, theta, 2)
    c = second_order_coefficients(params)
    t2 = theta * theta
    mean_k = t2 * (c.emit - c.absorb)
    second_k = t2 * c.total
    return _report(params, mean_k, second_k, second_k, Method.PERT2)


def mean_work_alpha(params: EngineParams, alpha: float) -> float:
    """<W> = alpha (n omega_a - m omega_b) tanh(z / 2) at theta = sqrt(alpha) theta_bar."""
    return alpha * params.quantum * math.tanh(params.affinity / 2.0)


def relative_fluctuations_2nd(params: EngineParams, alpha: float) -> RelativeFluctuations:
    """var(W)/<W>^2 at theta = sqrt(alpha) * theta_bar (second order).

    Returns the closed form (1/alpha) coth^2(z/2), its lower bound
    (1/alpha) coth^2(m omega_b (beta_b - beta_a) / 2) and h(z)/<Sigma> for
    cross-checking. Outside the heat-engine window the values are still
    computed and ``heat_engine`` is False.
    """
    if not 0.0 < alpha < 1.0:
        raise PhysicsDomainError(f"alpha must lie in (0, 1), got {alpha}")
    z = params.affinity
    eps = params.quantum
    heat_engine = z > 0.0 and eps > 0.0
    if not heat_engine:
        warnings.warn("parameters are outside the heat-engine regime", stacklevel=2)
    if z == 0.0:
        return RelativeFluctuations(math.inf, math.inf, math.inf, heat_engine)
    rf = coth(z / 2.0) ** 2 / alpha
    zb = params.m * params.omega_b * (params.beta_b - params.beta_a)
    bound = coth(zb / 2.0) ** 2 / alpha if zb != 0.0 else math.inf
    sigma = entropy_production(params, mean_work_alpha(params, alpha)) if eps else 0.0
    h_over = h_function(z) / sigma if sigma else math.inf
    return RelativeFluctuations(rf, bound, h_over, heat_engine)


# -- fourth order ------------------------------------------------------------


def _fourth_setup(params, theta):
    variant = variant_of(params)
    theta = _theta_for(params, theta, 4)
    occ = params.occupations()
    return variant, theta, occ


def work_distribution_4th(params: EngineParams, theta: float | None = None
                          ) -> WorkHeatDistribution:
    """Five-point distribution, k in {0, +-1, +-2}, through theta^4."""
    variant, theta, occ = _fourth_setup(params, theta)
    _enforce_bound(params, theta, 4)
    points = _five_points(occ.n_a, occ.n_b, theta * theta, variant)
    if any(p < 0.0 for p in points):
        raise CouplingBoundError(theta, theta_bar(params, 4).theta_bar, 4)
    pts = tuple((k, float(p)) for k, p in zip((-2, -1, 0, 1, 2), points))
    if theta == 0.0:
        pts = ((0, 1.0),)
    return WorkHeatDistribution(params.quantum, params.n * params.omega_a, pts, 0.0,
                                Method.PERT4)


def moments_4th(params: EngineParams, theta: float | None = None) -> MomentReport:
    """<W> and <W^2> through theta^4; var(W) keeps the <W>^2 term."""
    variant, theta, occ = _fourth_setup(params, theta)
    _warn_bound(params, theta, 4)
    mean_k, second_k = _moments4(occ.n_a, occ.n_b, 1.0, theta * theta, variant)
    mean_k, second_k = float(mean_k), float(second_k)
    return _report(params, mean_k, second_k, second_k - mean_k**2, Method.PERT4)


def snr_4th(params: EngineParams, theta: float | None = None) -> SnrResult:
    """Fourth-order SNR in the rescaled-TUR form.

    SNR = <Sigma> tanh(z/2)/z / (1 - 2 B theta^2 Delta) with
    Delta = 1 - 4C/(AB) - D^2/(AB). At theta = sqrt(alpha) theta_bar the
    rescaling reads (1 - alpha Delta)^-1.
    """
    variant, theta, occ = _fourth_setup(params, theta)
    co = fourth_order_coefficients(occ, variant)
    if co.A * co.B == 0.0:
        raise PhysicsDomainError("A*B vanishes (vacuum baths); Delta is undefined")
    delta = _delta(co.A, co.B, co.C, co.D)
    z = params.affinity
    if params.quantum == 0.0:
        raise DegenerateQuantumError("work quantum vanishes; SNR undefined")
    sigma = moments_4th(params, theta).entropy_production
    ratio = 0.5 if z == 0.0 else math.tanh(z / 2.0) / z
    rescale = 1.0 - 2.0 * co.B * theta * theta * delta
    return SnrResult(sigma * ratio / rescale, delta, rescale)


def delta_coefficient(occupations: ThermalOccupations, variant: str) -> float:
    co = fourth_order_coefficients(occupations, variant)
    return float(_delta(co.A, co.B, co.C, co.D))


# -- swap and coupling ratios -----------------------------------------------


def swap_mean_work(params: EngineParams, theta: float) -> float:
    """Exact mean work of the partial swap (n = m = 1) at coupling theta."""
    occ = params.occupations()
    return (occ.n_a - occ.n_b) * (params.omega_a - params.omega_b) * math.sin(theta) ** 2


def coupling_ratio(params: EngineParams, variant: str) -> float:
    """theta_11^2 / theta_21^2 (``r21``) or theta_11^2 / theta_12^2 (``r12``).

    The swap coupling needed to match the second-order mean work of the
    (2,1) or (1,2) coupling, at the frequency and temperature ratios of
    ``params``.
    """
    x, y = params.x, params.y
    if x == 1.0:
        raise PhysicsDomainError("coupling ratio is singular at omega_b == omega_a")
    half = params.beta_a * params.omega_a / 2.0
    if variant == "r21":
        pre, num, dens = (2.0 - x) / (1.0 - x), x * y - 2.0, (x * y - 1.0, 1.0)
    elif variant == "r12":
        pre, num, dens = (1.0 - 2.0 * x) / (1.0 - x), 2.0 * x * y - 1.0, (x * y - 1.0, x * y)
    else:
        raise UnsupportedVariantError(f"unknown coupling-ratio variant {variant!r}")
    # sinh ratios in log space so large beta*omega does not overflow
    sign = math.copysign(1.0, pre) * _sign(num) * _sign(dens[0]) * _sign(dens[1])
    if pre == 0.0 or num == 0.0:
        return 0.0
    if dens[0] == 0.0 or dens[1] == 0.0:
        raise PhysicsDomainError("coupling ratio is singular at x*y == 1")
    log = (math.log(abs(pre)) + _log_sinh(half * abs(num))
           - _log_sinh(half * abs(dens[0])) - _log_sinh(half * abs(dens[1])))
    return sign * math.exp(log)


def _sign(v):
    return (v > 0) - (v < 0)


def _log_sinh(u):
    """log(sinh(u)) for u > 0."""
    if u < 20.0:
        return math.log(math.sinh(u))
    return u - math.log(2.0) + math.log1p(-math.exp(-2.0 * u))


# -- array kernels -----------------------------------------------------------


def _abcd(na, nb):
    A = na**2 * (nb + 1) + (na + 1) ** 2 * nb
    B = (2 * nb + 1) * (6 * na**2 + 6 * na + 1) - (2.0 / 3.0) * (6 * na - 4 * nb + 1)
    C = 3 * (na**4 * (nb + 1) ** 2 + (na + 1) ** 4 * nb**2)
    D = na**2 * (nb + 1) - (na + 1) ** 2 * nb
    return A, B, C, D


def _delta(A, B, C, D):
    return 1.0 - 4.0 * C / (A * B) - D**2 / (A * B)


def _five_points(na, nb, t2, variant):
    """(p(-2), p(-1), p(0), p(+1), p(+2)) with k > 0 meaning extraction."""
    if variant == "v21":
        a, b = na, nb
    else:
        a, b = nb, na
    A, B, C, _ = _abcd(a, b)
    # weights of the chain step that lowers `a` (v21: emission)
    down1 = 2 * a**2 * (b + 1)
    up1 = 2 * (a + 1) ** 2 * b
    down2 = 12 * a**4 * (b + 1) ** 2
    up2 = 12 * (a + 1) ** 4 * b**2
    corr = t2 - 2 * t2 * t2 * B
    p0 = 1 - 2 * t2 * A + 4 * t2 * t2 * (A * B - C)
    if variant == "v21":
        return up2 * t2 * t2, up1 * corr, p0, down1 * corr, down2 * t2 * t2
    return down2 * t2 * t2, down1 * corr, p0, up1 * corr, up2 * t2 * t2


def _moments4(na, nb, eps, t2, variant):
    if variant == "v21":
        A, B, C, D = _abcd(na, nb)
        lin = 6 * na - 4 * nb + 1
    else:
        A, B, C, D = _abcd(nb, na)
        D = -D
        lin = 6 * nb - 4 * na + 1
    mean_w = 2 * eps * t2 * D * (1 - (2.0 / 3.0) * t2 * lin)
    second_w = 2 * t2 * eps**2 * (A - 2 * t2 * (A * B - 4 * C))
    return mean_w, second_w


def mean_work_4th_kernel(na, nb, eps, alpha, variant):
    """<W> through theta^4 at theta = sqrt(alpha) * theta_bar(4); vectorized."""
    a, b = (na, nb) if variant == "v21" else (nb, na)
    B = _abcd(a, b)[1]
    return _moments4(na, nb, eps, alpha / (2 * B), variant)[0]


def snr_4th_kernel(na, nb, eps, alpha, variant):
    """<W>^2 / (<W^2> - <W>^2) through theta^4; vectorized."""
    a, b = (na, nb) if variant == "v21" else (nb, na)
    B = _abcd(a, b)[1]
    mean_w, second_w = _moments4(na, nb, eps, alpha / (2 * B), variant)
    return mean_w**2 / (second_w - mean_w**2)


def mean_work_2nd_kernel(n, m, omega_a, x, y, beta_omega_a, alpha):
    """alpha omega_a (n - m x) tanh(beta_a omega_a (m x y - n) / 2); vectorized."""
    return alpha * omega_a * (n - m * x) * np.tanh(beta_omega_a * (m * x * y - n) / 2.0)

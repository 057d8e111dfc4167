"""Working-point optimization of mean work and SNR.

All objectives are closed forms, so searches are exhaustive grids plus
golden-section refinement; nothing is randomized and argmax selection uses
a fixed iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoFeasiblePairError, PhysicsDomainError, UnsupportedVariantError
from .fock import MAX_FACTORIAL_ORDER, EngineParams
from .perturbative import mean_work_2nd_kernel, mean_work_4th_kernel, snr_4th_kernel

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OptimizationResult:
    objective: str
    argmax: dict[str, float]
    value: float
    grid_trace: list[tuple[tuple[float, ...], float]] = field(default_factory=list)
    method: str = "grid"


def golden_section_max(f, a, b, tol=1e-10, max_iter=500):
    """Maximize a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def _snr_2nd(n, m, x, y, bw, alpha):
    # alpha tanh^2(z/2) at theta = sqrt(alpha) theta_bar
    return alpha * math.tanh(bw * (m * x * y - n) / 2.0) ** 2


def optimize_nm(
    params_base: EngineParams,
    alpha: float,
    n_max: int,
    m_max: int,
    objective: str = "mean_work",
) -> OptimizationResult:
    """Best integer coupling (n, m) for fixed frequencies and temperatures.

    Only pairs with x < n/m < x*y are feasible. Ties go to the smaller n+m,
    then the smaller n.
    """
    if n_max > MAX_FACTORIAL_ORDER or m_max > MAX_FACTORIAL_ORDER:
        raise PhysicsDomainError(f"n_max, m_max must be <= {MAX_FACTORIAL_ORDER}")
    x, y = params_base.x, params_base.y
    wa = params_base.omega_a
    bw = params_base.beta_a * wa
    pairs = sorted(
        ((n, m) for n in range(1, n_max + 1) for m in range(1, m_max + 1)
         if x < n / m < x * y),
        key=lambda p: (p[0] + p[1], p[0]),
    )
    if not pairs:
        raise NoFeasiblePairError(
            f"no (n, m) with n <= {n_max}, m <= {m_max} satisfies {x:.4g} < n/m < {x * y:.4g}"
        )
    trace = []
    best, best_val = None, -math.inf
    for n, m in pairs:
        if objective == "mean_work":
            val = float(mean_work_2nd_kernel(n, m, wa, x, y, bw, alpha))
        elif objective == "snr":
            val = _snr_2nd(n, m, x, y, bw, alpha)
        else:
            raise PhysicsDomainError(f"unknown objective {objective!r}")
        trace.append(((float(n), float(m)), val))
        if val > best_val:
            best, best_val = (n, m), val
    return OptimizationResult(objective, {"n": best[0], "m": best[1]}, best_val, trace,
                              "grid")


def optimize_xmax(
    x: float,
    y: float,
    beta_a_omega_a: float,
    alpha: float,
    m: int = 1,
    omega_a: float = 1.0,
) -> OptimizationResult:
    """Maximize the second-order mean work over a continuous x_max = n/m.

    The search runs on (x, x*y) by golden section. The result also carries
    the quadratic-regime estimate x (y + 1) / 2 and its relative gap to the
    numeric optimum.
    """
    if x <= 0 or y <= 0:
        raise PhysicsDomainError("x and y must be positive")

    def f(xm):
        return float(mean_work_2nd_kernel(m * xm, m, omega_a, x, y, beta_a_omega_a, alpha))

    lo, hi = x, x * y
    if hi <= lo:
        # no forward window; scan a bracket around x instead
        lo, hi = 0.0, 2.0 * max(x, x * y)
    grid = np.linspace(lo, hi, 65)
    trace = [((float(g),), f(g)) for g in grid]
    k = int(np.argmax([v for _, v in trace]))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    xm, val = golden_section_max(f, a, b)
    if trace[k][1] > val:
        xm, val = grid[k], trace[k][1]
    analytic = x * (y + 1.0) / 2.0
    return OptimizationResult(
        "mean_work",
        {"x_max": float(xm), "analytic": analytic,
         "relative_gap": abs(xm - analytic) / analytic},
        float(val), trace, "golden_section",
    )


def _freq_objective(variant, beta_a, y, alpha, objective):
    n, m = (2, 1) if variant == "v21" else (1, 2)

    def f(log_bw, log_x):
        bw = np.exp(log_bw)
        x = np.exp(log_x)
        wa = bw / beta_a
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            na = 1.0 / np.expm1(bw)
            nb = 1.0 / np.expm1(bw * x * y)
            eps = (n - m * x) * wa
            if objective == "mean_work":
                val = mean_work_4th_kernel(na, nb, eps, alpha, variant)
            else:
                val = snr_4th_kernel(na, nb, eps, alpha, variant)
        return np.where(np.isfinite(val), val, -np.inf)

    return f, n, m


def optimize_frequency_4th(
    variant: str,
    beta_a: float,
    y: float,
    alpha: float,
    objective: str = "mean_work",
    grid: int = 64,
    refinements: int = 2,
    zoom: float = 8.0,
    bw_range: tuple[float, float] = (1e-2, 1e2),
) -> OptimizationResult:
    """Jointly maximize the fourth-order objective over omega_a and x.

    A ``grid`` x ``grid`` log-spaced sweep over beta_a*omega_a and over the
    variant's heat-engine window of x is refined ``refinements`` times,
    each time shrinking the window by ``zoom`` around the incumbent.
    """
    if variant not in ("v21", "v12"):
        raise UnsupportedVariantError(f"unknown variant {variant!r}")
    f, n, m = _freq_objective(variant, beta_a, y, alpha, objective)
    x_lo, x_hi = n / (m * y), n / m
    if x_lo >= x_hi:
        raise PhysicsDomainError("no heat-engine window for this temperature ratio")
    # keep strictly inside the window
    lb = [math.log(bw_range[0]), math.log(x_lo) + 1e-9]
    ub = [math.log(bw_range[1]), math.log(x_hi) - 1e-9]
    trace = []
    center = None
    width = [ub[0] - lb[0], ub[1] - lb[1]]
    best_val = -math.inf
    best = None
    for level in range(refinements + 1):
        if center is None:
            lo, hi = list(lb), list(ub)
        else:
            lo = [max(lb[i], center[i] - width[i] / 2) for i in (0, 1)]
            hi = [min(ub[i], center[i] + width[i] / 2) for i in (0, 1)]
        g0 = np.linspace(lo[0], hi[0], grid)
        g1 = np.linspace(lo[1], hi[1], grid)
        vals = f(g0[:, None], g1[None, :])
        i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if level == 0:
            trace = [((float(np.exp(a) / beta_a), float(np.exp(b))), float(v))
                     for a, row in zip(g0, vals) for b, v in zip(g1, row)]
        if vals[i, j] > best_val:
            best_val = float(vals[i, j])
            best = (g0[i], g1[j])
        center = best
        width = [w / zoom for w in width]
    bw, x = float(np.exp(best[0])), float(np.exp(best[1]))
    return OptimizationResult(
        objective,
        {"omega_a": bw / beta_a, "x": x, "beta_omega_a": bw},
        best_val, trace, "grid_then_refine",
    )

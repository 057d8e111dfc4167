"""Exact evolution on a truncated two-mode Fock space.

This is the brute-force reference the closed-form expansions are checked
against. The coupling only moves population along chains
``(i, j) -> (i + n, j - m)`` (it conserves ``m*i + n*j``), so the unitary is
block diagonal and each block is a short tridiagonal generator. The dense
construction is kept for small spaces and for cross-checks.

Basis ordering for dense matrices is ``index = i * dim_b + j`` with ``i`` the
mode-A and ``j`` the mode-B occupation.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, ResourceError, TruncationError
from .fock import EngineParams, build_mode_operators, thermal_state_diag

DEFAULT_TAIL_TOLERANCE = 1e-9
DEFAULT_LEAKAGE_TOLERANCE = 1e-8
DEFAULT_DIMS_CAP = 256
MIN_DIM = 8
UNITARITY_TOL = 1e-10


class Method(str, enum.Enum):
    ORACLE = "oracle"
    PERT2 = "pert2"
    PERT4 = "pert4"


@dataclass(frozen=True)
class TruncationConfig:
    dim_a: int
    dim_b: int
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE
    leakage_tolerance: float = DEFAULT_LEAKAGE_TOLERANCE
    dims_cap: int = DEFAULT_DIMS_CAP

    def check(self, params: EngineParams) -> None:
        if self.dim_a < params.n + 2 or self.dim_b < params.m + 2:
            raise ConfigError(
                f"truncation {self.dim_a}x{self.dim_b} too small for "
                f"n={params.n}, m={params.m} (need dim_a >= n+2, dim_b >= m+2)"
            )


@dataclass(frozen=True)
class WorkHeatDistribution:
    """Joint law of (W, Q_H) on the line W = k*quantum_w, Q_H = k*quantum_qh."""

    quantum_w: float
    quantum_qh: float
    points: tuple[tuple[int, float], ...]
    off_line_mass: float = 0.0
    method: Method = Method.ORACLE
    leakage: float = 0.0

    def probability(self, k: int) -> float:
        for kk, p in self.points:
            if kk == k:
                return p
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return dict(self.points)

    @property
    def total(self) -> float:
        return math.fsum(p for _, p in self.points)

    def max_abs_difference(self, other: "WorkHeatDistribution") -> float:
        a, b = self.as_dict(), other.as_dict()
        return max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


@dataclass(frozen=True)
class MomentReport:
    mean_w: float
    second_w: float
    var_w: float
    mean_qh: float
    mean_qc: float
    entropy_production: float
    efficiency: float = math.nan
    snr: float = math.nan
    method: Method = Method.ORACLE

    @property
    def rf(self) -> float:
        """Relative fluctuations var(W)/<W>^2."""
        if self.mean_w == 0.0:
            return math.inf
        return self.var_w / self.mean_w**2


def _resolve_theta(params: EngineParams, theta: float | None) -> float:
    if theta is not None:
        return float(theta)
    from .perturbative import resolve_theta

    return resolve_theta(params, order=2)


# -- chain decomposition -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class _ChainGroup:
    i: np.ndarray  # (K, L) mode-A occupations along each chain
    j: np.ndarray  # (K, L) mode-B occupations
    c: np.ndarray  # (K, L-1) matrix elements <s_{k+1}| a^dag^n b^m |s_k>


@functools.lru_cache(maxsize=64)
def _chains(n: int, m: int, dim_a: int, dim_b: int) -> tuple[_ChainGroup, ...]:
    ii, jj = np.meshgrid(np.arange(dim_a), np.arange(dim_b), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    start = ~((ii >= n) & (jj + m < dim_b))
    i0, j0 = ii[start], jj[start]
    length = 1 + np.minimum((dim_a - 1 - i0) // n, j0 // m)
    groups = []
    for L in np.unique(length):
        sel = length == L
        steps = np.arange(L)
        ci = i0[sel][:, None] + n * steps
        cj = j0[sel][:, None] - m * steps
        ia, jb = ci[:, :-1].astype(float), cj[:, :-1].astype(float)
        c2 = np.ones_like(ia)
        for r in range(1, n + 1):
            c2 = c2 * (ia + r)
        for r in range(m):
            c2 = c2 * (jb - r)
        groups.append(_ChainGroup(ci, cj, np.sqrt(c2)))
    return tuple(groups)


def _block_unitaries(group: _ChainGroup, zeta: complex) -> np.ndarray:
    K, L = group.i.shape
    if L == 1:
        return np.ones((K, 1, 1), dtype=complex)
    h = np.zeros((K, L, L), dtype=complex)
    idx = np.arange(L - 1)
    # H = iG with G[k+1,k] = zeta*c, G[k,k+1] = -conj(zeta)*c
    h[:, idx + 1, idx] = 1j * zeta * group.c
    h[:, idx, idx + 1] = -1j * np.conj(zeta) * group.c
    w, u = np.linalg.eigh(h)
    v = (u * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(u, 1, 2))
    defect = np.abs(v @ np.conj(np.swapaxes(v, 1, 2)) - np.eye(L)).max()
    if defect > UNITARITY_TOL:
        raise NumericalError(f"block unitary lost unitarity: defect {defect:.3g}")
    return v


def _thermal_weights(params: EngineParams, trunc: TruncationConfig):
    pa = thermal_state_diag(params.beta_a, params.omega_a, trunc.dim_a).normalized()
    pb = thermal_state_diag(params.beta_b, params.omega_b, trunc.dim_b).normalized()
    return pa, pb


def _evolve(params, trunc, theta):
    """Yield (group, initial weights, transition matrix |V|^2) per chain length."""
    pa, pb = _thermal_weights(params, trunc)
    for g in _chains(params.n, params.m, trunc.dim_a, trunc.dim_b):
        v = _block_unitaries(g, complex(theta))
        yield g, pa[g.i] * pb[g.j], np.abs(v) ** 2


def _inflow(t, w, top):
    """Mass carried by the stroke from outside ``top`` into it; top is [K, L]."""
    return float(np.einsum("kfs,ks,kf->", t, w * ~top, top.astype(float)))


def _leakage_by_mode(params, trunc, theta) -> tuple[float, float]:
    """Population the stroke moves onto the top n (A) / m (B) levels.

    Thermal population already sitting there is not counted: it is bounded
    by the tail criterion, and at theta = 0 the leakage is exactly zero.
    """
    top_a = trunc.dim_a - params.n
    top_b = trunc.dim_b - params.m
    leak_a = leak_b = 0.0
    for g, w, t in _evolve(params, trunc, theta):
        leak_a += _inflow(t, w, g.i >= top_a)
        leak_b += _inflow(t, w, g.j >= top_b)
    return leak_a, leak_b


# -- public operations -------------------------------------------------------


def _tail_dim(beta_omega: float, tol: float, floor: int, cap: int, name: str) -> int:
    def ok(d):
        return -beta_omega * d < math.log(tol)

    if ok(floor):
        return floor
    lo = hi = floor
    while not ok(hi):
        if hi >= cap:
            raise ResourceError(
                f"{name}={beta_omega:.4g} needs more than {cap} Fock levels "
                f"for thermal tail < {tol:g}"
            )
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def adaptive_truncation(
    params: EngineParams,
    tail_tol: float = DEFAULT_TAIL_TOLERANCE,
    leak_tol: float = DEFAULT_LEAKAGE_TOLERANCE,
    dims_cap: int = DEFAULT_DIMS_CAP,
    theta: float | None = None,
) -> TruncationConfig:
    """Smallest per-mode dimensions meeting the tail and leakage tolerances.

    Each dimension starts at 8 (or n+2 / m+2 if larger), is doubled until the
    criterion passes and is then bisected back down.
    """
    for name, tol in (("tail_tol", tail_tol), ("leak_tol", leak_tol)):
        if not 0.0 < tol <= 1e-2:
            raise ConfigError(f"{name} must lie in (0, 1e-2], got {tol}")
    theta = _resolve_theta(params, theta)
    floor_a = max(MIN_DIM, params.n + 2)
    floor_b = max(MIN_DIM, params.m + 2)
    if max(floor_a, floor_b) > dims_cap:
        raise ResourceError(f"dims_cap={dims_cap} below the minimum dimension")
    dims = [
        _tail_dim(params.beta_a * params.omega_a, tail_tol, floor_a, dims_cap,
                  "beta_a*omega_a"),
        _tail_dim(params.beta_b * params.omega_b, tail_tol, floor_b, dims_cap,
                  "beta_b*omega_b"),
    ]
    if theta == 0.0:
        return TruncationConfig(dims[0], dims[1], tail_tol, leak_tol, dims_cap)

    names = ("mode A (n, theta, beta_a*omega_a)", "mode B (m, theta, beta_b*omega_b)")

    def leaks(d):
        return _leakage_by_mode(params, TruncationConfig(d[0], d[1]), theta)

    # grow whichever mode leaks until both pass
    while True:
        la, lb = leaks(dims)
        bad = [k for k, v in enumerate((la, lb)) if v >= leak_tol]
        if not bad:
            break
        for k in bad:
            if dims[k] >= dims_cap:
                raise ResourceError(
                    f"leakage {max(la, lb):.3g} on {names[k]} still above "
                    f"{leak_tol:g} at dims_cap={dims_cap}"
                )
            dims[k] = min(2 * dims[k], dims_cap)
    # bisect each mode back down, keeping the other fixed
    floors = [
        _tail_dim(params.beta_a * params.omega_a, tail_tol, floor_a, dims_cap, ""),
        _tail_dim(params.beta_b * params.omega_b, tail_tol, floor_b, dims_cap, ""),
    ]
    for k in (0, 1):
        lo, hi = max(floors[k], dims[k] // 2), dims[k]
        probe = list(dims)
        probe[k] = lo
        if lo < hi and max(leaks(probe)) < leak_tol:
            hi = lo
        while hi - lo > 1:
            mid = (lo + hi) // 2
            probe[k] = mid
            if max(leaks(probe)) < leak_tol:
                hi = mid
            else:
                lo = mid
        dims[k] = hi
    return TruncationConfig(dims[0], dims[1], tail_tol, leak_tol, dims_cap)


def build_generator(
    params: EngineParams, trunc: TruncationConfig, theta: complex | None = None
) -> np.ndarray:
    """Dense generator theta*(a^dag^n (x) b^m - a^n (x) b^dag^m)."""
    if params.n >= trunc.dim_a or params.m >= trunc.dim_b:
        raise ConfigError(
            f"n={params.n}, m={params.m} do not fit in {trunc.dim_a}x{trunc.dim_b}"
        )
    theta = _resolve_theta(params, theta) if theta is None else theta
    a = build_mode_operators(trunc.dim_a).annihilation
    b = build_mode_operators(trunc.dim_b).annihilation
    an = np.linalg.matrix_power(a, params.n)
    bm = np.linalg.matrix_power(b, params.m)
    x = np.kron(an.conj().T, bm)
    return theta * x - np.conj(theta) * x.conj().T


def _series_exp(g: np.ndarray) -> np.ndarray:
    norm = np.abs(g).sum(axis=0).max()
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    a = g / 2.0**s
    anorm = norm / 2.0**s
    result = np.eye(g.shape[0], dtype=complex)
    term = np.eye(g.shape[0], dtype=complex)
    k = 0
    # remainder of the truncated Taylor series is below anorm^(k+1)/(k+1)! * e^anorm
    while anorm ** (k + 1) / math.factorial(k + 1) * math.exp(anorm) > 1e-17:
        k += 1
        term = term @ a / k
        result = result + term
    for _ in range(s):
        result = result @ result
    return result


def unitary_exp(g: np.ndarray, method: str = "eigh") -> np.ndarray:
    """exp(G) for anti-Hermitian G, with a unitarity certificate.

    ``eigh`` diagonalizes the Hermitian matrix iG; ``series`` uses a
    scaling-and-squaring Taylor series and serves as a cross-check.
    """
    g = np.asarray(g, dtype=complex)
    scale = max(1.0, float(np.abs(g).max(initial=0.0)))
    if np.abs(g + g.conj().T).max(initial=0.0) > 1e-12 * scale:
        raise NumericalError("generator is not anti-Hermitian")
    if method == "eigh":
        w, u = np.linalg.eigh(1j * g)
        v = (u * np.exp(-1j * w)) @ u.conj().T
    elif method == "series":
        v = _series_exp(g)
    else:
        raise ConfigError(f"unknown exponential method {method!r}")
    defect = np.abs(v @ v.conj().T - np.eye(g.shape[0])).max(initial=0.0)
    if defect > UNITARITY_TOL:
        raise NumericalError(f"unitarity certificate failed: defect {defect:.3g}")
    return v


def _finish(params, trunc, mass: dict, off_line: float, leakage: float, total: float):
    off_line = max(off_line, abs(1.0 - total) if total > 0 else 0.0)
    # The truncated generator still conserves m*N_a + n*N_b, so off-line
    # mass stays at roundoff; leakage onto the top levels is what signals
    # a too-small truncation.
    for label, value in (("off-line mass", off_line), ("top-level leakage", leakage)):
        if value > trunc.leakage_tolerance:
            raise TruncationError(
                f"{label} {value:.3g} exceeds leakage tolerance "
                f"{trunc.leakage_tolerance:g}; increase dim_a={trunc.dim_a} / "
                f"dim_b={trunc.dim_b}"
            )
    eps = params.quantum
    points = tuple(sorted((int(k), float(p)) for k, p in mass.items()))
    return WorkHeatDistribution(
        quantum_w=0.0 if eps == 0.0 else eps,
        quantum_qh=params.n * params.omega_a,
        points=points,
        off_line_mass=float(off_line),
        method=Method.ORACLE,
        leakage=float(leakage),
    )


def two_point_distribution(
    params: EngineParams,
    trunc: TruncationConfig,
    theta: float | None = None,
    dense: bool = False,
) -> WorkHeatDistribution:
    """Two-point-measurement joint distribution of work and hot-bath heat.

    A transition (i, j) -> (i', j') carries W = omega_a (i - i') +
    omega_b (j - j') and Q_H = omega_a (i - i'). It lies on the support line
    with index k when i - i' = k n and j' - j = k m; the test is done on the
    integer quanta, never on energies.
    """
    trunc.check(params)
    theta = _resolve_theta(params, theta)
    if dense:
        return _dense_distribution(params, trunc, theta)
    mass: dict[int, float] = {}
    leak = 0.0
    top_a, top_b = trunc.dim_a - params.n, trunc.dim_b - params.m
    for g, w, t in _evolve(params, trunc, theta):
        L = g.i.shape[1]
        joint = t * w[:, None, :]  # joint[K, f, s]
        for k in range(-(L - 1), L):
            p = float(np.trace(joint, offset=k, axis1=1, axis2=2).sum())
            if p != 0.0:
                mass[k] = mass.get(k, 0.0) + p
        leak += _inflow(t, w, (g.i >= top_a) | (g.j >= top_b))
    total = math.fsum(mass.values())
    return _finish(params, trunc, mass, 0.0, leak, total)


def _dense_distribution(params, trunc, theta):
    v = unitary_exp(build_generator(params, trunc, theta))
    pa, pb = _thermal_weights(params, trunc)
    w = np.kron(pa, pb)
    joint = np.abs(v) ** 2 * w[None, :]  # joint[f, s]
    ia = np.repeat(np.arange(trunc.dim_a), trunc.dim_b)
    jb = np.tile(np.arange(trunc.dim_b), trunc.dim_a)
    di = ia[None, :] - ia[:, None]  # i_s - i_f
    dj = jb[:, None] - jb[None, :]  # j_f - j_s
    k = np.floor_divide(di, params.n)
    on_line = (np.mod(di, params.n) == 0) & (dj == k * params.m)
    mass: dict[int, float] = {}
    for kk in np.unique(k[on_line]):
        mass[int(kk)] = float(joint[on_line & (k == kk)].sum())
    off = float(joint[~on_line].sum())
    top = (ia >= trunc.dim_a - params.n) | (jb >= trunc.dim_b - params.m)
    leak = float(joint[np.ix_(top, ~top)].sum())
    return _finish(params, trunc, mass, off, leak, math.fsum(mass.values()) + off)


def joint_moment(dist: WorkHeatDistribution, l: int, s: int) -> float:
    """<W^l Q_H^s> of a distribution supported on the correlation line."""
    return math.fsum(
        p * (k * dist.quantum_w) ** l * (k * dist.quantum_qh) ** s for k, p in dist.points
    )


def exact_moments(dist: WorkHeatDistribution, params: EngineParams) -> MomentReport:
    mean_w = joint_moment(dist, 1, 0)
    second_w = joint_moment(dist, 2, 0)
    mean_qh = joint_moment(dist, 0, 1)
    mean_qc = -(params.m * params.omega_b) / (params.n * params.omega_a) * mean_qh
    var_w = second_w - mean_w**2
    sigma = -params.beta_a * mean_qh - params.beta_b * mean_qc
    eff = mean_w / mean_qh if mean_qh != 0.0 else math.nan
    snr = mean_w**2 / var_w if var_w > 0.0 and dist.quantum_w != 0.0 else math.nan
    return MomentReport(mean_w, second_w, var_w, mean_qh, mean_qc, sigma, eff, snr,
                        dist.method)


def exact_char_fn(
    params: EngineParams,
    trunc: TruncationConfig,
    lam: float,
    mu: float,
    theta: float | None = None,
    form: str = "symmetric",
) -> complex:
    """Characteristic function chi(lambda, mu) = <exp(i lambda W + i mu Q_H)>.

    ``symmetric`` evaluates Tr[V_theta^dag V_zeta rho_0] with
    zeta = theta exp(-i xi), xi = lambda (n omega_a - m omega_b) + mu n omega_a.
    ``direct`` evaluates the four-exponential two-point definition.
    """
    trunc.check(params)
    theta = _resolve_theta(params, theta)
    pa, pb = _thermal_weights(params, trunc)
    total = 0j
    if form == "symmetric":
        xi = lam * params.quantum + mu * params.n * params.omega_a
        zeta = theta * np.exp(-1j * xi)
        for g in _chains(params.n, params.m, trunc.dim_a, trunc.dim_b):
            vt = _block_unitaries(g, complex(theta))
            vz = _block_unitaries(g, zeta)
            diag = np.einsum("kfs,kfs->ks", np.conj(vt), vz)
            total += (pa[g.i] * pb[g.j] * diag).sum()
    elif form == "direct":
        for g in _chains(params.n, params.m, trunc.dim_a, trunc.dim_b):
            v = _block_unitaries(g, complex(theta))
            ea = params.omega_a * g.i
            phase = np.exp(1j * (mu * ea + lam * (ea + params.omega_b * g.j)))
            # sum_s w_s e^{i phi_s} sum_f |V_fs|^2 e^{-i phi_f}
            inner = np.einsum("kfs,kf->ks", np.abs(v) ** 2, np.conj(phase))
            total += (pa[g.i] * pb[g.j] * phase * inner).sum()
    else:
        raise ConfigError(f"unknown characteristic-function form {form!r}")
    return complex(total)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosonic_engine import (
    ConfigError,
    EngineParams,
    Method,
    NumericalError,
    ResourceError,
    TruncationConfig,
    TruncationError,
    adaptive_truncation,
    build_generator,
    char_fn_2nd,
    exact_char_fn,
    exact_moments,
    joint_moment,
    theta_bar,
    two_point_distribution,
    unitary_exp,
    work_distribution_2nd,
)
from bosonic_engine.fock import build_mode_operators


def engine(n=1, m=1, bwa=0.5, bwb=5.0, x=0.5):
    """Engine with omega_a = 1, omega_b = x and the given beta*omega products."""
    return EngineParams(n, m, 1.0, x, bwa, bwb / x)


# -- truncation --------------------------------------------------------------


def test_cold_modes_use_minimum_grid():
    p = engine(bwa=5.0, bwb=5.0)
    t = adaptive_truncation(p, theta=1e-3)
    assert (t.dim_a, t.dim_b) == (8, 8)


def test_hot_mode_needs_geometric_tail():
    p = engine(bwa=0.1)
    t = adaptive_truncation(p, tail_tol=1e-9, theta=0.0)
    assert t.dim_a >= 200
    # smallest D with exp(-0.1 D) < 1e-9 is 208
    assert t.dim_a == 208
    assert math.exp(-0.1 * t.dim_a) < 1e-9 <= math.exp(-0.1 * (t.dim_a - 1))


def test_zero_theta_is_tail_only():
    p = engine(bwa=0.5)
    t0 = adaptive_truncation(p, theta=0.0)
    assert t0.dim_a == 42  # exp(-0.5 * 42) < 1e-9
    d = two_point_distribution(p, t0, 0.0)
    assert d.points == ((0, 1.0),)
    assert d.leakage == 0.0 and d.off_line_mass == 0.0


@pytest.mark.parametrize("tol", [0.0, -1.0, 0.1])
def test_tolerance_domain(tol):
    with pytest.raises(ConfigError):
        adaptive_truncation(engine(), tail_tol=tol)


def test_dims_cap_names_parameter():
    with pytest.raises(ResourceError, match="beta_a\\*omega_a"):
        adaptive_truncation(engine(bwa=0.01), dims_cap=256, theta=0.0)


def test_truncation_floor():
    with pytest.raises(ConfigError):
        TruncationConfig(3, 8).check(engine(n=2))


def test_small_truncation_raises_truncation_error():
    # theta large enough that the chains hit the top levels
    p = engine(bwa=0.5)
    with pytest.raises(TruncationError):
        two_point_distribution(p, TruncationConfig(8, 8), 0.6, dense=True)


# -- generator and exponential -----------------------------------------------


def test_generator_zero_and_swap_block():
    p = engine()
    t = TruncationConfig(2, 2)
    assert not build_generator(p, t, 0.0).any()
    g = build_generator(p, t, 0.3)
    nz = np.argwhere(np.abs(g) > 0)
    assert len(nz) == 2
    # basis index i*dim_b + j: |1,0> = 2, |0,1> = 1
    assert g[2, 1] == pytest.approx(0.3) and g[1, 2] == pytest.approx(-0.3)


def test_generator_needs_room():
    with pytest.raises(ConfigError):
        build_generator(engine(n=3), TruncationConfig(3, 8), 0.1)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.floats(0.0, 2.0))
def test_generator_is_anti_hermitian(n, m, theta):
    g = build_generator(engine(n, m), TruncationConfig(n + 4, m + 4), theta)
    assert np.abs(g + g.conj().T).max() < 1e-14


def test_unitary_identity_and_swap_sign():
    assert np.allclose(unitary_exp(np.zeros((5, 5))), np.eye(5))
    theta = 0.4
    v = unitary_exp(build_generator(engine(), TruncationConfig(2, 2), theta))
    # V|1,0> = cos(theta)|1,0> - sin(theta)|0,1>
    assert v[1, 2] == pytest.approx(-math.sin(theta), abs=1e-15)
    assert v[2, 1] == pytest.approx(math.sin(theta), abs=1e-15)
    assert v[2, 2] == pytest.approx(math.cos(theta), abs=1e-15)


def test_random_unitary_spectrum(rng):
    x = rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50))
    g = (x - x.conj().T) / 2
    v = unitary_exp(g)
    assert np.abs(np.abs(np.linalg.eigvals(v)) - 1).max() < 1e-10
    assert np.abs(v - unitary_exp(g, method="series")).max() < 1e-10


def test_exponential_rejects_hermitian():
    with pytest.raises(NumericalError):
        unitary_exp(np.eye(3))


def test_conservation_symmetry(rng):
    for _ in range(5):
        n, m = rng.integers(1, 4, size=2)
        t = TruncationConfig(int(n) + 6, int(m) + 6)
        g = build_generator(engine(int(n), int(m)), t, float(rng.uniform(0, 2)))
        na = np.diag(build_mode_operators(t.dim_a).number_diagonal)
        nb = np.diag(build_mode_operators(t.dim_b).number_diagonal)
        q = m * np.kron(na, np.eye(t.dim_b)) + n * np.kron(np.eye(t.dim_a), nb)
        assert np.abs(g @ q - q @ g).max() < 1e-12


# -- distribution ------------------------------------------------------------


@pytest.mark.parametrize("theta", [0.05, 0.3, 1.0])
def test_swap_benchmark(theta):
    p = engine(bwa=0.5, bwb=2.0)
    t = adaptive_truncation(p, theta=theta)
    d = two_point_distribution(p, t, theta)
    occ = p.occupations()
    expected = (occ.n_a - occ.n_b) * (p.omega_a - p.omega_b) * math.sin(theta) ** 2
    assert exact_moments(d, p).mean_w == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("nm", [(1, 1), (2, 1), (1, 2), (2, 3)])
def test_block_and_dense_paths_agree(nm):
    p = engine(*nm, bwa=1.0, bwb=3.0)
    t = adaptive_truncation(p, theta=0.05)
    a = two_point_distribution(p, t, 0.05)
    b = two_point_distribution(p, t, 0.05, dense=True)
    assert a.max_abs_difference(b) < 1e-12
    assert b.off_line_mass < 1e-12
    assert a.total == pytest.approx(1.0, abs=1e-10)


def test_pert2_convergence_at_hot_bath():
    # n=2, m=1, beta_a omega_a = 0.1, beta_b omega_b = 10
    p = engine(2, 1, bwa=0.1, bwb=10.0)
    tb = theta_bar(p, 2).theta_bar
    errs = []
    for th in (tb / 16, tb / 32):
        d = two_point_distribution(p, adaptive_truncation(p, theta=th), th)
        q = work_distribution_2nd(p, th)
        errs.append(max(abs(d.probability(k) - q.probability(k)) for k in (-1, 1)))
    assert 12 <= errs[0] / errs[1] <= 20


def test_degenerate_quantum():
    p = EngineParams(2, 1, 1.0, 2.0, 1.0, 2.0)
    assert p.quantum == 0.0
    d = two_point_distribution(p, adaptive_truncation(p, theta=0.05), 0.05)
    assert d.quantum_w == 0.0
    mom = exact_moments(d, p)
    assert mom.mean_w == 0.0 and math.isnan(mom.snr)
    assert mom.mean_qh != 0.0


# -- moments -----------------------------------------------------------------


def test_zero_coupling_moments():
    p = engine()
    mom = exact_moments(two_point_distribution(p, TruncationConfig(42, 8), 0.0), p)
    assert mom.mean_w == mom.second_w == mom.mean_qh == 0.0
    assert math.isnan(mom.efficiency)


@settings(max_examples=15, deadline=None)
@given(
    st.sampled_from([(1, 1), (2, 1), (1, 2), (3, 2)]),
    st.floats(0.3, 3.0),
    st.floats(0.05, 0.95),
    st.floats(1.5, 20.0),
    st.floats(0.005, 0.05),
)
def test_moment_identities(nm, bwa, frac, y, theta):
    n, m = nm
    # x strictly inside the heat-engine window n/(m y) < x < n/m
    x = n / m * (1 / y + frac * (1 - 1 / y))
    p = EngineParams(n, m, 1.0, x, bwa, bwa * y)
    d = two_point_distribution(p, adaptive_truncation(p, theta=theta), theta)
    mom = exact_moments(d, p)
    w_qh = joint_moment(d, 1, 1)
    assert w_qh == pytest.approx(n * p.omega_a / p.quantum * mom.second_w, rel=1e-9)
    assert mom.mean_w == pytest.approx(mom.mean_qh + mom.mean_qc, rel=1e-10)
    assert mom.var_w == pytest.approx(mom.second_w - mom.mean_w**2, rel=1e-12)
    assert mom.entropy_production >= 0.0
    assert mom.entropy_production == pytest.approx(
        -p.beta_a * mom.mean_qh - p.beta_b * mom.mean_qc, rel=1e-12)


# -- characteristic function -------------------------------------------------


@pytest.fixture(scope="module")
def cf_setup():
    p = engine(2, 1, bwa=0.7, bwb=4.0, x=0.6)
    t = adaptive_truncation(p, theta=0.08)
    return p, t, 0.08


def test_char_fn_normalization(cf_setup):
    p, t, th = cf_setup
    assert exact_char_fn(p, t, 0.0, 0.0, th) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("lam,mu", [(0.3, 0.0), (1.1, -0.4), (-2.0, 0.7)])
def test_char_fn_forms_agree(cf_setup, lam, mu):
    p, t, th = cf_setup
    a = exact_char_fn(p, t, lam, mu, th)
    b = exact_char_fn(p, t, lam, mu, th, form="direct")
    assert abs(a - b) < 1e-9


def test_char_fn_periodicity(cf_setup):
    p, t, th = cf_setup
    period = 2 * math.pi / p.quantum
    a = exact_char_fn(p, t, 0.37, 0.0, th)
    b = exact_char_fn(p, t, 0.37 + period, 0.0, th)
    assert abs(a - b) < 1e-10


def test_fourier_inversion(cf_setup):
    p, t, th = cf_setup
    d = two_point_distribution(p, t, th, dense=True)
    ks = [k for k, _ in d.points]
    size = 2 * max(abs(k) for k in ks) + 1
    period = 2 * math.pi / p.quantum
    lams = np.arange(size) * period / size
    chi = np.array([exact_char_fn(p, t, lam, 0.0, th) for lam in lams])
    for k in range(-3, 4):
        # p(k) = (1/size) sum_j chi(lam_j) exp(-i k eps lam_j)
        pk = (chi * np.exp(-1j * k * p.quantum * lams)).mean().real
        assert pk == pytest.approx(d.probability(k), abs=1e-8)


def test_char_fn_second_order_richardson():
    p = engine(2, 1, bwa=0.7, bwb=4.0, x=0.6)
    lam = 0.9
    xi = lam * p.quantum
    errs = []
    for th in (0.02, 0.01):
        t = adaptive_truncation(p, theta=th)
        errs.append(abs(exact_char_fn(p, t, lam, 0.0, th) - char_fn_2nd(p, th, xi)))
    assert 12 <= errs[0] / errs[1] <= 20


def test_method_tags():
    p = engine()
    d = two_point_distribution(p, TruncationConfig(42, 8), 0.1)
    assert d.method is Method.ORACLE

import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bosonic_engine import (
    CouplingBoundError,
    CouplingSpec,
    EngineParams,
    PhysicsDomainError,
    UnsupportedVariantError,
    adaptive_truncation,
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
    two_point_distribution,
    work_distribution_2nd,
    work_distribution_4th,
)
from bosonic_engine.exact import joint_moment
from bosonic_engine.fock import ThermalOccupations
from bosonic_engine.perturbative import mean_work_alpha, swap_mean_work

occupation = st.floats(0.0, 50.0)
positive_bw = st.floats(0.05, 8.0)


def ratios(n, m, bwa, x, y, coupling=None):
    return EngineParams.from_ratios(n, m, bwa, x, y, coupling=coupling)


# -- second order ------------------------------------------------------------


@given(st.integers(1, 4), st.integers(1, 4), positive_bw, positive_bw)
def test_detailed_balance(n, m, bwa, bwb):
    p = EngineParams(n, m, 1.0, 1.0, bwa, bwb)
    c = second_order_coefficients(p)
    assert c.emit / c.absorb == pytest.approx(math.exp(p.affinity), rel=1e-10)
    assert (c.emit - c.absorb) / c.total == pytest.approx(
        math.tanh(p.affinity / 2), rel=1e-12, abs=1e-15)


def test_theta_bar_values():
    p = EngineParams(2, 1, 1.0, 1.0, 0.1, 10.0)
    # independent 30-digit evaluation of [2((N_A+1)^2 N_B + N_A^2 (N_B+1))]^(-1/2)
    assert theta_bar(p, 2).theta_bar == pytest.approx(0.0743633194519620677, rel=1e-12)
    assert theta_bar(p, 2).theta_bar == pytest.approx(0.0744, abs=1e-3)
    vac = EngineParams(1, 1, 1.0, 1.0, 800.0, 800.0)
    assert theta_bar(vac, 2).is_unbounded
    vac21 = EngineParams(2, 1, 1.0, 1.0, 800.0, 800.0)
    assert theta_bar(vac21, 4).theta_bar == pytest.approx(math.sqrt(1.5), rel=1e-12)
    with pytest.raises(UnsupportedVariantError):
        theta_bar(EngineParams(3, 2, 1.0, 1.0, 1.0, 1.0), 4)


def test_distribution_2nd_examples():
    p = EngineParams(1, 1, 1.0, 0.5, 0.1, 5.0)
    assert work_distribution_2nd(p, 0.0).points == ((0, 1.0),)
    pa = p.replace(coupling=CouplingSpec.alpha(0.1))
    assert work_distribution_2nd(pa).probability(0) == pytest.approx(0.9, abs=1e-12)
    with pytest.raises(CouplingBoundError, match="theta_bar"):
        work_distribution_2nd(p, 1.01 * theta_bar(p, 2).theta_bar)


def test_mean_work_alpha_form():
    p = EngineParams(1, 1, 1.0, 0.5, 0.1, 5.0, CouplingSpec.alpha(0.1))
    # 0.05 tanh(1.2) at 30 digits
    assert moments_2nd(p).mean_w == pytest.approx(0.0416827303506077629, rel=1e-12)
    assert mean_work_alpha(p, 0.1) == pytest.approx(0.0416827303506077629, rel=1e-12)


def test_mean_work_zero_at_balance():
    # m beta_b omega_b == n beta_a omega_a
    p = EngineParams(2, 1, 1.0, 0.5, 1.0, 4.0)
    assert p.affinity == 0.0
    assert moments_2nd(p, 0.01).mean_w == pytest.approx(0.0, abs=1e-18)


@given(st.integers(1, 3), st.integers(1, 3), positive_bw, positive_bw, st.floats(0.01, 0.99))
def test_alpha_and_theta_forms_agree(n, m, bwa, bwb, alpha):
    p = EngineParams(n, m, 1.0, 0.7, bwa, bwb / 0.7)
    assume(p.quantum != 0.0)
    mom = moments_2nd(p.replace(coupling=CouplingSpec.alpha(alpha)))
    # near the balance point z = 0 the affinity itself carries ~1e-15 roundoff
    assert mom.mean_w / mom.second_w * p.quantum == pytest.approx(
        math.tanh(p.affinity / 2), rel=1e-12, abs=1e-12)
    assert mom.mean_w == pytest.approx(mean_work_alpha(p, alpha), rel=1e-12,
                                       abs=1e-12 * alpha * abs(p.quantum))


def test_char_fn_2nd():
    p = EngineParams(2, 1, 1.0, 0.5, 0.5, 4.0)
    assert char_fn_2nd(p, 0.05, 0.0) == 1.0
    assert char_fn_2nd(p, 0.0, 1.3) == 1.0
    # k = +1 carries weight theta^2 emit: Im chi = theta^2 (emit - absorb) sin xi
    c = second_order_coefficients(p)
    assert char_fn_2nd(p, 0.05, 0.4).imag == pytest.approx(
        0.0025 * (c.emit - c.absorb) * math.sin(0.4), rel=1e-12)


def test_relative_fluctuations_examples():
    p = EngineParams(1, 4, 1.0, 0.5, 0.1, 5.0)
    with pytest.warns(UserWarning):
        res = relative_fluctuations_2nd(p, 0.1)
    # 10 coth^2(4.95) at 30 digits
    assert res.rf == pytest.approx(10.0020071886973033, rel=1e-12)
    assert res.rf == pytest.approx(10.0, abs=0.5)
    # x = 0.5 > n/m = 1/4, so this point is not a heat engine
    assert not res.heat_engine
    far = EngineParams(1, 1, 1.0, 0.5, 1e-3, 400.0)
    assert relative_fluctuations_2nd(far, 0.2).rf == pytest.approx(5.0, rel=1e-12)


def test_relative_fluctuations_warns_outside_engine():
    p = EngineParams(1, 1, 1.0, 2.0, 1.0, 5.0)
    with pytest.warns(UserWarning):
        relative_fluctuations_2nd(p, 0.5)


@settings(max_examples=200)
@given(st.integers(1, 4), st.integers(1, 4), st.floats(0.01, 5.0), st.floats(0.01, 0.99),
       st.floats(1.01, 200.0), st.floats(0.01, 0.99))
def test_pert2_tur_holds(n, m, bwa, frac, y, alpha):
    x = n / m * (1 / y + frac * (1 - 1 / y))
    p = ratios(n, m, bwa, x, y)
    res = relative_fluctuations_2nd(p, alpha)
    sigma = moments_2nd(p.replace(coupling=CouplingSpec.alpha(alpha))).entropy_production
    # z -> 0 loses digits to cancellation in m beta_b omega_b - n beta_a omega_a
    assert res.rf * sigma >= 2.0 * (1 - 1e-9)
    assert res.rf >= res.rf_lower_bound * (1 - 1e-12)


# -- fourth order ------------------------------------------------------------


def test_fourth_order_substitutions():
    c = fourth_order_coefficients(ThermalOccupations(0.0, 0.0), "v21")
    assert (c.A, c.C, c.D) == (0.0, 0.0, 0.0)
    assert c.B == pytest.approx(1 / 3)
    c = fourth_order_coefficients(ThermalOccupations(1.0, 0.0), "v21")
    assert (c.A, c.C, c.D) == (1.0, 3.0, 1.0)
    assert c.B == pytest.approx(25 / 3)


@given(occupation, occupation)
def test_v12_is_swapped_v21(na, nb):
    a = fourth_order_coefficients(ThermalOccupations(na, nb), "v12")
    b = fourth_order_coefficients(ThermalOccupations(nb, na), "v21")
    assert (a.A, a.B, a.C, a.D) == (b.A, b.B, b.C, b.D)
    assert abs(a.D) <= a.A * (1 + 1e-12)
    assert a.A >= 0 and a.C >= 0


def test_fourth_order_rejects_other_pairs():
    with pytest.raises(UnsupportedVariantError):
        fourth_order_coefficients(EngineParams(1, 1, 1.0, 1.0, 1.0, 1.0))
    with pytest.raises(UnsupportedVariantError):
        work_distribution_4th(EngineParams(3, 1, 1.0, 1.0, 1.0, 1.0), 0.01)


@settings(max_examples=200)
@given(st.sampled_from([(2, 1), (1, 2)]), positive_bw, positive_bw, st.floats(0.0, 1.0))
def test_fourth_order_normalization(nm, bwa, bwb, frac):
    p = EngineParams(*nm, 1.0, 0.3, bwa, bwb / 0.3)
    th = frac * theta_bar(p, 4).theta_bar
    try:
        d = work_distribution_4th(p, th)
    except CouplingBoundError:
        # theta_bar(4) keeps p(+-1) >= 0; p(0) can still go negative near it
        return
    assert d.total == pytest.approx(1.0, abs=1e-12)
    assert all(v >= 0 for _, v in d.points)


@settings(max_examples=50)
@given(st.sampled_from([(2, 1), (1, 2)]), positive_bw, positive_bw, st.floats(0.0, 0.9))
def test_moments_4th_match_distribution(nm, bwa, bwb, frac):
    p = EngineParams(*nm, 1.0, 0.3, bwa, bwb / 0.3)
    th = frac * min(theta_bar(p, 4).theta_bar, 1.0)
    try:
        d = work_distribution_4th(p, th)
    except CouplingBoundError:
        return
    mom = moments_4th(p, th)
    scale = max(abs(joint_moment(d, 2, 0)), 1e-300)
    assert mom.mean_w == pytest.approx(joint_moment(d, 1, 0), abs=1e-12 * scale)
    assert mom.second_w == pytest.approx(joint_moment(d, 2, 0), rel=1e-10, abs=1e-300)
    assert mom.var_w == pytest.approx(mom.second_w - mom.mean_w**2, rel=1e-12, abs=1e-300)


def test_fourth_order_leading_term():
    p = EngineParams(2, 1, 1.0, 0.3, 0.5, 2.0)
    ratio = moments_4th(p, 1e-5).mean_w / moments_2nd(p, 1e-5).mean_w
    assert ratio == pytest.approx(1.0, abs=1e-8)


def test_equal_occupations_absorb():
    # N_A == N_B: D = -N(N+1) < 0 so v21 absorbs work for omega_b < 2 omega_a
    p = EngineParams(2, 1, 1.0, 1.0, 0.7, 0.7)
    c = fourth_order_coefficients(p)
    n = p.occupations().n_a
    assert c.D == pytest.approx(-n * (n + 1), rel=1e-12)
    assert moments_4th(p, 0.05).mean_w < 0


def test_fourth_order_vs_oracle_at_hot_bath():
    # (2,1), beta_a omega_a = 0.1, y = 100, x = 1/2, theta = sqrt(alpha) theta_bar/2^k
    p = ratios(2, 1, 0.1, 0.5, 100.0)
    base = math.sqrt(0.5) * theta_bar(p, 4).theta_bar
    errs = []
    for th in (base / 2, base / 4):
        exact = two_point_distribution(p, adaptive_truncation(p, theta=th), th)
        errs.append(exact.max_abs_difference(work_distribution_4th(p, th)))
    assert 48 <= errs[0] / errs[1] <= 80


def test_snr_4th_and_delta():
    p = ratios(2, 1, 1.7, 1 / 40, 100.0)
    occ = p.occupations()
    delta = delta_coefficient(occ, "v21")
    assert delta > 0
    th = math.sqrt(0.5) * theta_bar(p, 4).theta_bar
    res = snr_4th(p, th)
    # the rescaling is 1 - alpha Delta at theta = sqrt(alpha) theta_bar(4)
    assert res.rescale == pytest.approx(1 - 0.5 * delta, rel=1e-12)
    sigma = moments_4th(p, th).entropy_production
    z = p.affinity
    assert res.snr == pytest.approx(sigma * math.tanh(z / 2) / z / (1 - 0.5 * delta),
                                    rel=1e-12)


def test_snr_4th_reduces_to_second_order():
    p = ratios(2, 1, 1.0, 0.3, 10.0)
    th = 1e-6
    m2 = moments_2nd(p, th)
    # SNR -> <W>^2 / <W^2> at leading order, i.e. Sigma tanh(z/2)/z
    assert snr_4th(p, th).snr == pytest.approx(m2.mean_w**2 / m2.second_w, rel=1e-6)


def test_snr_4th_vacuum_is_undefined():
    # exp(-1e4) underflows, so both occupations are exactly zero
    p = EngineParams(2, 1, 1.0, 0.5, 1e4, 2e4)
    assert p.occupations() == ThermalOccupations(0.0, 0.0)
    with pytest.raises(PhysicsDomainError):
        snr_4th(p, 0.1)


# -- swap and coupling ratios -----------------------------------------------


def test_swap_mean_work():
    p = EngineParams(1, 1, 1.0, 0.5, 0.5, 5.0)
    occ = p.occupations()
    assert swap_mean_work(p, math.pi / 2) == pytest.approx(
        (occ.n_a - occ.n_b) * 0.5, rel=1e-14)
    assert swap_mean_work(EngineParams(1, 1, 1.0, 0.5, 1.0, 2.0), 0.3) == pytest.approx(
        0.0, abs=1e-15)


def test_r12_asymptote():
    p = ratios(1, 2, 50.0, 0.25, 100.0)
    assert coupling_ratio(p, "r12") == pytest.approx(4 / 3, rel=1e-10)
    assert coupling_ratio(ratios(1, 2, 500.0, 0.25, 100.0), "r12") == pytest.approx(
        4 / 3, rel=1e-10)


@pytest.mark.parametrize("x", [1 / 10, 1 / 3, 1 / 2, 2 / 3])
def test_r21_crosses_one_near_two(x):
    from scipy.optimize import brentq

    root = brentq(lambda b: coupling_ratio(ratios(2, 1, b, x, 100.0), "r21") - 1, 0.3, 10)
    assert 1.5 < root < 2.3


@pytest.mark.parametrize("variant,nm", [("r21", (2, 1)), ("r12", (1, 2))])
@given(bw=st.floats(0.1, 5.0), x=st.floats(0.05, 0.45))
def test_coupling_ratio_matches_mean_work(variant, nm, bw, x):
    p = ratios(*nm, bw, x, 100.0)
    assume(p.affinity > 0 and p.quantum > 0)
    theta = 1e-3
    r = coupling_ratio(p, variant)
    occ = p.occupations()
    w11 = r * theta**2 * (occ.n_a - occ.n_b) * (p.omega_a - p.omega_b)
    assert w11 == pytest.approx(moments_2nd(p, theta).mean_w, rel=1e-10)


def test_coupling_ratio_singular():
    with pytest.raises(PhysicsDomainError):
        coupling_ratio(EngineParams(2, 1, 1.0, 1.0, 1.0, 2.0), "r21")


def test_moment_bound_warns_not_raises():
    p = EngineParams(2, 1, 1.0, 0.5, 0.5, 4.0)
    big = 2 * theta_bar(p, 4).theta_bar
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        moments_4th(p, big)
    assert caught
    with pytest.raises(CouplingBoundError):
        work_distribution_4th(p, big)


def test_kernels_are_vectorized():
    from bosonic_engine.perturbative import mean_work_2nd_kernel

    bw = np.array([0.1, 1.0])
    out = mean_work_2nd_kernel(2, 1, 1.0, 0.5, 100.0, bw, 0.5)
    assert out.shape == (2,)
    p = ratios(2, 1, 1.0, 0.5, 100.0, CouplingSpec.alpha(0.5, 2))
    assert out[1] == pytest.approx(moments_2nd(p).mean_w, rel=1e-12)

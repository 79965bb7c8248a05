import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import gamma

from roughkac.errors import DataError, DomainError, InsufficientDataError
from roughkac.fbm import sample_wiener_batch, volterra_from_increments, volterra_kernel
from roughkac.grid import Grid
from roughkac.levy_area import lm12_anchored
from roughkac.weak_convergence import (
    bound_lm_cont2, bound_terms, c_alpha, cf_distance_check, default_u_grid, ecf, even_moment_bound, fdd_distance,
    holder_tail, l2_norm, moment_checks, moment_slope, odd_moment_bound, phi_func, product_grid, psi_func,
    rb_reference_cf, sample_f_theta, tail_envelope_test, tail_trend_test, varphi_func,
)

one = lambda x: np.ones_like(np.asarray(x, dtype=float))
zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
ident = lambda x: np.asarray(x, dtype=float)


def test_ecf_trivial_cases():
    u = np.linspace(-2, 2, 5)
    assert np.allclose(ecf(np.zeros(10), u).values, 1.0)
    assert np.allclose(ecf(np.array([0.7]), u).values, np.exp(1j * u * 0.7))
    with pytest.raises(InsufficientDataError):
        ecf(np.zeros(0), u)


def test_ecf_gaussian():
    x = np.random.default_rng(0).standard_normal(100_000)
    est = ecf(x, np.array([1.0]))
    assert abs(est.values[0] - np.exp(-0.5)) <= 3 * est.stderr[0]


def test_fdd_distance_extremes():
    u = np.array([0.0, np.pi])
    assert fdd_distance(np.ones(5), np.ones(5), u) == 0.0
    assert fdd_distance(np.zeros(5), np.ones(5), u) == pytest.approx(2.0)
    with pytest.raises(DataError):
        fdd_distance(np.zeros((5, 2)), np.zeros((5, 3)), product_grid(np.array([0.0, 1.0]), 2))


def test_grids():
    assert default_u_grid().size == 25
    assert product_grid(np.arange(3.0), 2).shape == (9, 2)


def test_phi_closed_form_and_oracle():
    eps, T = 0.3, 1.0
    assert phi_func(one, eps, T) == pytest.approx(eps**2 / 2 * (1 - np.exp(-2 * T / eps**2)), rel=1e-10)
    assert phi_func(zero, eps, T) == 0
    n = 1_000_000
    x = (np.arange(n) + 0.5) / n
    brute = np.sum(x**2 * np.exp(-2 * x / 0.25)) / n
    assert phi_func(ident, 0.5, 1.0) == pytest.approx(brute, rel=1e-8)


def test_psi_closed_form_and_limit():
    eps, T = 0.2, 1.0
    exact = eps**2 / 2 * T - eps**4 / 4 * (1 - np.exp(-2 * T / eps**2))
    assert psi_func(one, eps, T) == pytest.approx(exact, rel=1e-9)
    assert psi_func(zero, eps, T) == 0
    assert psi_func(one, 1e3, 1.0) == pytest.approx(0.5, rel=1e-5)


def test_psi_against_double_integral():
    f = lambda x: np.sqrt(x) + 1
    eps = 0.5
    val, _ = integrate.dblquad(lambda y, x: f(x) ** 2 * f(y) ** 2 * np.exp(-2 * (x - y) / eps**2), 0, 1, 0, lambda x: x,
                               epsrel=1e-11)
    assert psi_func(f, eps, 1.0) == pytest.approx(val, rel=1e-8)


def test_varphi_examples():
    assert varphi_func(one, 0.04, 1.0) == pytest.approx(0.24, rel=1e-12)
    assert varphi_func(zero, 0.1, 1.0) == 0
    assert varphi_func(ident, 0.1, 1.0) == pytest.approx(0.1 / np.sqrt(3) + np.sqrt(1e-3 / 3), rel=1e-10)
    with pytest.raises(DomainError):
        varphi_func(one, 2.0, 1.0)


def test_c_alpha():
    assert c_alpha(0.5) == pytest.approx(np.sqrt(np.pi) / (4 * np.sqrt(2)), rel=1e-14)
    assert c_alpha(1 - 1e-9) == pytest.approx(0.25, rel=1e-8)
    assert c_alpha(1e-9) == pytest.approx(0.5, rel=1e-8)
    with pytest.raises(DomainError):
        c_alpha(1.0)


@given(st.floats(0.01, 0.99))
def test_c_alpha_is_laplace_moment(alpha):
    val, _ = integrate.quad(lambda x: x**alpha * np.exp(-2 * x), 0, np.inf)
    assert c_alpha(alpha) == pytest.approx(val, rel=1e-8)


def test_bound_assembly():
    assert bound_lm_cont2(one, 0.9, 0.1, 1.0, 0.0) == 0
    assert bound_lm_cont2(zero, 0.9, 0.1, 1.0, 1.0) == 0
    eps, alpha = 0.1, 0.9
    t = bound_terms(one, alpha, eps, 1.0)
    assert t.holder == 0.0
    expected = (0 + (eps**2 / 2) * (1 - np.exp(-2 / eps**2)) / 2 + (eps**2 / 2 - eps**4 / 4 * (1 - np.exp(-2 / eps**2))) / 8
                + (eps + np.sqrt(eps)) / 2) * np.exp(0.5)
    assert bound_lm_cont2(one, alpha, eps, 1.0, 1.0) == pytest.approx(expected, rel=1e-9)


def test_cf_check_at_zero():
    rep = cf_distance_check(one, 0.9, 0.2, 1.0, np.array([0.0, 1.0]), 500, seed=1, antiderivative=ident)
    assert rep.distance[0] == 0 and rep.bound[0] == 0
    assert rep.passed


def test_moment_bounds():
    assert even_moment_bound(1, 2.0) == 4.0
    assert even_moment_bound(2, 1.0) == 3.0
    assert odd_moment_bound(0, 1.0, 0.5) == 0.25
    assert odd_moment_bound(1, 1.0, 0.5) == pytest.approx(0.5 * 6 / 4)


def test_moment_checks_pass_at_moderate_eps():
    s = sample_f_theta(ident, 0.2, 1.0, 20_000, seed=3)
    checks = moment_checks(s, one, 0.2, 1.0)
    assert [c.order for c in checks] == [2, 4, 1, 3]
    assert all(c.passed for c in checks)


def test_moment_slope_exact_and_errors():
    lags = 2.0 ** -np.arange(6, 0, -1)
    fit = moment_slope(list(lags**0.8), lags)
    assert fit.slope == pytest.approx(0.8, abs=1e-12)
    with pytest.raises(InsufficientDataError):
        moment_slope([1.0, 2.0], [0.1, 0.2])
    with pytest.raises(DataError):
        moment_slope([1.0, -2.0, 3.0], [0.1, 0.2, 0.3])


def test_holder_tail_extremes():
    paths = np.cumsum(np.random.default_rng(1).standard_normal((200, 33, 1)), axis=1)
    t = holder_tail(paths, 0.35, [0.0, 1e9], step=1 / 32)
    assert t.prob[0] == 1.0 and t.prob[1] == 0.0
    with pytest.raises(InsufficientDataError):
        holder_tail(paths[:10], 0.35, [1.0], step=1 / 32)


def test_tail_tests_detect_a_shift():
    rng = np.random.default_rng(2)
    small = np.cumsum(rng.standard_normal((2000, 17, 1)), axis=1) * 0.5
    big = np.cumsum(rng.standard_normal((2000, 17, 1)), axis=1)
    A = [2.0, 4.0, 6.0]
    ts, tb = holder_tail(small, 0.35, A, 1 / 16), holder_tail(big, 0.35, A, 1 / 16)
    assert not tail_trend_test([ts, tb]).passed
    assert tail_trend_test([tb, ts]).passed
    assert tail_envelope_test([ts], tb).passed
    assert not tail_envelope_test([tb], ts).passed


def test_rb_reference_marginal_is_exact():
    H, n = 0.4, 64
    u = np.array([[1.0, 0.0], [0.5, 0.0]])
    mean, se = rb_reference_cf(u, H, n, 50, seed=1)
    var = np.sum(volterra_kernel(1 / n, n, H) ** 2) / n
    assert np.allclose(mean, np.exp(-0.5 * u[:, 0] ** 2 * var), rtol=1e-12)
    assert np.all(se < 1e-12)


def test_rb_reference_matches_direct_monte_carlo():
    H, n, M = 0.4, 64, 20_000
    u = product_grid(np.array([-1.5, 0.0, 1.5]), 2)
    ref, ref_se = rb_reference_cf(u, H, n, 20_000, seed=2)
    g = Grid(1.0, n + 1)
    dW = sample_wiener_batch(g, 2, seed=3, replicates=M)
    B = volterra_from_increments(dW, g.step, H)
    A = lm12_anchored(dW, B, g.step, H)
    est = ecf(np.stack([B[:, -1, 0], A[:, -1, 0, 1]], -1), u)
    assert np.all(np.abs(est.values - ref) <= 4 * np.hypot(est.stderr, ref_se) + 1e-12)

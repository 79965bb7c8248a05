import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from roughkac.errors import DomainError, ParameterError
from roughkac.grid import Grid
from roughkac.kac_stroock import (
    PoissonRealization, build_X_eps, check_eps, integrate_f_theta, integrate_f_theta_batch, sample_poisson,
    sample_poisson_batch, theta_eval, xeps_derivative, xeps_values,
)
from roughkac.rng import stream

H = 0.4


def test_same_seed_same_jumps():
    a, b = sample_poisson(2, 1.0, 0.1, seed=3), sample_poisson(2, 1.0, 0.1, seed=3)
    for ja, jb in zip(a.jumps, b.jumps):
        assert np.array_equal(ja, jb)


def test_jump_count_mean():
    L = 25.0
    counts = np.array([sample_poisson(1, 1.0, 0.2, seed=11, replicate=r).jumps[0].size for r in range(10_000)])
    assert abs(counts.mean() - L) <= 3 * counts.std(ddof=1) / np.sqrt(counts.size)


def test_components_use_independent_streams():
    base = [stream(5, 0, 0, 0), stream(5, 0, 0, 1)]
    other = [stream(5, 0, 0, 0), stream(999, 0, 0, 1)]
    a = sample_poisson(2, 1.0, 0.1, 5, streams=base)
    b = sample_poisson(2, 1.0, 0.1, 5, streams=other)
    assert np.array_equal(a.jumps[0], b.jumps[0])
    assert not np.array_equal(a.jumps[1], b.jumps[1])


def test_eps_floor_and_range():
    with pytest.raises(ParameterError):
        check_eps(1e-5)
    with pytest.raises(ParameterError):
        check_eps(1.5)


def test_theta_examples():
    pr = PoissonRealization([np.array([0.5])], T=1.0, eps=1.0)
    assert theta_eval(pr, 0, 0.2) == 1.0
    assert theta_eval(pr, 0, 0.7) == -1.0
    pr2 = PoissonRealization([np.array([1.0])], T=1.0, eps=0.5)
    assert theta_eval(pr2, 0, 0.3) == -2.0
    with pytest.raises(DomainError):
        theta_eval(pr, 0, 1.5)


def test_integrate_examples():
    one = lambda x: np.ones_like(x)
    pr = PoissonRealization([np.array([0.5])], T=1.0, eps=1.0)
    assert integrate_f_theta(pr, 0, one) == pytest.approx(0.0, abs=1e-14)
    pr = PoissonRealization([np.array([0.25])], T=1.0, eps=1.0)
    assert integrate_f_theta(pr, 0, one) == pytest.approx(-0.5)
    pr = PoissonRealization([np.array([])], T=1.0, eps=0.5)
    assert integrate_f_theta(pr, 0, one) == pytest.approx(2.0)


@given(st.integers(0, 10_000))
def test_quadrature_matches_antiderivative(seed):
    pr = sample_poisson(1, 1.0, 0.3, seed)
    f = lambda x: np.sqrt(x) * np.cos(3 * x)
    F = lambda x: np.array([integrate.quad(f, 0, v, epsabs=1e-14, epsrel=1e-13)[0] for v in np.atleast_1d(x)])
    assert integrate_f_theta(pr, 0, f) == pytest.approx(integrate_f_theta(pr, 0, f, antiderivative=F), rel=1e-8, abs=1e-10)


def test_batch_matches_single():
    prs = sample_poisson_batch(2, 1.0, 0.2, seed=1, replicates=20)
    F = lambda x: x**2 / 2
    batch = integrate_f_theta_batch(prs, 1, F)
    single = [integrate_f_theta(pr, 1, lambda x: x, antiderivative=F) for pr in prs]
    assert np.allclose(batch, single, rtol=1e-12, atol=1e-13)


def test_theta_covariance():
    eps, r, s = 0.5, 0.4, 0.3
    prs = sample_poisson_batch(1, 1.0, eps, seed=2, replicates=20_000)
    prod = np.array([theta_eval(p, 0, r) * theta_eval(p, 0, s) for p in prs])
    exact = np.exp(-2 * abs(r - s) / eps**2) / eps**2
    assert abs(prod.mean() - exact) <= 3 * prod.std(ddof=1) / np.sqrt(prod.size)


def test_xeps_starts_at_zero():
    pr = sample_poisson(2, 1.0, 0.1, seed=4)
    X = build_X_eps(pr, H, Grid(1.0, 33))
    assert np.all(X.values[0] == 0)


def test_xeps_no_jumps_closed_form():
    eps, beta = 0.3, H - 0.5
    pr = PoissonRealization([np.array([])], T=1.0, eps=eps)
    t = np.linspace(0, 1, 7)
    exact = ((t + eps) ** (beta + 1) - eps ** (beta + 1)) / ((beta + 1) * eps)
    assert np.allclose(xeps_values(pr, 0, t, H), exact, rtol=1e-12)
    assert np.allclose(xeps_derivative(pr, 0, t, H), (t + eps) ** beta / eps, rtol=1e-12)


def test_derivative_at_zero():
    pr = sample_poisson(1, 1.0, 0.2, seed=8)
    assert xeps_derivative(pr, 0, 0.0, H) == pytest.approx(0.2 ** (H - 1.5))


@given(st.integers(0, 1000), st.floats(0.05, 0.95))
def test_central_difference(seed, u):
    pr = sample_poisson(1, 1.0, 0.3, seed)
    tau = pr.switch_times(0)
    h = 1e-5
    if tau.size and np.min(np.abs(tau - u)) < 2 * h:
        return
    fd = (xeps_values(pr, 0, u + h, H) - xeps_values(pr, 0, u - h, H)) / (2 * h)
    assert np.ravel(fd)[0] == pytest.approx(xeps_derivative(pr, 0, u, H), rel=1e-6, abs=1e-6)


def telegraph_variance(eps, t=1.0):
    """Exact Var X^eps(t) = int int K(r) K(s) eps^-2 e^{-2|r-s|/eps^2}, K(r) = (t + eps - r)^{H-1/2}."""
    K = lambda r: (t + eps - r) ** (H - 0.5)
    inner = lambda r: integrate.quad(lambda s: K(s) * np.exp(-2 * (r - s) / eps**2), 0, r, epsrel=1e-12)[0]
    val, _ = integrate.quad(lambda r: K(r) * inner(r), 0, t, epsrel=1e-10, limit=200)
    return 2 * val / eps**2


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_xeps_variance_matches_telegraph_oracle(eps):
    M = 4000
    x = np.array([xeps_values(sample_poisson(1, 1.0, eps, 21, r), 0, 1.0, H) for r in range(M)]).ravel()
    exact = telegraph_variance(eps)
    se = np.sqrt(np.var(x**2, ddof=1) / M)
    assert abs(np.var(x, ddof=1) - exact) <= 3 * se


def test_telegraph_variance_approaches_fbm():
    # the shift by eps in the kernel and the finite correlation time both vanish as eps -> 0
    gaps = [abs(telegraph_variance(e) - 1 / (2 * H)) for e in (0.2, 0.1, 0.05)]
    assert gaps[0] > gaps[1] > gaps[2]

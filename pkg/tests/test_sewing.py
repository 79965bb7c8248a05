import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughkac.errors import DomainError, OrderingError, ParameterError, RegularityError
from roughkac.sewing import Germ, dyadic_sum, lambda_error_budget, sew, young_germ


def test_young_integral_of_t():
    r = sew(young_germ(lambda u: u, lambda u: u), 0.0, 1.0, tol=1e-10)
    assert abs(float(r.value) - 0.5) <= 1e-10


def test_additive_germ_is_exact():
    g = Germ(lambda s, t: t**3 - s**3, 2.0)
    r = sew(g, 0.2, 0.9)
    assert float(r.value) == pytest.approx(0.9**3 - 0.2**3, rel=1e-14)
    assert r.error == 0.0


@pytest.mark.parametrize("mu", [1.5, 2.0])
def test_decay_ratio(mu):
    g = Germ(lambda s, t: np.sin(t) - np.sin(s) + (t - s) ** mu, mu)
    r = sew(g, 0.0, 1.0, tol=1e-13, max_levels=14, min_levels=14, extrapolate=False)
    assert r.last_ratio == pytest.approx(2 ** (1 - mu), rel=0.1)


def test_controlled_germ_matches_integral():
    # g_st = cos(s)(sin t - sin s) - sin(s) (sin t - sin s)^2 / 2 sews to int cos d(sin) = int cos^2
    g = Germ(lambda s, t: np.cos(s) * (np.sin(t) - np.sin(s)) - np.sin(s) * (np.sin(t) - np.sin(s)) ** 2 / 2, 3.0)
    r = sew(g, 0.0, 1.0, tol=1e-13)
    assert float(r.value) == pytest.approx(0.5 + np.sin(2) / 4, abs=1e-11)


def test_vector_valued_germ():
    g = Germ(lambda s, t: np.stack([s * (t - s), t - s], axis=-1), 2.0)
    r = sew(g, 0.0, 2.0, tol=1e-11)
    assert np.allclose(r.value, [2.0, 2.0], atol=1e-10)


def test_non_contracting_germ_raises():
    g = Germ(lambda s, t: np.sqrt(t - s), 1.5)
    with pytest.raises(RegularityError) as info:
        sew(g, 0.0, 1.0, max_levels=12)
    assert info.value.ratio >= 1


def test_germ_and_interval_validation():
    with pytest.raises(ParameterError):
        Germ(lambda s, t: t - s, 1.0)
    with pytest.raises(OrderingError):
        sew(young_germ(lambda u: u, lambda u: u), 1.0, 0.0)
    assert float(sew(young_germ(lambda u: u, lambda u: u), 0.5, 0.5).value) == 0.0


def test_lambda_budget():
    assert lambda_error_budget(2.0) == 0.5
    assert lambda_error_budget(1.2) == pytest.approx(1 / (2**1.2 - 2), rel=1e-14)
    assert lambda_error_budget(1.2) == pytest.approx(3.3625, abs=5e-5)
    with pytest.raises(DomainError):
        lambda_error_budget(1.0 + 1e-7)
    assert lambda_error_budget(1.0 + 1e-5) > 1e4


@given(st.floats(-5, 5), st.floats(0.1, 3), st.integers(0, 8))
def test_dyadic_sum_of_increment_telescopes(s, length, level):
    g = Germ(lambda a, b: np.exp(b) - np.exp(a), 2.0)
    assert float(dyadic_sum(g, s, s + length, level)) == pytest.approx(np.exp(s + length) - np.exp(s), rel=1e-12)


@given(st.floats(1.05, 3.0), st.floats(0.5, 2.0))
def test_budget_monotone(mu, gap):
    assert lambda_error_budget(mu) > lambda_error_budget(mu + gap)

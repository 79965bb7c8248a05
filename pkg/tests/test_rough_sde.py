import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from roughkac.errors import OverflowStepError, ParameterError, ResolutionError
from roughkac.experiments import convention_errors, exponential_errors, observed_order
from roughkac.grid import Grid, SamplePath
from roughkac.kac_stroock import sample_poisson, sample_poisson_batch, xeps_values
from roughkac.levy_area import AreaField, SmoothPath, quadrature_area_field
from roughkac.rough_sde import (
    RoughDriver, VectorField, demo_field, drift_field, linear_field, rough_step, solve_ode_smooth,
    solve_ode_smooth_batch, solve_rough, solve_rough_batch,
)

H = 0.4


def zero_driver(n_points, d=1, T=1.0):
    g = Grid(T, n_points)
    p = SamplePath(g, np.zeros((n_points, d)))
    return RoughDriver(p, AreaField(p, np.zeros((n_points, d, d)), "diagonal-closed-form"))


def test_demo_field_is_consistent():
    vf = demo_field().validate(tol=1e-6)
    assert vf.fd_defect() < 1e-8


def test_bad_derivative_is_rejected():
    good = demo_field()
    bad = VectorField(good.sigma, lambda y: 2 * good.dsigma(y), good.b, 2, 2)
    with pytest.raises(ParameterError):
        bad.validate()


@given(st.floats(-3, 3), st.floats(0.001, 0.5))
def test_step_without_sigma_is_euler(y, h):
    vf = drift_field(lambda v: np.sin(v), 1)
    out = rough_step(np.array([y]), vf, np.array([0.3]), np.array([[0.1]]), h)
    assert out[0] == y + np.sin(y) * h


def test_step_second_order_term():
    vf = linear_field([[[2.0]]])
    # y + 2 y dx + 4 y x2
    out = rough_step(np.array([1.5]), vf, np.array([0.1]), np.array([[0.005]]), 0.0)
    assert out[0] == pytest.approx(1.5 + 2 * 1.5 * 0.1 + 4 * 1.5 * 0.005)


def test_step_overflow():
    vf = drift_field(lambda v: v * 1e308, 1)
    with pytest.raises(OverflowStepError) as info, np.errstate(over="ignore"):
        rough_step(np.array([10.0]), vf, np.zeros(1), np.zeros((1, 1)), 1.0, step_index=7)
    assert info.value.step_index == 7


def test_drift_only_is_euler_and_converges():
    lam, a = 0.7, 1.3
    vf = drift_field(lambda y: lam * y, 1)
    errs = []
    for N in (64, 128, 256, 512):
        y = solve_rough(zero_driver(N + 1), vf, [a]).values[:, 0]
        assert np.allclose(y, a * (1 + lam / N) ** np.arange(N + 1), rtol=1e-13)
        errs.append(abs(y[-1] - a * np.exp(lam)))
    assert observed_order([64, 128, 256, 512], errs) == pytest.approx(1.0, abs=0.05)


def test_fixed_point_zero():
    vf = linear_field([np.eye(2), np.array([[0, 1.0], [1.0, 0]])])
    g = Grid(1.0, 33)
    x = np.stack([np.sin(g.nodes), g.nodes**2], -1)
    af = quadrature_area_field(SmoothPath(lambda u: np.stack([np.sin(u), u * u], -1),
                                          lambda u: np.stack([np.cos(u), 2 * u], -1), 1.0), g)
    y = solve_rough(RoughDriver(af.path, af), vf, np.zeros(2))
    assert np.all(y.values == 0)


def test_exponential_order_and_accuracy():
    errs = exponential_errors()
    n, e = zip(*errs)
    assert observed_order(n, e) >= 1
    assert e[-1] < 1e-4


def test_commuting_linear_fields_exact_limit():
    A1 = np.array([[0.2, 0.1], [0.1, 0.3]])
    A2 = 0.5 * A1 + 0.1 * np.eye(2)
    vf = linear_field([A1, A2])
    sp = SmoothPath(lambda u: np.stack([np.sin(3 * u), u * u], -1), lambda u: np.stack([3 * np.cos(3 * u), 2 * u], -1), 1.0)
    g = Grid(1.0, 1025)
    af = quadrature_area_field(sp, g)
    y0 = np.array([1.0, -0.5])
    y = solve_rough(RoughDriver(af.path, af), vf, y0).values[-1]
    x1 = sp.x(np.array([1.0]))[0] - sp.x(np.array([0.0]))[0]
    assert np.allclose(y, expm(A1 * x1[0] + A2 * x1[1]) @ y0, atol=1e-5)


def test_area_convention_is_detected():
    rows = convention_errors()
    n, good, bad = zip(*rows)
    assert observed_order(n, good) >= 0.9
    assert bad[-1] > 100 * good[-1]


def test_batch_solver_matches_driver_solver():
    vf = demo_field()
    g = Grid(1.0, 65)
    rng = np.random.default_rng(3)
    xs = np.cumsum(rng.standard_normal((3, 65, 2)) * 0.1, axis=1)
    xs -= xs[:, :1]
    out = []
    for m in range(3):
        from roughkac.levy_area import riemann_area_field

        af = riemann_area_field(SamplePath(g, xs[m]))
        out.append(af.anchors)
        single = solve_rough(RoughDriver(af.path, af), vf, [0.1, 0.2]).values
        batch = solve_rough_batch(xs, np.stack(out + [af.anchors] * (3 - len(out))), vf, [0.1, 0.2], g.step)
        assert np.allclose(batch[m], single, atol=1e-14)


def test_self_check_warns_on_rough_data():
    vf = VectorField(lambda y: np.cos(y)[..., None], lambda y: -np.sin(y)[..., None, None], lambda y: 0 * y, 1, 1)
    g = Grid(1.0, 65)
    # an oscillation visible only at the finest scale: strides 2 and 4 agree, stride 1 does not
    k = np.arange(65)
    x = (g.nodes + 0.8 * (k % 2))[:, None]
    p = SamplePath(g, x)
    af = AreaField(p, 0.5 * (x**2)[:, :, None], "diagonal-closed-form")
    with pytest.warns(RuntimeWarning):
        solve_rough(RoughDriver(p, af), vf, [1.0], self_check=True)


def test_ode_linear_driver_is_exponential():
    pr = sample_poisson(1, 1.0, 0.2, seed=5)
    g = Grid(1.0, 2049)
    y = solve_ode_smooth(pr, H, linear_field([[[1.0]]]), [0.7], g).values[:, 0]
    assert np.allclose(y, 0.7 * np.exp(xeps_values(pr, 0, g.nodes, H)), rtol=1e-9)


def test_ode_without_sigma_is_drift_ode():
    pr = sample_poisson(1, 1.0, 0.2, seed=5)
    vf = VectorField(lambda y: np.zeros(np.shape(y)[:-1] + (1, 1)), lambda y: np.zeros(np.shape(y)[:-1] + (1, 1, 1)),
                     lambda y: -y, 1, 1)
    y = solve_ode_smooth(pr, H, vf, [2.0], Grid(1.0, 1025)).values
    assert y[-1, 0] == pytest.approx(2 * np.exp(-1), rel=1e-10)


def test_ode_refuses_coarse_grid():
    pr = sample_poisson(2, 1.0, 0.2, seed=5)
    with pytest.raises(ResolutionError):
        solve_ode_smooth(pr, H, demo_field(), [0, 0], Grid(1.0, 33))
    solve_ode_smooth(pr, H, demo_field(), [0, 0], Grid(1.0, 33), allow_under_resolved=True)


def test_ode_batch_engine_matches_exact_solver():
    prs = sample_poisson_batch(2, 1.0, 0.2, seed=9, replicates=4)
    vf = demo_field()
    g = Grid(1.0, 401)
    batch = solve_ode_smooth_batch(prs, H, vf, [0.2, -0.1], g.nodes[::50])
    for m, pr in enumerate(prs):
        single = solve_ode_smooth(pr, H, vf, [0.2, -0.1], g).values[::50]
        assert np.allclose(batch[m], single, atol=1e-6)

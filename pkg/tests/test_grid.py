import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from roughkac.errors import InsufficientDataError, OrderingError, ParameterError
from roughkac.grid import (
    Grid, Increment2, SamplePath, delta1, delta2, garsia_U, holder_norm1, holder_norm2, holder_seminorm, sobolev_norm,
)


def path_on(nodes, values):
    nodes = np.asarray(nodes, dtype=float)
    g = Grid(nodes[-1], len(nodes))
    assert np.allclose(g.nodes, nodes)
    return SamplePath(g, np.asarray(values, dtype=float).reshape(len(nodes), -1))


def test_grid_nodes_and_index():
    g = Grid(2.0, 5)
    assert g.step == 0.5
    assert g.index_of(1.5) == 3
    assert g.subgrid(2).n_points == 3


def test_delta1_constant_is_zero():
    p = path_on([0, 0.5, 1], [3.0, 3.0, 3.0])
    inc = delta1(p).materialize()
    assert np.all(inc.dense == 0)


def test_delta1_identity_and_square():
    assert float(delta1(path_on([0, 0.5, 1], [0, 0.5, 1]))(0, 2)) == 1.0
    assert float(delta1(path_on([0, 1, 2], [0, 1, 4]))(1, 2)) == 3.0


@given(arrays(np.float64, (9, 2), elements=st.floats(-1e3, 1e3)))
def test_delta_delta_vanishes(values):
    p = SamplePath(Grid(1.0, 9), values)
    inc = delta1(p)
    for ks, ku, kt in [(0, 3, 8), (2, 2, 5), (1, 4, 4), (0, 0, 0)]:
        assert np.all(np.abs(delta2(inc, ks, ku, kt)) <= 4 * np.finfo(float).eps * np.max(np.abs(values)))


def test_delta2_examples():
    g = Grid(2.0, 3)
    sq = Increment2.from_function(g, lambda s, t: (t - s) ** 2)
    assert delta2(sq, 0, 1, 2) == pytest.approx(2.0)
    xs = Increment2.from_function(g, lambda s, t: s * (t - s))
    assert delta2(xs, 0, 1, 2) == pytest.approx(-1.0)


def test_delta2_ordering_error():
    g = Grid(2.0, 3)
    h = Increment2.from_function(g, lambda s, t: t - s)
    with pytest.raises(OrderingError):
        delta2(h, 2, 1, 0)


def test_holder_norm1_examples():
    assert holder_norm1(path_on([0, 0.5, 1], [2, 2, 2]), 0.5) == 0
    g = Grid(1.0, 11)
    assert holder_norm1(SamplePath.from_function(g, lambda t: t[:, None]), 1.0) == pytest.approx(1.0)
    root = SamplePath.from_function(Grid(1.0, 5), lambda t: np.sqrt(t)[:, None])
    assert holder_norm1(root, 0.5) == pytest.approx(1.0)


def test_holder_norm1_rejects_bad_input():
    with pytest.raises(InsufficientDataError):
        holder_norm1(SamplePath(Grid(1.0, 1), np.zeros((1, 1))), 0.5)
    with pytest.raises(ParameterError):
        holder_norm1(path_on([0, 0.5, 1], [0, 1, 2]), 1.5)


def test_holder_norm2_examples():
    g = Grid(1.0, 33)
    assert holder_norm2(Increment2.from_function(g, lambda s, t: 0 * s), 0.7) == 0
    gam = 0.35
    h = Increment2.from_function(g, lambda s, t: (t - s) ** (2 * gam))
    assert holder_norm2(h, 2 * gam) == pytest.approx(1.0)


@given(arrays(np.float64, (17, 1), elements=st.floats(-10, 10)), st.floats(0.1, 1.0))
def test_dyadic_seminorm_never_exceeds_full(values, mu):
    full = holder_seminorm(values, 1 / 16, mu)
    dy = holder_seminorm(values, 1 / 16, mu, dyadic=True)
    assert dy <= full * (1 + 1e-12) + 1e-300


def test_holder_seminorm_batches():
    vals = np.random.default_rng(0).standard_normal((4, 3, 9, 2))
    out = holder_seminorm(vals, 0.125, 0.4)
    assert out.shape == (4, 3)
    assert out[2, 1] == holder_seminorm(vals[2, 1], 0.125, 0.4)


def test_sobolev_examples():
    g = Grid(1.0, 512)
    lin = SamplePath.from_function(g, lambda t: t[:, None])
    assert sobolev_norm(SamplePath(g, np.ones((512, 1))), 0.5, 2) == 0
    assert sobolev_norm(lin, 0.25, 2) == pytest.approx(np.sqrt(8 / 15), rel=1e-2)
    # the integrand |t - s|^2 / |t - s|^2 is 1 on the unit square, so the norm is 1
    assert sobolev_norm(lin, 0.5, 2) == pytest.approx(1.0, rel=1e-2)


def test_garsia_examples():
    g = Grid(1.0, 512)
    assert garsia_U(Increment2.from_function(g, lambda s, t: 0 * s), 0.5, 2) == 0
    assert garsia_U(Increment2.from_function(g, lambda s, t: t - s), 0.5, 2) == pytest.approx(np.sqrt(1 / 3), rel=1e-2)
    for p in (1.0, 2.0, 4.0):
        h = Increment2.from_function(g, lambda s, t: (t - s) ** 0.3)
        assert garsia_U(h, 0.3, p) == pytest.approx(1.0, rel=1e-2)


def test_sobolev_converges_under_refinement():
    errs = []
    for n in (65, 129, 257, 513):
        lin = SamplePath.from_function(Grid(1.0, n), lambda t: t[:, None])
        errs.append(abs(sobolev_norm(lin, 0.5, 2) - 1.0))
    assert all(b < a for a, b in zip(errs[:-1], errs[1:]))

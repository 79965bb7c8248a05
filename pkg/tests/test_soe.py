import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughkac.grid import Grid
from roughkac.kac_stroock import sample_poisson_batch, xeps_values
from roughkac.levy_area import area_smooth_quadrature, xeps_smooth_path
from roughkac.parallel import chunks, map_ordered
from roughkac.soe import ExpSumKernel, run_telegraph_batch, telegraph_monte_carlo

H = 0.4


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_kernel_fit_accuracy(eps):
    k = ExpSumKernel.fit(H, eps, 1.0)
    assert max(k.max_rel_error()) <= 1e-9
    x = np.linspace(0, 1, 33)
    assert np.allclose(k(x), (x + eps) ** (H - 0.5), rtol=1e-9)


def test_engine_matches_closed_form_paths():
    eps = 0.1
    prs = sample_poisson_batch(2, 1.0, eps, seed=3, replicates=5)
    t = np.linspace(0, 1, 17)
    res = run_telegraph_batch(prs, ExpSumKernel.fit(H, eps, 1.0), t, eps**2 / 4, areas=True)
    for m, pr in enumerate(prs):
        exact = np.stack([xeps_values(pr, i, t, H) for i in range(2)], -1)
        assert np.allclose(res["X"][m], exact, atol=1e-8)
        A = area_smooth_quadrature(xeps_smooth_path(pr, H), 0.0, 1.0, rtol=1e-10)
        assert np.allclose(res["area"][m, -1], A, atol=1e-5 * max(1.0, np.max(np.abs(A))))


def test_monte_carlo_threads_do_not_change_results():
    t = np.linspace(0, 1, 9)
    a = telegraph_monte_carlo(2, H, 0.2, 1.0, 60, seed=1, record_times=t, chunk=16, threads=1)
    b = telegraph_monte_carlo(2, H, 0.2, 1.0, 60, seed=1, record_times=t, chunk=16, threads=3)
    assert np.array_equal(a["X"], b["X"])
    assert np.array_equal(a["area"], b["area"])


def test_monte_carlo_chunking_is_consistent():
    t = np.linspace(0, 1, 9)
    a = telegraph_monte_carlo(2, H, 0.2, 1.0, 40, seed=1, record_times=t, chunk=40)
    b = telegraph_monte_carlo(2, H, 0.2, 1.0, 40, seed=1, record_times=t, chunk=7)
    assert np.allclose(a["X"], b["X"], rtol=1e-13, atol=1e-13)


@given(st.integers(0, 500), st.integers(1, 60))
def test_chunks_cover_range(total, size):
    parts = chunks(total, size)
    assert sum(n for _, n in parts) == total
    assert all(0 < n <= size for _, n in parts)
    assert [lo for lo, _ in parts] == list(range(0, total, size))


def test_map_ordered_preserves_order():
    items = list(range(20))
    assert map_ordered(lambda x: x * x, items, threads=4) == [x * x for x in items]

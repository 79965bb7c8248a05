"""Rough differential equations ``dy = sigma(y) dx + b(y) dt``.

The rough solver is the one-step second-order scheme

    y' = y + sigma_i(y) dx^i + d_l sigma_i(y) sigma^l_j(y) x2(i, j) + b(y) h

with ``x2(i, j) = int (x^j_u - x^j_s) dx^i_u`` (outer integrator first, as in
:mod:`roughkac.levy_area`). Pairing the indices the other way loses a full
order on non-commuting linear systems; the test suite checks this.

The smooth equation driven by ``X^eps`` is an ODE and is integrated with
classical RK4, with sub-steps at every sign change of the telegraph signal
where ``dX^eps/dt`` jumps.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import OverflowStepError, ParameterError, ResolutionError
from .fbm import path_to_csv
from .grid import Grid, SamplePath, holder_norm1
from .kac_stroock import PoissonRealization, check_hurst, theta_eval, xeps_derivative
from .levy_area import AreaField, chen_check
from .soe import ExpSumKernel, rk4_step, run_telegraph_batch

log = logging.getLogger(__name__)


@dataclass
class VectorField:
    """``sigma: R^n -> R^{n x d}``, its derivative ``dsigma[..., k, i, l] = d_l sigma_{k i}``
    and the drift ``b: R^n -> R^n``. All evaluators accept leading batch axes."""

    sigma: Callable[[np.ndarray], np.ndarray]
    dsigma: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    n: int
    d: int
    bounds: dict = field(default_factory=dict)

    def fd_defect(self, n_probes: int = 20, seed: int = 0, h: float = 1e-5, radius: float = 2.0) -> float:
        """Largest relative mismatch between ``dsigma`` and central differences of ``sigma``."""
        g = np.random.default_rng(seed)
        worst = 0.0
        for y in g.uniform(-radius, radius, size=(n_probes, self.n)):
            D = np.asarray(self.dsigma(y))
            fd = np.empty_like(D)
            for l in range(self.n):
                e = np.zeros(self.n)
                e[l] = h
                fd[..., l] = (np.asarray(self.sigma(y + e)) - np.asarray(self.sigma(y - e))) / (2 * h)
            scale = max(np.max(np.abs(D)), np.max(np.abs(fd)), 1e-12)
            worst = max(worst, float(np.max(np.abs(D - fd)) / scale))
        return worst

    def validate(self, tol: float = 1e-4, **kw) -> "VectorField":
        y = np.zeros(self.n)
        if np.shape(self.sigma(y)) != (self.n, self.d) or np.shape(self.dsigma(y)) != (self.n, self.d, self.n):
            raise ParameterError("sigma must map to (n, d) and dsigma to (n, d, n)")
        if np.shape(self.b(y)) != (self.n,):
            raise ParameterError("b must map to (n,)")
        defect = self.fd_defect(**kw)
        if defect > tol:
            raise ParameterError(f"dsigma does not match finite differences of sigma (relative defect {defect:.3g})")
        return self


def linear_field(A: Sequence[np.ndarray], c: Optional[np.ndarray] = None) -> VectorField:
    """``sigma(y)[:, i] = A[i] @ y`` and ``b(y) = c @ y`` (zero drift if ``c`` is None)."""
    A = np.asarray(A, dtype=float)
    d, n = A.shape[0], A.shape[1]
    C = np.zeros((n, n)) if c is None else np.asarray(c, dtype=float)
    dsig = np.transpose(A, (1, 0, 2))  # [k, i, l] = A[i, k, l]

    return VectorField(
        sigma=lambda y: np.einsum("ikl,...l->...ki", A, y),
        dsigma=lambda y: np.broadcast_to(dsig, np.shape(y)[:-1] + dsig.shape),
        b=lambda y: y @ C.T,
        n=n,
        d=d,
    )


def drift_field(b: Callable, n: int, d: int = 1) -> VectorField:
    """``sigma = 0``; the rough step is then exactly an Euler step."""
    return VectorField(
        sigma=lambda y: np.zeros(np.shape(y)[:-1] + (n, d)),
        dsigma=lambda y: np.zeros(np.shape(y)[:-1] + (n, d, n)),
        b=b,
        n=n,
        d=d,
    )


def demo_field() -> VectorField:
    """A smooth bounded field with ``n = d = 2`` whose columns do not commute."""

    def sigma(y):
        y1, y2 = y[..., 0], y[..., 1]
        return np.stack(
            [np.stack([1 + 0.5 * np.sin(y2), 0.5 * np.cos(y1)], -1), np.stack([0.5 * np.sin(y1), 1 - 0.3 * np.cos(y2)], -1)],
            -2,
        )

    def dsigma(y):
        y1, y2 = y[..., 0], y[..., 1]
        z = np.zeros_like(y1)
        # [k, i, l]
        row0 = np.stack([np.stack([z, 0.5 * np.cos(y2)], -1), np.stack([-0.5 * np.sin(y1), z], -1)], -2)
        row1 = np.stack([np.stack([0.5 * np.cos(y1), z], -1), np.stack([z, 0.3 * np.sin(y2)], -1)], -2)
        return np.stack([row0, row1], -3)

    def b(y):
        return -0.5 * np.tanh(y)

    return VectorField(sigma, dsigma, b, 2, 2, bounds={"sigma": 1.5, "dsigma": 0.5, "b": 0.5})


def rough_step(y, vf: VectorField, dx, x2, h, step_index: int = 0) -> np.ndarray:
    """One second-order step; every argument may carry leading batch axes."""
    y = np.asarray(y, dtype=float)
    sig = vf.sigma(y)
    out = y + np.einsum("...ki,...i->...k", sig, dx)
    out = out + np.einsum("...kil,...lj,...ij->...k", vf.dsigma(y), sig, x2)
    h = np.asarray(h, dtype=float)
    out = out + vf.b(y) * (h[..., None] if h.ndim else h)
    if not np.all(np.isfinite(out)):
        raise OverflowStepError("rough step produced non-finite values", step_index)
    return out


@dataclass
class RoughDriver:
    """Path ``x`` with its area field and a claimed Holder exponent ``gamma``."""

    x: SamplePath
    area: AreaField
    gamma: float = 0.35

    def __post_init__(self):
        if not 1.0 / 3.0 < self.gamma < 0.5:
            raise ParameterError(f"gamma must lie in (1/3, 1/2), got {self.gamma}")
        if self.area.path is not self.x and not np.array_equal(self.area.path.values, self.x.values):
            raise ParameterError("the area field must belong to the driving path")

    def validate(self, tolerance: float = 1e-6, n_triples: int = 200) -> "RoughDriver":
        rep = chen_check(self.area, tolerance=tolerance, n_triples=n_triples)
        if not rep.passed:
            raise ParameterError(f"area fails the Chen relation (defect {rep.relative_defect:.3g})")
        if not np.isfinite(holder_norm1(self.x, self.gamma, dyadic=True)):
            raise ParameterError("path has infinite Holder norm")
        return self


def _reconstruct_steps(x, anchors, stride):
    """Increments and areas over consecutive coarse steps of ``stride`` fine cells."""
    xs = x[..., ::stride, :]
    As = anchors[..., ::stride, :, :]
    dx = np.diff(xs, axis=-2)
    base = xs[..., :-1, :] - x[..., :1, :]
    x2 = As[..., 1:, :, :] - As[..., :-1, :, :] - dx[..., :, None] * base[..., None, :]
    return dx, x2


def solve_rough_batch(x, anchors, vf: VectorField, a, dt: float, stride: int = 1) -> np.ndarray:
    """Solve for a batch of drivers ``x`` (M, N+1, d) with anchors (M, N+1, d, d).

    Uses every ``stride``-th node; returns the solution there, (M, N/stride + 1, n).
    """
    x = np.asarray(x, dtype=float)
    anchors = np.asarray(anchors, dtype=float)
    if (x.shape[-2] - 1) % stride:
        raise ParameterError("stride must divide the number of cells")
    dx, x2 = _reconstruct_steps(x, anchors, stride)
    K = dx.shape[-2]
    y = np.broadcast_to(np.asarray(a, dtype=float), x.shape[:-2] + (vf.n,)).copy()
    out = np.empty(x.shape[:-2] + (K + 1, vf.n))
    out[..., 0, :] = y
    h = dt * stride
    for k in range(K):
        y = rough_step(y, vf, dx[..., k, :], x2[..., k, :, :], h, step_index=k)
        out[..., k + 1, :] = y
    return out


def solve_rough(driver: RoughDriver, vf: VectorField, a, self_check: bool = False) -> SamplePath:
    """Iterate :func:`rough_step` over the driver's grid; ``y(0) = a``.

    With ``self_check`` the terminal value is compared across strides 1, 2
    and 4; a warning is issued if the observed order is below 1.
    """
    x, A = driver.x.values, driver.area.anchors
    y = solve_rough_batch(x, A, vf, a, driver.x.grid.step)
    if self_check:
        N = x.shape[0] - 1
        if N % 4 == 0:
            y2 = solve_rough_batch(x, A, vf, a, driver.x.grid.step, stride=2)[-1]
            y4 = solve_rough_batch(x, A, vf, a, driver.x.grid.step, stride=4)[-1]
            e1, e2 = np.linalg.norm(y[-1] - y2), np.linalg.norm(y2 - y4)
            if e1 > 0 and e2 > 0:
                order = float(np.log2(e2 / e1))
                if order < 1:
                    warnings.warn(f"rough solver self-convergence order {order:.2f} < 1", RuntimeWarning)
    return SamplePath(driver.x.grid, y)


def _continuous_part(pr, i, u, H):
    """``dX^{eps,i}/dt - eps^{H-1/2} theta_i``: continuous across sign changes."""
    beta = H - 0.5
    return np.atleast_1d(xeps_derivative(pr, i, u, H)) - pr.eps**beta * np.atleast_1d(theta_eval(pr, i, u))


def solve_ode_smooth(pr: PoissonRealization, H: float, vf: VectorField, a, fine_grid: Grid, eps: Optional[float] = None,
                     allow_under_resolved: bool = False) -> SamplePath:
    """RK4 for ``y' = sigma(y) dX^eps/dt + b(y)`` using the exact derivative.

    Sub-steps end at every sign change so each RK4 step sees a smooth
    right-hand side. The grid step must be at most ``eps^2 / 4`` unless
    ``allow_under_resolved`` is set.
    """
    check_hurst(H)
    if eps is not None and not np.isclose(eps, pr.eps, rtol=1e-12, atol=0):
        raise ParameterError(f"eps={eps} does not match the realization's eps={pr.eps}")
    eps = pr.eps
    if vf.d != pr.dim:
        raise ParameterError("vector field and driver dimensions differ")
    if fine_grid.step > eps**2 / 4 * (1 + 1e-12) and not allow_under_resolved:
        raise ResolutionError(f"grid step {fine_grid.step:.3g} exceeds eps^2/4 = {eps**2 / 4:.3g}")
    beta = H - 0.5
    nodes = fine_grid.nodes
    taus = [pr.switch_times(i) for i in range(pr.dim)]
    inner = np.concatenate([t[(t > 0) & (t < fine_grid.T)] for t in taus])
    times = np.union1d(nodes, inner)
    left, right = times[:-1], times[1:]
    mid = 0.5 * (left + right)
    V = np.empty((3, left.size, pr.dim))
    for i in range(pr.dim):
        sign = np.where(np.searchsorted(taus[i], left, side="right") % 2 == 0, 1.0, -1.0)
        jump = eps**beta * sign / eps
        for r, pts in enumerate((left, mid, right)):
            V[r, :, i] = _continuous_part(pr, i, pts, H) + jump
    y = np.asarray(a, dtype=float).copy()
    out = np.empty((nodes.size, vf.n))
    out[0] = y
    slot = np.searchsorted(times, nodes)
    rec = np.full(times.size, -1)
    rec[slot] = np.arange(nodes.size)
    h = right - left
    for k in range(left.size):
        y = rk4_step(vf, y, h[k], V[0, k], V[1, k], V[2, k])
        if not np.all(np.isfinite(y)):
            raise OverflowStepError("ODE step produced non-finite values", k)
        if rec[k + 1] >= 0:
            out[rec[k + 1]] = y
    return SamplePath(fine_grid, out)


def solve_ode_smooth_batch(realizations, H: float, vf: VectorField, a, record_times, max_step: Optional[float] = None,
                           kernel: Optional[ExpSumKernel] = None, rtol: float = 1e-9) -> np.ndarray:
    """Batched smooth solve on the exponential-sum engine; returns (M, R, n)."""
    eps, T = realizations[0].eps, realizations[0].T
    kernel = ExpSumKernel.fit(H, eps, T, rtol=rtol) if kernel is None else kernel
    max_step = eps**2 / 4 if max_step is None else max_step
    res = run_telegraph_batch(realizations, kernel, record_times, max_step, vf=vf, y0=a, areas=False)
    return res["y"]


def solution_to_csv(path: SamplePath, file):
    return path_to_csv(path, file)

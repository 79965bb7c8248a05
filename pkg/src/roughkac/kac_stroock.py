"""Kac-Stroock telegraph noise and the smooth approximants it drives.

The telegraph signal of component ``i`` is

    theta_i(r) = (1 / eps) * (-1) ** N_i(r / eps**2)

with ``N_i`` independent unit-rate Poisson processes. The internal clock
runs at ``r / eps**2``; this is the scaling under which
``E[theta(r) theta(s)] = eps**-2 exp(-2 |r - s| / eps**2)``.

Every integral against ``theta`` is taken piece by piece between sign
changes, analytically whenever an antiderivative is available.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import rng
from .errors import DomainError, ParameterError
from .grid import Grid, SamplePath
from .io import write_csv
from .quadrature import piecewise_quad

#: smallest admissible ``eps**2 / T``; below it the expected jump count exceeds ~1e8
EPS2_FLOOR = 1e-8


def check_hurst(H: float) -> float:
    if not 1.0 / 3.0 < H < 0.5:
        raise ParameterError(f"Hurst parameter must lie in (1/3, 1/2), got H={H}")
    return float(H)


def check_eps(eps: float, T: float = 1.0) -> float:
    if not 0 < eps <= 1:
        raise ParameterError(f"eps must lie in (0, 1], got {eps}")
    if eps * eps < EPS2_FLOOR * T:
        raise ParameterError(
            f"eps={eps} is below the floor sqrt({EPS2_FLOOR:g} T) for T={T}: "
            f"about {T / eps**2:.3g} jumps per component would be needed"
        )
    return float(eps)


def component_stream(seed: int, replicate: int, component: int) -> np.random.SeedSequence:
    """Independent substream for one (replicate, component) pair."""
    return rng.stream(seed, rng.POISSON, replicate, component)


@dataclass
class PoissonRealization:
    """Sorted jump times (internal clock) of ``d`` independent Poisson processes.

    ``jumps[i]`` holds the jump times of component ``i`` on ``[0, T / eps**2]``.
    """

    jumps: List[np.ndarray]
    T: float
    eps: float
    seed: Optional[int] = None
    replicate: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.jumps = [np.asarray(j, dtype=float) for j in self.jumps]
        for i, j in enumerate(self.jumps):
            if j.size and (np.any(np.diff(j) <= 0) or j[0] < 0 or j[-1] > self.horizon):
                raise ParameterError(f"jump times of component {i} must be increasing in [0, T/eps^2]")

    @property
    def dim(self) -> int:
        return len(self.jumps)

    @property
    def horizon(self) -> float:
        return self.T / self.eps**2

    def switch_times(self, i: int) -> np.ndarray:
        """Sign-change times of ``theta_i`` in real time."""
        return self.jumps[i] * self.eps**2

    @classmethod
    def from_jumps(cls, jumps: Sequence[Sequence[float]], T: float, eps: float) -> "PoissonRealization":
        return cls([np.asarray(j, dtype=float) for j in jumps], float(T), float(eps))

    def to_csv(self, path):
        rows = ((i, k, float(t)) for i, j in enumerate(self.jumps) for k, t in enumerate(j))
        return write_csv(path, ["component", "jump_index", "internal_time"], rows)


def _poisson_jumps(rng: np.random.Generator, horizon: float) -> np.ndarray:
    n = int(horizon + 8.0 * np.sqrt(horizon) + 16)
    times = np.cumsum(rng.standard_exponential(n))
    while times[-1] <= horizon:
        more = np.cumsum(rng.standard_exponential(n)) + times[-1]
        times = np.concatenate((times, more))
    return times[: np.searchsorted(times, horizon, side="right")]


def sample_poisson(d: int, T: float, eps: float, seed: int, replicate: int = 0, streams=None) -> PoissonRealization:
    """Draw jump times of ``d`` unit-rate Poisson processes on ``[0, T/eps^2]``.

    Component ``i`` uses the substream ``(seed, replicate, i)`` unless
    ``streams`` supplies explicit seed sequences, so components never share
    random numbers.
    """
    if d < 1:
        raise ParameterError(f"need d >= 1, got {d}")
    if not T > 0:
        raise ParameterError(f"need T > 0, got {T}")
    check_eps(eps, T)
    horizon = T / eps**2
    if streams is None:
        streams = [component_stream(seed, replicate, i) for i in range(d)]
    jumps = [_poisson_jumps(np.random.default_rng(s), horizon) for s in streams]
    return PoissonRealization(jumps, float(T), float(eps), seed, replicate)


def sample_poisson_batch(d: int, T: float, eps: float, seed: int, replicates, start: int = 0):
    """Realizations for replicates ``start, ..., start + replicates - 1``."""
    return [sample_poisson(d, T, eps, seed, replicate=r) for r in range(start, start + replicates)]


def _resolve_eps(pr: PoissonRealization, eps):
    if eps is not None and not np.isclose(eps, pr.eps, rtol=1e-12, atol=0):
        raise ParameterError(f"eps={eps} does not match the realization's eps={pr.eps}")
    return pr.eps


def _check_times(pr: PoissonRealization, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > pr.T * (1 + 1e-12)):
        raise DomainError(f"times must lie in [0, {pr.T}]")
    return r


def theta_eval(pr: PoissonRealization, i: int, r, eps=None):
    """``theta_i(r) = (1/eps) (-1)^{#jumps <= r/eps^2}``; right-continuous."""
    eps = _resolve_eps(pr, eps)
    r = _check_times(pr, r)
    count = np.searchsorted(pr.jumps[i], r / eps**2, side="right")
    out = np.where(count % 2 == 0, 1.0, -1.0) / eps
    return float(out) if out.ndim == 0 else out


def sign_pieces(pr: PoissonRealization, i: int, a: float, b: float):
    """Breakpoints of ``[a, b]`` at the sign changes of ``theta_i`` and the sign on each piece."""
    tau = pr.switch_times(i)
    inner = tau[(tau > a) & (tau < b)]
    breaks = np.concatenate(([a], inner, [b]))
    k0 = np.searchsorted(tau, a, side="right")
    signs = np.where((k0 + np.arange(len(breaks) - 1)) % 2 == 0, 1.0, -1.0)
    return breaks, signs


def integrate_f_theta(
    pr: PoissonRealization,
    i: int,
    f: Callable,
    eps=None,
    antiderivative: Optional[Callable] = None,
    a: float = 0.0,
    b: Optional[float] = None,
    rtol: float = 1e-10,
    atol: float = 1e-14,
) -> float:
    """``int_a^b f(r) theta_i(r) dr`` integrated exactly on each sign piece.

    With ``antiderivative`` the pieces are closed-form; otherwise each piece
    is integrated by adaptive Gauss-Legendre (raises ``ToleranceError`` on
    failure).
    """
    eps = _resolve_eps(pr, eps)
    b = pr.T if b is None else b
    _check_times(pr, [a, b])
    breaks, signs = sign_pieces(pr, i, a, b)
    if antiderivative is not None:
        F = np.asarray(antiderivative(breaks), dtype=float)
        return float(np.dot(signs, np.diff(F)) / eps)
    tau = pr.switch_times(i)

    def integrand(x):
        c = np.searchsorted(tau, x, side="right")
        return np.asarray(f(x), dtype=float) * np.where(c % 2 == 0, 1.0, -1.0)

    val, _ =piecewise_quad(integrand, breaks, rtol=rtol, atol=atol)
    return float(val) / eps


def integrate_f_theta_batch(realizations, i: int, antiderivative: Callable, a: float = 0.0, b=None) -> np.ndarray:
    """Closed-form ``int_a^b f theta_i`` for many realizations at once."""
    if not realizations:
        return np.zeros(0)
    eps, T = realizations[0].eps, realizations[0].T
    b = T if b is None else b
    taus, counts = [], []
    for pr in realizations:
        tau = pr.switch_times(i)
        k0 = np.searchsorted(tau, a, side="right")
        inner = tau[(tau > a) & (tau < b)]
        taus.append(inner)
        counts.append((k0, inner.size))
    k0 = np.array([c[0] for c in counts])
    n = np.array([c[1] for c in counts])
    flat = np.concatenate(taus) if n.sum() else np.zeros(0)
    Fa = float(antiderivative(np.array([a]))[0])
    Fb = float(antiderivative(np.array([b]))[0])
    # sum_k s_k (F(b_k) - F(a_k)) = -s_0 F(a) + sum_k 2 s_{k-1} F(tau_k) + s_n F(b)
    s0 = np.where(k0 % 2 == 0, 1.0, -1.0)
    owner = np.repeat(np.arange(len(realizations)), n)
    local = np.arange(flat.size) - np.repeat(np.cumsum(n) - n, n)
    w = 2.0 * s0[owner] * np.where(local % 2 == 0, 1.0, -1.0)
    inner_sum = np.bincount(owner, weights=w * antiderivative(flat), minlength=len(realizations))
    sn = s0 * np.where(n % 2 == 0, 1.0, -1.0)
    return (-s0 * Fa + inner_sum + sn * Fb) / eps


def _kernel_sum(tau: np.ndarray, t: np.ndarray, eps: float, prim: Callable, chunk: int = 4_000_000):
    """``(1/eps) int_0^t prim'(t, r) (-1)^{N(r)} dr`` for each ``t``.

    ``prim(t, r)`` is an antiderivative in ``r`` of the kernel. Uses the
    telescoped form ``-prim(t,0) + sum_{tau_k<=t} 2 (-1)^{k-1} prim(t,tau_k)
    + (-1)^{N(t)} prim(t,t)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape)
    alt = 2.0 * np.where(np.arange(tau.size) % 2 == 0, 1.0, -1.0)
    nt = np.searchsorted(tau, t, side="right")
    tail = np.where(nt % 2 == 0, 1.0, -1.0)
    rows = max(1, chunk // max(tau.size, 1))
    for lo in range(0, t.size, rows):
        tt = t[lo : lo + rows]
        acc = -prim(tt, 0.0) + tail[lo : lo + rows] * prim(tt, tt)
        if tau.size:
            mask = tau[None, :] <= tt[:, None]
            vals = prim(tt[:, None], np.minimum(tau[None, :], tt[:, None]))
            acc = acc + np.sum(np.where(mask, alt[None, :] * vals, 0.0), axis=1)
        out[lo : lo + rows] = acc
    return out / eps


def xeps_values(pr: PoissonRealization, i: int, t, H: float) -> np.ndarray:
    """``X^{eps,i}(t) = int_0^t (t + eps - r)^{H-1/2} theta_i(r) dr`` at arbitrary times."""
    eps = pr.eps
    p = H + 0.5

    def prim(tt, r):
        return -((tt + eps - r) ** p) / p

    return _kernel_sum(pr.switch_times(i), t, eps, prim)


def build_X_eps(pr: PoissonRealization, H: float, grid: Grid, eps=None) -> SamplePath:
    """Sample ``X^eps`` (all components) at the grid nodes, in closed form."""
    check_hurst(H)
    _resolve_eps(pr, eps)
    if grid.T > pr.T * (1 + 1e-12):
        raise DomainError(f"grid horizon {grid.T} exceeds the realization horizon {pr.T}")
    t = grid.nodes
    vals = np.stack([xeps_values(pr, i, t, H) for i in range(pr.dim)], axis=1)
    vals[0] = 0.0
    return SamplePath(grid, vals)


def xeps_derivative(pr: PoissonRealization, i: int, u, H: float, eps=None):
    """Time derivative of ``X^{eps,i}``.

    ``eps^{H-1/2} theta_i(u) - (1/2 - H) int_0^u (u + eps - v)^{H-3/2} theta_i(v) dv``,
    right-continuous at sign changes.
    """
    check_hurst(H)
    eps = _resolve_eps(pr, eps)
    u_arr = _check_times(pr, u)
    beta = H - 0.5

    def prim(tt, v):
        return -((tt + eps - v) ** beta) / beta

    inner = _kernel_sum(pr.switch_times(i), np.atleast_1d(u_arr), eps, prim)
    th = np.atleast_1d(theta_eval(pr, i, np.atleast_1d(u_arr)))
    out = eps**beta * th + beta * inner
    return float(out[0]) if u_arr.ndim == 0 else out

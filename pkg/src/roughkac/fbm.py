"""Liouville fractional Brownian motion ``B_t = int_0^t (t - r)^{H-1/2} dW_r``.

Two samplers are provided. :func:`simulate_fbm_cholesky` is exact in law on
a grid; :func:`simulate_fbm_volterra` is built from an explicit Wiener path
so that iterated integrals against the same ``W`` can be formed afterwards.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, linalg
from scipy.signal import fftconvolve

from . import rng
from .errors import DomainError, NumericalError, ParameterError, ToleranceError
from .grid import Grid, SamplePath
from .io import write_csv
from .kac_stroock import check_hurst

log = logging.getLogger(__name__)

JITTER_START = 1e-14
JITTER_MAX = 1e-10


def covariance_R(t: float, s: float, H: float, rtol: float = 1e-11) -> float:
    """``E[B_t B_s] = int_0^{min(t,s)} (t - r)^{H-1/2} (s - r)^{H-1/2} dr``.

    After ``x = min(t,s) - r`` the integrand is ``x^beta (c + x)^beta`` with
    ``c = |t - s|``; the algebraic endpoint factor is handled by QUADPACK's
    ``alg`` weight and the near-singular factor by splitting at ``x = c``.
    """
    check_hurst(H)
    if t < 0 or s < 0:
        raise DomainError(f"times must be non-negative, got t={t}, s={s}")
    beta = H - 0.5
    m, c = min(t, s), abs(t - s)
    if m == 0:
        return 0.0
    if c == 0:
        return m ** (2 * H) / (2 * H)
    pieces = [(0.0, min(c, m))]
    if c < m:
        pieces.append((c, m))
    total = 0.0
    for a, b in pieces:
        if a == 0.0:
            val, err = integrate.quad(
                lambda x: (c + x) ** beta, a, b, weight="alg", wvar=(beta, 0.0), epsabs=0.0, epsrel=rtol, limit=200
            )
        else:
            val, err = integrate.quad(
                lambda x: x**beta * (c + x) ** beta, a, b, epsabs=0.0, epsrel=rtol, limit=200
            )
        if not err <= 100 * rtol * abs(val):
            raise ToleranceError(f"covariance quadrature failed on [{a}, {b}]", residual=err)
        total += val
    return float(total)


@lru_cache(maxsize=32)
def _cov_cached(times: tuple, H: float) -> np.ndarray:
    n = len(times)
    C = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            C[a, b] = C[b, a] = covariance_R(times[a], times[b], H)
    C.setflags(write=False)
    return C


def covariance_matrix(times, H: float) -> np.ndarray:
    """``[R(t_a, t_b)]`` for the given times (cached, read-only)."""
    return _cov_cached(tuple(float(t) for t in np.asarray(times).ravel()), float(H))


def covariance_to_csv(path, times, H: float):
    times = np.asarray(times, dtype=float)
    C = covariance_matrix(times, H)
    rows = ((a, b, times[a], times[b], C[a, b]) for a in range(times.size) for b in range(times.size))
    return write_csv(path, ["row", "col", "t_row", "t_col", "value"], rows)


@dataclass(frozen=True)
class CholeskyFactor:
    L: np.ndarray
    jitter: float


@lru_cache(maxsize=32)
def _factor_cached(times: tuple, H: float) -> CholeskyFactor:
    C = covariance_matrix(times, H)
    scale = float(np.max(np.diag(C)))
    jitter = 0.0
    while True:
        try:
            L = linalg.cholesky(C + jitter * np.eye(len(times)), lower=True)
            if jitter:
                log.warning("covariance factorized with diagonal jitter %.3g (relative)", jitter / scale)
            return CholeskyFactor(L, jitter / scale)
        except linalg.LinAlgError:
            jitter = JITTER_START * scale if jitter == 0 else jitter * 10
            if jitter > JITTER_MAX * scale * (1 + 1e-12):
                raise NumericalError("covariance matrix is not positive definite even with maximal jitter")


def fbm_factor(grid: Grid, H: float) -> CholeskyFactor:
    """Lower Cholesky factor of the covariance on ``grid`` without ``t = 0``."""
    check_hurst(H)
    return _factor_cached(tuple(float(t) for t in grid.nodes[1:]), float(H))


def _normals(seed, tag, replicate, d, n):
    return np.stack([rng.generator(seed, tag, replicate, i).standard_normal(n) for i in range(d)], axis=-1)


def simulate_fbm_cholesky(grid: Grid, d: int, H: float, seed: int, replicate: int = 0) -> SamplePath:
    """Exact-in-law draw of ``d`` independent components on ``grid``; ``B_0 = 0``."""
    if d < 1:
        raise ParameterError(f"need d >= 1, got {d}")
    f = fbm_factor(grid, H)
    z = _normals(seed, rng.CHOLESKY, replicate, d, grid.n_points - 1)
    values = np.zeros((grid.n_points, d))
    values[1:] = f.L @ z
    return SamplePath(grid, values)


def simulate_fbm_cholesky_batch(grid: Grid, d: int, H: float, seed: int, replicates: int, start: int = 0) -> np.ndarray:
    """Values of shape ``(M, n_points, d)``; replicate ``r`` equals the single-path draw."""
    f = fbm_factor(grid, H)
    n = grid.n_points - 1
    z = np.stack([_normals(seed, rng.CHOLESKY, r, d, n) for r in range(start, start + replicates)])
    out = np.zeros((replicates, grid.n_points, d))
    out[:, 1:] = np.matmul(f.L, z)
    return out


@dataclass
class WienerGrid:
    """Independent ``N(0, step)`` increments; ``increments[k, i]`` lives on cell ``k``."""

    grid: Grid
    increments: np.ndarray
    seed: Optional[int] = None
    replicate: int = 0

    def __post_init__(self):
        self.increments = np.asarray(self.increments, dtype=float)
        if self.increments.ndim == 1:
            self.increments = self.increments[:, None]
        if self.increments.shape[0] != self.grid.n_points - 1:
            raise ParameterError("need one increment per grid cell")

    @property
    def dim(self) -> int:
        return self.increments.shape[1]

    def path(self) -> SamplePath:
        values = np.vstack((np.zeros((1, self.dim)), np.cumsum(self.increments, axis=0)))
        return SamplePath(self.grid, values)


def sample_wiener(grid: Grid, d: int, seed: int, replicate: int = 0) -> WienerGrid:
    if d < 1:
        raise ParameterError(f"need d >= 1, got {d}")
    dW = _normals(seed, rng.WIENER, replicate, d, grid.n_points - 1) * np.sqrt(grid.step)
    return WienerGrid(grid, dW, seed, replicate)


def sample_wiener_batch(grid: Grid, d: int, seed: int, replicates: int, start: int = 0) -> np.ndarray:
    """Increments of shape ``(M, n_points - 1, d)``."""
    n = grid.n_points - 1
    return np.stack([_normals(seed, rng.WIENER, r, d, n) for r in range(start, start + replicates)]) * np.sqrt(grid.step)


def volterra_kernel(h: float, n_cells: int, H: float) -> np.ndarray:
    """Cell averages ``(1/h) int_cell (t_k - r)^{H-1/2} dr`` indexed by lag ``q = k - j``.

    Entry ``q - 1`` is ``h^beta (q^{beta+1} - (q-1)^{beta+1}) / (beta + 1)``.
    """
    beta = H - 0.5
    q = np.arange(1, n_cells + 1, dtype=float)
    return h**beta * (q ** (beta + 1) - (q - 1) ** (beta + 1)) / (beta + 1)


def volterra_from_increments(dW: np.ndarray, h: float, H: float) -> np.ndarray:
    """``B(t_k) = sum_{j<k} Kbar(k - j) dW_j`` along axis ``-2``; returns one more row than ``dW``."""
    check_hurst(H)
    dW = np.asarray(dW, dtype=float)
    n = dW.shape[-2]
    K = volterra_kernel(h, n, H)
    shape = [1] * dW.ndim
    shape[-2] = n
    conv = fftconvolve(dW, K.reshape(shape), axes=dW.ndim - 2)[..., :n, :]
    zero = np.zeros(dW.shape[:-2] + (1, dW.shape[-1]))
    return np.concatenate((zero, conv), axis=-2)


def simulate_fbm_volterra(w: WienerGrid, H: float) -> SamplePath:
    """Volterra construction coupled to ``w``; first order in the cell size."""
    if w.grid.n_points < 2:
        raise ParameterError("degenerate grid")
    return SamplePath(w.grid, volterra_from_increments(w.increments, w.grid.step, H))


def path_to_csv(path: SamplePath, file):
    rows = ((t, i, path.values[k, i]) for k, t in enumerate(path.times) for i in range(path.dim))
    return write_csv(file, ["t", "component", "value"], rows)

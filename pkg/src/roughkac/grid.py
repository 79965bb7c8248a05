"""Uniform grids, increments and the norm estimators built on them.

Paths live on a uniform grid ``t_k = k T / (n - 1)``. A 1-increment ``g`` is
stored as its node values; a 2-increment ``h_{st}`` is indexed by pairs of
node indices ``(ks, kt)`` and may be either a dense array or a closure.

All estimators take node *indices* rather than times, so there is never any
ambiguity about which node a float refers to.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InsufficientDataError, OrderingError, ParameterError


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[0, T]`` with ``n_points`` nodes."""

    T: float
    n_points: int

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError(f"horizon must be positive, got T={self.T}")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise InsufficientDataError(f"a grid needs at least 2 points, got {self.n_points}")

    @property
    def step(self) -> float:
        return self.T / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.n_points) * self.step
        t[-1] = self.T
        return t

    def node(self, k: int) -> float:
        if not 0 <= k < self.n_points:
            raise IndexError(f"node index {k} outside 0..{self.n_points - 1}")
        return self.T if k == self.n_points - 1 else k * self.step

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        """Index of the node equal to ``t``; raises if ``t`` is not a node."""
        k = int(round(t / self.step))
        if not 0 <= k < self.n_points or abs(self.node(k) - t) > rtol * max(self.T, 1.0):
            raise OrderingError(f"t={t} is not a node of {self}")
        return k

    def subgrid(self, stride: int) -> "Grid":
        """Every ``stride``-th node; requires ``stride`` to divide ``n_points - 1``."""
        if (self.n_points - 1) % stride:
            raise ParameterError(f"stride {stride} does not divide {self.n_points - 1}")
        return Grid(self.T, (self.n_points - 1) // stride + 1)


@dataclass
class SamplePath:
    """A d-dimensional path sampled at every node of ``grid``.

    ``values`` has shape ``(n_points, d)``.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.grid.n_points:
            raise ParameterError(
                f"values must have shape (n_points, d) = ({self.grid.n_points}, d), got {v.shape}"
            )
        if v.shape[1] < 1:
            raise ParameterError("a path needs at least one component")
        self.values = v

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> "SamplePath":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=float))


@dataclass
class Increment2:
    """A 2-increment ``h_{st}`` on a grid, for ordered index pairs ``ks <= kt``.

    Either ``dense`` (shape ``(n, n, *value_shape)``, entry ``[ks, kt]``) or
    ``fn`` (vectorised ``fn(ks, kt) -> array``) must be supplied.
    """

    grid: Grid
    dense: Optional[np.ndarray] = None
    fn: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if (self.dense is None) == (self.fn is None):
            raise ParameterError("supply exactly one of dense or fn")
        if self.dense is not None:
            self.dense = np.asarray(self.dense, dtype=float)
            n = self.grid.n_points
            if self.dense.shape[:2] != (n, n):
                raise ParameterError(f"dense increment must start with shape ({n}, {n})")

    def __call__(self, ks, kt) -> np.ndarray:
        ks = np.asarray(ks, dtype=int)
        kt = np.asarray(kt, dtype=int)
        if self.dense is not None:
            return self.dense[ks, kt]
        return np.asarray(self.fn(ks, kt), dtype=float)

    @property
    def value_shape(self) -> tuple:
        return np.shape(self(0, 0))

    def materialize(self) -> "Increment2":
        if self.dense is not None:
            return self
        n = self.grid.n_points
        ks, kt = np.triu_indices(n)
        vals = self(ks, kt)
        # only ordered pairs are defined; the lower triangle stays zero
        dense = np.zeros((n, n) + vals.shape[1:])
        dense[ks, kt] = vals
        return Increment2(self.grid, dense=dense)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "Increment2":
        """Wrap a function of *times* ``fn(s, t)`` as a lazy increment."""
        nodes = grid.nodes
        return cls(grid, fn=lambda ks, kt: fn(nodes[ks], nodes[kt]))


def delta1(g: SamplePath) -> Increment2:
    """``(delta g)_{st} = g_t - g_s``, materialised for all node pairs.

    For a scalar path the entries are scalars, otherwise d-vectors.
    """
    v = g.values[:, 0] if g.dim == 1 else g.values
    return Increment2(g.grid, dense=v[None, :] - v[:, None])


def delta2(h: Increment2, ks: int, ku: int, kt: int) -> np.ndarray:
    """``(delta h)_{sut} = h_{st} - h_{su} - h_{ut}`` for node indices ``ks <= ku <= kt``."""
    if not ks <= ku <= kt:
        raise OrderingError(f"need s <= u <= t, got indices ({ks}, {ku}, {kt})")
    return h(ks, kt) - h(ks, ku) - h(ku, kt)


def _require_points(n):
    if n < 2:
        raise InsufficientDataError("norm estimators need at least 2 grid points")


def _lags(n: int, dyadic: bool):
    """Yield (lag, starting-index stride) pairs covering the pair set."""
    if not dyadic:
        for lag in range(1, n):
            yield lag, 1
    else:
        lag = 1
        while lag < n:
            yield lag, lag
            lag *= 2


def holder_seminorm(values: np.ndarray, step: float, mu: float, dyadic: bool = False) -> np.ndarray:
    """Grid Hölder semi-norm of sampled paths.

    ``values`` has shape ``(..., n, d)``; the result has shape ``(...)``.
    Increments are measured in the Euclidean norm of R^d. With ``dyadic``
    only the pairs ``(k 2^j, (k+1) 2^j)`` enter the supremum.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-2]
    _require_points(n)
    best = np.zeros(values.shape[:-2])
    for lag, stride in _lags(n, dyadic):
        inc = values[..., lag::stride, :] - values[..., : n - lag : stride, :]
        m = np.sqrt(np.einsum("...kd,...kd->...k", inc, inc)).max(axis=-1)
        np.maximum(best, m / (lag * step) ** mu, out=best)
    return best


def holder_norm1(g: SamplePath, mu: float, dyadic: bool = False) -> float:
    """sup over distinct node pairs of ``|g_t - g_s| / |t - s|^mu``."""
    if not 0 < mu <= 1:
        raise ParameterError(f"mu must lie in (0, 1], got {mu}")
    _require_points(g.grid.n_points)
    return float(holder_seminorm(g.values, g.grid.step, mu, dyadic))


def _entry_norm(x: np.ndarray, ndim_value: int) -> np.ndarray:
    if ndim_value == 0:
        return np.abs(x)
    axes = tuple(range(-ndim_value, 0))
    return np.sqrt(np.sum(x * x, axis=axes))


def holder_norm2(h: Increment2, mu: float, dyadic: bool = False) -> float:
    """sup over node pairs ``s < t`` of ``|h_{st}| / (t - s)^mu``.

    Matrix- or vector-valued entries are measured in the Frobenius norm.
    """
    if not mu > 0:
        raise ParameterError(f"mu must be positive, got {mu}")
    n = h.grid.n_points
    _require_points(n)
    nv = len(h.value_shape)
    best = 0.0
    for lag, stride in _lags(n, dyadic):
        ks = np.arange(0, n - lag, stride)
        r = _entry_norm(h(ks, ks + lag), nv).max() / (lag * h.grid.step) ** mu
        best = max(best, float(r))
    return best


def _trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = step / 2
    return w


def sobolev_norm(g: SamplePath, alpha: float, p: float) -> float:
    """Grid estimate of the Sobolev-Slobodeckij semi-norm ``||g||_{alpha,p}``.

    Trapezoid weights on the product grid; the diagonal cells are left out,
    so the singular band ``|t - s| < step`` does not contribute.
    """
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    n, h = g.grid.n_points, g.grid.step
    _require_points(n)
    w = _trapezoid_weights(n, h)
    total = 0.0
    for lag in range(1, n):
        inc = g.values[lag:] - g.values[:-lag]
        mag = np.sqrt(np.sum(inc * inc, axis=-1))
        total += 2.0 * np.sum(w[lag:] * w[:-lag] * mag**p) / (lag * h) ** (1 + alpha * p)
    return total ** (1.0 / p)


def garsia_U(h: Increment2, gamma: float, p: float) -> float:
    """Grid estimate of ``U_{gamma;p}(h) = (int int |h_st|^p / |t-s|^{gamma p} ds dt)^{1/p}``.

    Only ordered pairs are stored, so the square is evaluated as twice the
    upper triangle. Diagonal cells are excluded.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    n, step = h.grid.n_points, h.grid.step
    _require_points(n)
    nv = len(h.value_shape)
    w = _trapezoid_weights(n, step)
    total = 0.0
    for lag in range(1, n):
        ks = np.arange(n - lag)
        mag = _entry_norm(h(ks, ks + lag), nv)
        total += 2.0 * np.sum(w[lag:] * w[:-lag] * mag**p) / (lag * step) ** (gamma * p)
    return total ** (1.0 / p)

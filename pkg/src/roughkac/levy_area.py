"""Second-order (area) components of smooth approximants and of Liouville fBm.

Index convention, used everywhere in the package::

    x2_{st}(i, j) = int_s^t (x^j_u - x^j_s) dx^i_u

so the first index is the outer integrator. Areas are stored anchored at 0,
``a_k(i, j) = x2_{0 t_k}(i, j)``, and general increments are rebuilt from

    x2_{st}(i, j) = a_t(i, j) - a_s(i, j) - (x^j_s - x^j_0)(x^i_t - x^i_s),

which makes the multiplicative relation
``x2_{st} - x2_{su} - x2_{ut} = dx_{ut}[i] * dx_{su}[j]`` hold exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import DomainError, OrderingError, ParameterError, ToleranceError
from .fbm import WienerGrid
from .grid import Grid, Increment2, SamplePath
from .io import write_csv
from .kac_stroock import PoissonRealization, check_hurst, theta_eval, xeps_derivative, xeps_values
from .quadrature import fixed_gauss, gauss_legendre, piecewise_quad, split_long

METHODS = ("quadrature", "lm2", "lm12", "diagonal-closed-form", "riemann", "reconstructed")


# ---------------------------------------------------------------- area fields


@dataclass
class AreaField:
    """Anchored areas ``anchors[k, i, j] = x2_{0, t_k}(i, j)`` of ``path``."""

    path: SamplePath
    anchors: np.ndarray
    method: str = "quadrature"

    def __post_init__(self):
        a = np.asarray(self.anchors, dtype=float)
        n, d = self.path.values.shape
        if a.shape != (n, d, d):
            raise ParameterError(f"anchors must have shape {(n, d, d)}, got {a.shape}")
        if np.any(a[0] != 0):
            raise ParameterError("anchored areas must vanish at t = 0")
        if self.method not in METHODS:
            raise ParameterError(f"unknown method tag {self.method!r}")
        self.anchors = a

    @property
    def grid(self) -> Grid:
        return self.path.grid

    def reconstruct(self, ks, kt) -> np.ndarray:
        """``x2_{t_ks, t_kt}`` from the anchors; vectorised over index arrays."""
        ks = np.asarray(ks, dtype=int)
        kt = np.asarray(kt, dtype=int)
        if np.any(ks > kt):
            raise OrderingError("need s <= t")
        x = self.path.values
        xs = x[ks] - x[0]
        dx = x[kt] - x[ks]
        return self.anchors[kt] - self.anchors[ks] - dx[..., :, None] * xs[..., None, :]

    def increment(self) -> Increment2:
        return Increment2(self.grid, fn=self.reconstruct)

    def to_csv(self, path):
        t = self.path.times
        d = self.path.dim
        rows = (
            (t[k], i, j, self.anchors[k, i, j], self.method)
            for k in range(t.size)
            for i in range(d)
            for j in range(d)
        )
        return write_csv(path, ["t", "i", "j", "anchored_value", "method"], rows)


def chen_reconstruct(af: AreaField, s: float, t: float) -> np.ndarray:
    """``x2_{st}`` rebuilt from anchored values; ``s`` and ``t`` must be grid nodes."""
    ks, kt = af.grid.index_of(s), af.grid.index_of(t)
    if ks > kt:
        raise OrderingError(f"need s <= t, got s={s}, t={t}")
    return af.reconstruct(ks, kt)


def riemann_area_field(path: SamplePath) -> AreaField:
    """Left-point sums ``sum_k (x^j_k - x^j_0)(x^i_{k+1} - x^i_k)``."""
    x = path.values - path.values[0]
    dx = np.diff(path.values, axis=0)
    a = np.zeros((x.shape[0], x.shape[1], x.shape[1]))
    a[1:] = np.cumsum(dx[:, :, None] * x[:-1, None, :], axis=0)
    return AreaField(path, a, "riemann")


@dataclass
class ChenReport:
    max_defect: float
    scale: float
    tolerance: float
    worst: tuple
    n_triples: int

    @property
    def relative_defect(self) -> float:
        return self.max_defect / self.scale if self.scale > 0 else self.max_defect

    @property
    def passed(self) -> bool:
        return self.relative_defect <= self.tolerance


def random_triples(n_points: int, n_triples: int, seed: int = 0) -> np.ndarray:
    """Sorted node-index triples ``s <= u <= t`` drawn uniformly."""
    g = np.random.default_rng(seed)
    return np.sort(g.integers(0, n_points, size=(n_triples, 3)), axis=1)


def chen_check(x2, path: Optional[SamplePath] = None, tolerance: float = 1e-6, n_triples: int = 1000,
               seed: int = 0, triples=None) -> ChenReport:
    """Worst defect ``|x2_st - x2_su - x2_ut - dx_ut[i] dx_su[j]|`` over sampled triples.

    ``x2`` is an :class:`AreaField` (reconstructed increments) or any
    :class:`Increment2` holding independently computed ``x2_{st}``, in which
    case ``path`` must be given. The tolerance is relative to the largest
    area magnitude seen.
    """
    if isinstance(x2, AreaField):
        path = x2.path if path is None else path
        inc = x2.increment()
    else:
        inc = x2
        if path is None:
            raise ParameterError("path is required for a bare increment")
    if triples is None:
        triples = random_triples(path.grid.n_points, n_triples, seed)
    triples = np.asarray(triples, dtype=int)
    ks, ku, kt = triples.T
    st, su, ut = inc(ks, kt), inc(ks, ku), inc(ku, kt)
    x = path.values
    dsu = x[ku] - x[ks]
    dut = x[kt] - x[ku]
    defect = st - su - ut - dut[:, :, None] * dsu[:, None, :]
    per = np.max(np.abs(defect), axis=(1, 2))
    w = int(np.argmax(per))
    scale = float(max(np.max(np.abs(st)), np.max(np.abs(su)), np.max(np.abs(ut))))
    t = path.times
    return ChenReport(float(per[w]), scale, tolerance, (t[ks[w]], t[ku[w]], t[kt[w]]), len(triples))


# ---------------------------------------------------------------- smooth paths


@dataclass
class SmoothPath:
    """A smooth path given by vectorised callables ``x(u) -> (m, d)`` and ``dx(u) -> (m, d)``.

    ``breaks`` lists points where ``dx`` may be discontinuous.
    """

    x: Callable
    dx: Callable
    T: float
    breaks: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def sample(self, grid: Grid) -> SamplePath:
        return SamplePath(grid, self.x(grid.nodes))


def xeps_smooth_path(pr: PoissonRealization, H: float) -> SmoothPath:
    """``X^eps`` with its exact derivative."""
    check_hurst(H)
    d = pr.dim

    def x(u):
        u = np.atleast_1d(u)
        return np.stack([xeps_values(pr, i, u, H) for i in range(d)], axis=-1)

    def dx(u):
        u = np.atleast_1d(u)
        return np.stack([np.atleast_1d(xeps_derivative(pr, i, u, H)) for i in range(d)], axis=-1)

    breaks = np.unique(np.concatenate([pr.switch_times(i) for i in range(d)] + [np.zeros(0)]))
    return SmoothPath(x, dx, pr.T, breaks)


def area_smooth_quadrature(sp: SmoothPath, s: float, t: float, rtol: float = 1e-8, atol: float = 1e-14,
                           max_len: Optional[float] = None) -> np.ndarray:
    """``x2_{st}(i, j) = int_s^t (x^j_u - x^j_s) dx^i_u`` by adaptive Gauss-Legendre."""
    if s > t:
        raise OrderingError(f"need s <= t, got s={s}, t={t}")
    xs = sp.x(np.array([s]))[0]
    d = xs.size
    if s == t:
        return np.zeros((d, d))
    inner = sp.breaks[(sp.breaks > s) & (sp.breaks < t)]
    breaks = np.concatenate(([s], inner, [t]))

    def f(u):
        return sp.dx(u)[:, :, None] * (sp.x(u) - xs)[:, None, :]

    val, _ = piecewise_quad(f, breaks, rtol=rtol, atol=atol, max_len=max_len)
    return np.asarray(val)


def quadrature_area_field(sp: SmoothPath, grid: Grid, rtol: float = 1e-10, max_len=None) -> AreaField:
    """Anchored areas accumulated cell by cell on ``grid``."""
    path = sp.sample(grid)
    x0 = path.values[0]
    d = path.dim
    nodes = grid.nodes
    breaks = np.union1d(nodes, sp.breaks[(sp.breaks > 0) & (sp.breaks < grid.T)])

    def f(u):
        return sp.dx(u)[:, :, None] * (sp.x(u) - x0)[:, None, :]

    a = np.zeros((grid.n_points, d, d))
    idx = np.searchsorted(breaks, nodes)
    for k in range(1, grid.n_points):
        val, _ = piecewise_quad(f, breaks[idx[k - 1] : idx[k] + 1], rtol=rtol, max_len=max_len)
        a[k] = a[k - 1] + val
    return AreaField(path, a, "quadrature")


def quadrature_increment(sp: SmoothPath, grid: Grid, rtol: float = 1e-10) -> Increment2:
    """Lazy increment computing every requested ``x2_{st}`` independently."""
    nodes = grid.nodes
    cache = {}

    def fn(ks, kt):
        ks, kt = np.broadcast_arrays(np.asarray(ks), np.asarray(kt))
        out = []
        for a, b in zip(ks.ravel(), kt.ravel()):
            key = (int(a), int(b))
            if key not in cache:
                cache[key] = area_smooth_quadrature(sp, nodes[a], nodes[b], rtol=rtol)
            out.append(cache[key])
        return np.array(out).reshape(ks.shape + out[0].shape)

    return Increment2(grid, fn=fn)


# ---------------------------------------------------------------- alternative form for X^eps


def _lm2_pair(pr, H, i, j, s, t, order, max_len):
    eps = pr.eps
    beta = H - 0.5
    pts = [np.array([0.0, s, t])]
    for c in {i, j}:
        tau = pr.switch_times(c)
        pts.append(tau[(tau > 0) & (tau < t)])
    breaks = split_long(np.unique(np.concatenate(pts)), max_len)
    a, b = breaks[:-1], breaks[1:]
    x, w = gauss_legendre(order)
    L = b - a
    U = (a[:, None] + L[:, None] * x).ravel()
    W = (L[:, None] * w).ravel()
    piece = np.repeat(np.arange(a.size), order)
    Xj = xeps_values(pr, j, U, H)
    Xjs = float(xeps_values(pr, j, np.array([s]), H)[0]) if s > 0 else 0.0
    th = theta_eval(pr, i, U)
    T1 = np.sum(W * (Xj - Xjs) * (t + eps - U) ** beta * th)
    before = U < s
    T2 = np.sum((W * (Xj - Xjs) * th)[before] * (s + eps - U[before]) ** beta)
    # inner integral over u in [max(s, v), t] of X^j_u (u + eps - v)^{beta-1}
    later = (piece[None, :] > piece[:, None]) & (U[None, :] >= s)
    K = np.where(later, (np.maximum(U[None, :] - U[:, None], 0.0) + eps) ** (beta - 1), 0.0)
    J = K @ (W * Xj)
    own = U >= s
    if own.any():
        v = U[own]
        bp = b[piece[own]]
        Lp = bp - v
        u2 = v[:, None] + Lp[:, None] * x
        vals = xeps_values(pr, j, u2.ravel(), H).reshape(u2.shape)
        J[own] += np.sum(Lp[:, None] * w * vals * (u2 - v[:, None] + eps) ** (beta - 1), axis=1)
    closed = ((t + eps - U) ** beta - (np.maximum(s, U) + eps - U) ** beta) / beta
    I = J - Xj * closed
    T3 = np.sum(W * th * I)
    return T1 - T2 + beta * T3, max(abs(T1), abs(T2), abs(beta * T3))


def area_lm2(pr: PoissonRealization, H: float, s: float, t: float, eps: Optional[float] = None,
             order: int = 8, rtol: float = 1e-8, max_len: Optional[float] = None) -> np.ndarray:
    """``X^{2,eps}_{st}`` through the boundary-kernel form of the area.

    Three terms: ``int_0^t dX_{su}^j (t+eps-u)^beta theta_i(u) du``, the same
    up to ``s`` with kernel ``(s+eps-u)^beta``, and
    ``-(1/2 - H) int_0^t theta_i(v) int_{s v v}^t (X^j_u - X^j_v)(u+eps-v)^{beta-1} du dv``.
    Every sign piece (capped at ``eps^2``) gets Gauss-Legendre rules of
    order ``order`` and ``order + 4``; disagreement beyond ``rtol`` times the
    term magnitude raises :class:`ToleranceError`.
    """
    check_hurst(H)
    if eps is not None and not np.isclose(eps, pr.eps, rtol=1e-12, atol=0):
        raise ParameterError(f"eps={eps} does not match the realization's eps={pr.eps}")
    if s > t:
        raise OrderingError(f"need s <= t, got s={s}, t={t}")
    if s < 0 or t > pr.T * (1 + 1e-12):
        raise DomainError(f"[s, t] must lie in [0, {pr.T}]")
    d = pr.dim
    out = np.zeros((d, d))
    if s == t:
        return out
    max_len = pr.eps**2 if max_len is None else max_len
    for i in range(d):
        for j in range(d):
            lo, mag = _lm2_pair(pr, H, i, j, s, t, order, max_len)
            hi, _ = _lm2_pair(pr, H, i, j, s, t, order + 4, max_len)
            if abs(hi - lo) > rtol * max(mag, 1e-300):
                raise ToleranceError(f"area entry ({i}, {j}) did not converge", residual=abs(hi - lo))
            out[i, j] = hi
    return out


def xeps_area_scale(pr: PoissonRealization, H: float, t: float, n: int = 257) -> float:
    """``max_k sup_{u <= t} |X^{eps,k}_u|^2``: the natural size of the areas."""
    u = np.linspace(0.0, t, n)
    return float(max(np.max(np.abs(xeps_values(pr, k, u, H))) for k in range(pr.dim)) ** 2)


# ---------------------------------------------------------------- fBm areas against dW


@lru_cache(maxsize=16)
def _cell_moments(h: float, H: float, n: int):
    """Exact cell moments of the kernels on a uniform grid with step ``h``.

    ``m0(q), m1(q)`` integrate ``(1, lam) * (q - lam)^beta h^beta``,
    ``q = 1..n``. ``c0(p), c1(p), D(p)`` are the weights of ``B_m``,
    ``B_{m+1}`` and ``B_k`` in ``int_{cell m} (B_u - B_k)(u - t_k)^{beta-1} du``,
    ``p = m - k = 0..n-1``.
    """
    beta = H - 0.5
    x, w = gauss_legendre(20)
    q = np.arange(1, n + 1, dtype=float)
    m0 = (q ** (beta + 1) - (q - 1) ** (beta + 1)) / (beta + 1)
    m1 = np.empty(n)
    m1[0] = 1.0 / ((beta + 1) * (beta + 2))
    m1[1:] = ((q[1:, None] - x) ** beta * x) @ w
    p = np.arange(1, n, dtype=float)
    n0 = ((p[:, None] + x) ** (beta - 1)) @ w
    n1 = ((p[:, None] + x) ** (beta - 1) * x) @ w
    c0 = np.concatenate(([0.0], n0 - n1))
    c1 = np.concatenate(([1.0 / (beta + 1)], n1))
    D = np.concatenate(([1.0 / (beta + 1)], n0))
    scale_m, scale_n = h**beta, h**beta  # h * h^{beta-1} for the inner kernel
    out = tuple(a * scale_m for a in (m0, m1)) + tuple(a * scale_n for a in (c0, c1, D))
    for a in out:
        a.setflags(write=False)
    return out


def _corr(xs: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """``sum_{p >= 0} kern[p] xs[..., k + p]`` along the last axis."""
    n = xs.shape[-1]
    y = xs[..., ::-1]
    kern = np.reshape(kern[:n], (1,) * (y.ndim - 1) + (-1,))
    return fftconvolve(y, kern, axes=-1)[..., :n][..., ::-1]


def lm12_coefficients(Bj: np.ndarray, h: float, H: float, a: int, b: int) -> np.ndarray:
    """Cell weights ``c`` with ``B2_{t_a t_b}(i, j) = sum_k c_k dW^i_k``.

    ``Bj`` holds ``B^j`` at the ``N + 1`` nodes (a leading batch axis is
    allowed). The three terms are

        int_s^t (B^j_u - B^j_s)(t - u)^beta dW^i_u
      + int_0^s (B^j_u - B^j_s)[(t - u)^beta - (s - u)^beta] dW^i_u
      - (1/2 - H) int_0^t dW^i_v int_{s v v}^t (B^j_u - B^j_v)(u - v)^{beta-1} du.

    The second term carries a plus sign: it is the part of the first
    boundary integral of the smooth form lying below ``s``, and only with
    this sign does the result agree with the Chen reconstruction from 0.

    Inside a cell ``dW^i`` is spread uniformly and ``B^j`` is interpolated
    linearly, so every kernel integral is an exact cell moment; the result
    stays linear in ``dW^i``.
    """
    check_hurst(H)
    Bj = np.asarray(Bj, dtype=float)
    N = Bj.shape[-1] - 1
    if not 0 <= a <= b <= N:
        raise DomainError(f"node indices must satisfy 0 <= a <= b <= {N}")
    beta = H - 0.5
    m0, m1, c0, c1, D = _cell_moments(float(h), float(H), N)
    k = np.arange(N)
    Bk, Bk1, Ba = Bj[..., :-1], Bj[..., 1:], Bj[..., a : a + 1]
    c = np.zeros(Bj.shape[:-1] + (N,))

    def bracket(q, sel):
        qi = q - 1
        return Bk[..., sel] * (m0[qi] - m1[qi]) + Bk1[..., sel] * m1[qi] - Ba * m0[qi]

    inside = (k >= a) & (k < b)
    if inside.any():
        c[..., inside] += bracket(b - k[inside], inside)
    before = k < a
    if before.any() and b > a:
        c[..., before] += bracket(b - k[before], before) - bracket(a - k[before], before)
    # alpha-term: B^j_m restricted to cells m in [a, b)
    mask = inside.astype(float)
    G0 = _corr(Bk * mask, c0)
    G1 = _corr(Bk1 * mask, c1)
    cumD = np.concatenate(([0.0], np.cumsum(D)))
    lo = np.maximum(k, a)
    Dsum = cumD[np.clip(b - k, 0, N)] - cumD[np.clip(lo - k, 0, N)]
    I = G0 + G1 - Bk * Dsum
    c[..., : b] += beta * I[..., : b]
    return c


def area_fbm_lm12(w: WienerGrid, B: SamplePath, H: float, s: float, t: float) -> np.ndarray:
    """``B2_{st}`` (d x d): off-diagonal entries from the discretised
    Wiener-integral form against ``dW^i``, diagonal ``(B^i_t - B^i_s)^2 / 2``.

    ``s`` and ``t`` must be nodes of the Wiener grid.
    """
    if B.grid != w.grid:
        raise ParameterError("B must be built on the Wiener grid")
    try:
        a, b = w.grid.index_of(s), w.grid.index_of(t)
    except (DomainError, ParameterError) as exc:
        raise DomainError(f"s={s}, t={t} are not fine-grid nodes; interpolation is refused") from exc
    if a > b:
        raise OrderingError(f"need s <= t, got s={s}, t={t}")
    d = w.dim
    out = np.zeros((d, d))
    for j in range(d):
        c = lm12_coefficients(B.values[:, j], w.grid.step, H, a, b)
        for i in range(d):
            if i != j:
                out[i, j] = c @ w.increments[:, i]
    dB = B.values[b] - B.values[a]
    out[np.diag_indices(d)] = 0.5 * dB**2
    return out


def lm12_anchored(dW: np.ndarray, B: np.ndarray, h: float, H: float) -> np.ndarray:
    """Anchored areas ``B2_{0 t_b}`` for every node ``b`` at once.

    ``dW`` has shape ``(..., N, d)`` and ``B`` shape ``(..., N + 1, d)``;
    returns ``(..., N + 1, d, d)``. Equals :func:`lm12_coefficients` with
    ``a = 0`` applied at every ``b``, rearranged as causal convolutions.
    """
    check_hurst(H)
    dW = np.asarray(dW, dtype=float)
    B = np.asarray(B, dtype=float)
    N, d = dW.shape[-2], dW.shape[-1]
    beta = H - 0.5
    m0, m1, c0, c1, D = _cell_moments(float(h), float(H), N)
    out = np.zeros(dW.shape[:-2] + (N + 1, d, d))

    def causal(x, kern):
        return fftconvolve(x, np.reshape(kern, (1,) * (x.ndim - 1) + (-1,)), axes=-1)[..., :N]

    for i in range(d):
        wi = dW[..., :, i]
        cw0, cw1 = causal(wi, c0), causal(wi, c1)
        for j in range(d):
            Bj = B[..., :, j]
            if i == j:
                out[..., 1:, i, i] = 0.5 * (Bj[..., 1:] - Bj[..., :1]) ** 2
                continue
            Bk, Bk1 = Bj[..., :-1], Bj[..., 1:]
            x0 = wi * (Bk - Bj[..., :1])
            x1 = wi * (Bk1 - Bk)
            # term with kernel q = b - k, minus the anchor B^j_0 (zero for fBm)
            term1 = causal(x0, m0) + causal(x1, m1)
            inner = Bk * cw0 + Bk1 * cw1 - causal(wi * Bk, D)
            out[..., 1:, i, j] = term1 + beta * np.cumsum(inner, axis=-1)
    return out


def lm12_area_field(w: WienerGrid, B: SamplePath, H: float) -> AreaField:
    a = lm12_anchored(w.increments, B.values, w.grid.step, H)
    return AreaField(B, a, "lm12")

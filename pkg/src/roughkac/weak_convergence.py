"""Statistical harness for the diffusion approximation.

Empirical characteristic functions with standard errors, the functionals
entering the characteristic-function bound for ``int f theta^eps``, moment
checks, log-log scaling fits, finite-dimensional distances and Holder-tail
probes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.stats import linregress, norm

from .errors import DataError, DomainError, InsufficientDataError, ParameterError, ToleranceError
from .fbm import volterra_from_increments, volterra_kernel
from .grid import Grid, SamplePath, holder_norm1, holder_seminorm
from .kac_stroock import check_eps, integrate_f_theta_batch, sample_poisson
from .levy_area import lm12_coefficients
from . import rng

HOLDER_NODES = 4097
HOLDER_INFLATION = 1.05


def default_u_grid(lo: float = -3.0, hi: float = 3.0, step: float = 0.25) -> np.ndarray:
    return np.round(np.arange(lo, hi + step / 2, step), 12)


def product_grid(axis: np.ndarray, dim: int) -> np.ndarray:
    """All points of ``axis^dim`` as rows of shape ``(K^dim, dim)``."""
    mesh = np.meshgrid(*([np.asarray(axis, dtype=float)] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------- characteristic functions


@dataclass
class CharFnEstimate:
    u: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    M: int


def _as_2d(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"{name} must be one- or two-dimensional")
    return x


def ecf(samples, u_grid, chunk: int = 2_000_000) -> CharFnEstimate:
    """``(1/M) sum_m exp(i u . s_m)`` with standard errors ``sqrt((1 - |phi|^2) / M)``.

    ``samples`` is ``(M,)`` or ``(M, p)``; ``u_grid`` is ``(K,)`` or ``(K, p)``.
    """
    s = _as_2d(samples, "samples")
    M = s.shape[0]
    if M == 0:
        raise InsufficientDataError("empty sample set")
    u = _as_2d(u_grid, "u_grid")
    if u.shape[1] != s.shape[1]:
        raise DataError(f"u-grid dimension {u.shape[1]} does not match sample dimension {s.shape[1]}")
    acc = np.zeros(u.shape[0], dtype=complex)
    rows = max(1, chunk // max(u.shape[0], 1))
    for lo in range(0, M, rows):
        acc += np.exp(1j * (s[lo : lo + rows] @ u.T)).sum(axis=0)
    vals = acc / M
    var = np.clip(1.0 - np.abs(vals) ** 2, 0.0, None) * (M / (M - 1) if M > 1 else 0.0)
    return CharFnEstimate(np.asarray(u_grid, dtype=float), vals, np.sqrt(var / M), M)


def fdd_distance(samples_a, samples_b, u_grid) -> float:
    """``max_u |phi_A(u) - phi_B(u)|`` of the joint empirical characteristic functions."""
    a, b = _as_2d(samples_a, "samples_a"), _as_2d(samples_b, "samples_b")
    if a.shape[1] != b.shape[1]:
        raise DataError(f"sample dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    return float(np.max(np.abs(ecf(a, u_grid).values - ecf(b, u_grid).values)))


def fdd_distance_to_cf(samples, u_grid, cf_values) -> float:
    """``max_u |phi_A(u) - cf(u)|`` against a characteristic function known on the grid."""
    return float(np.max(np.abs(ecf(samples, u_grid).values - np.asarray(cf_values))))


# ---------------------------------------------------------------- bound functionals


def _quad(fn, a, b, points=None, rtol=1e-11):
    if b <= a:
        return 0.0
    val, err = integrate.quad(fn, a, b, epsabs=1e-15, epsrel=rtol, limit=500, points=points)
    if err > max(1e-12, 1e3 * rtol * abs(val)):
        raise ToleranceError("functional quadrature failed", residual=err)
    return val


def l2_norm(f: Callable, T: float) -> float:
    return float(np.sqrt(_quad(lambda x: f(x) ** 2, 0.0, T)))


def phi_func(f: Callable, eps: float, T: float) -> float:
    """``int_0^T f(x)^2 exp(-2x / eps^2) dx``."""
    cut = min(T, 40.0 * eps**2)
    return float(_quad(lambda x: f(x) ** 2 * np.exp(-2 * x / eps**2), 0.0, cut)
                 + _quad(lambda x: f(x) ** 2 * np.exp(-2 * x / eps**2), cut, T))


def psi_func(f: Callable, eps: float, T: float) -> float:
    """``int_0^T dx int_0^x dy f(x)^2 f(y)^2 exp(-2(x - y) / eps^2)``."""
    width = 40.0 * eps**2

    def inner(x):
        lo = max(0.0, x - width)
        return _quad(lambda y: f(y) ** 2 * np.exp(-2 * (x - y) / eps**2), lo, x)

    pts = list(np.linspace(0, T, 9)[1:-1])
    return float(_quad(lambda x: f(x) ** 2 * inner(x), 0.0, T, points=pts))


def varphi_func(f: Callable, eps: float, T: float) -> float:
    """``eps ||f||_{L2} + (int_0^eps f^2)^{1/2}``."""
    if eps > T:
        raise DomainError(f"need eps <= T, got eps={eps}, T={T}")
    return float(eps * l2_norm(f, T) + np.sqrt(_quad(lambda x: f(x) ** 2, 0.0, eps)))


def c_alpha(alpha: float) -> float:
    """``int_0^inf x^alpha exp(-2x) dx = Gamma(alpha + 1) / 2^{alpha + 1}``."""
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return float(gamma_fn(alpha + 1) / 2 ** (alpha + 1))


def holder_constant(f: Callable, alpha: float, T: float, n: int = HOLDER_NODES,
                    inflation: float = HOLDER_INFLATION) -> float:
    """Grid Holder semi-norm of ``f`` on ``n`` nodes, inflated since a grid sup under-estimates."""
    g = Grid(T, n)
    return inflation * holder_norm1(SamplePath.from_function(g, f), alpha)


@dataclass
class BoundTerms:
    holder: float
    l2: float
    phi: float
    psi: float
    varphi: float
    c_alpha: float
    eps: float
    alpha: float

    def evaluate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        core = (
            self.eps ** (2 * self.alpha) * self.c_alpha * self.holder * self.l2 * u**2
            + self.phi * u**2 / 2
            + self.psi * u**4 / 8
            + self.varphi * np.abs(u) / 2
        )
        return core * np.exp(u**2 * self.l2**2 / 2)


def bound_terms(f: Callable, alpha: float, eps: float, T: float, holder: Optional[float] = None) -> BoundTerms:
    holder = holder_constant(f, alpha, T) if holder is None else holder
    return BoundTerms(holder, l2_norm(f, T), phi_func(f, eps, T), psi_func(f, eps, T), varphi_func(f, eps, T),
                      c_alpha(alpha), eps, alpha)


def bound_lm_cont2(f: Callable, alpha: float, eps: float, T: float, u, holder: Optional[float] = None):
    """Right side of the characteristic-function bound at each ``u``."""
    return bound_terms(f, alpha, eps, T, holder).evaluate(u)


# ---------------------------------------------------------------- sampling integrals against theta


def sample_f_theta(antiderivative: Callable, eps: float, T: float, M: int, seed: int, start: int = 0,
                   chunk: int = 5000) -> np.ndarray:
    """``M`` independent draws of ``int_0^T f theta^eps`` (component 0)."""
    check_eps(eps, T)
    out = np.empty(M)
    for lo in range(0, M, chunk):
        n = min(chunk, M - lo)
        prs = [sample_poisson(1, T, eps, seed, replicate=start + lo + r) for r in range(n)]
        out[lo : lo + n] = integrate_f_theta_batch(prs, 0, antiderivative, 0.0, T)
    return out


@dataclass
class BoundReport:
    u: np.ndarray
    distance: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    terms: BoundTerms
    M: int

    @property
    def passed_per_u(self) -> np.ndarray:
        return self.distance <= self.bound + 3 * self.stderr

    @property
    def passed(self) -> bool:
        return bool(np.all(self.passed_per_u))

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distance))


def cf_distance_check(f: Callable, alpha: float, eps: float, T: float, u_grid, M: int, seed: int,
                      antiderivative: Optional[Callable] = None, samples=None, holder=None) -> BoundReport:
    """Empirical ``|E e^{iu int f theta} - exp(-u^2 ||f||^2 / 2)|`` against the bound."""
    u = np.asarray(u_grid, dtype=float)
    if samples is None:
        if antiderivative is None:
            raise ParameterError("an antiderivative of f is needed to sample the integrals")
        samples = sample_f_theta(antiderivative, eps, T, M, seed)
    est = ecf(samples, u)
    terms = bound_terms(f, alpha, eps, T, holder)
    gauss = np.exp(-(u**2) * terms.l2**2 / 2)
    return BoundReport(u, np.abs(est.values - gauss), est.stderr, terms.evaluate(u), terms, len(samples))


# ---------------------------------------------------------------- moments


def even_moment_bound(m: int, l2: float) -> float:
    """``(2m)! / (2^m m!) ||f||^{2m}``."""
    return factorial(2 * m) / (2**m * factorial(m)) * l2 ** (2 * m)


def odd_moment_bound(m: int, l2: float, varphi: float) -> float:
    """``varphi_f(eps) (2m+1)! / (2^{m+1} m!) ||f||^{2m}``."""
    return varphi * factorial(2 * m + 1) / (2 ** (m + 1) * factorial(m)) * l2 ** (2 * m)


@dataclass
class MomentCheck:
    order: int
    estimate: float
    stderr: float
    bound: float

    @property
    def passed(self) -> bool:
        return abs(self.estimate) <= self.bound + 3 * self.stderr


def moment_checks(samples: np.ndarray, f: Callable, eps: float, T: float, even=(1, 2), odd=(0, 1)):
    """Empirical moments of ``int f theta^eps`` against the even and odd bounds."""
    s = np.asarray(samples, dtype=float)
    l2 = l2_norm(f, T)
    vp = varphi_func(f, eps, T)
    out = []
    for m, p, bound in [(m, 2 * m, even_moment_bound(m, l2)) for m in even] + [
        (m, 2 * m + 1, odd_moment_bound(m, l2, vp)) for m in odd
    ]:
        x = s**p
        out.append(MomentCheck(p, float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size)), bound))
    return out


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    moments: np.ndarray
    lags: np.ndarray


def moment_slope(samples, lags) -> SlopeFit:
    """OLS slope of ``log E[m]`` on ``log lag``.

    ``samples`` is a mapping ``lag -> replicate values`` (for instance squared
    increments) or a sequence aligned with ``lags``; scalar entries are used
    as exact moments.
    """
    lags = np.asarray(lags, dtype=float)
    if lags.size < 3:
        raise InsufficientDataError(f"need at least 3 lags, got {lags.size}")
    if isinstance(samples, dict):
        samples = [samples[k] for k in lags]
    moments = np.array([np.mean(np.asarray(v, dtype=float)) for v in samples])
    if moments.size != lags.size or np.any(moments <= 0):
        raise DataError("need one positive moment per lag")
    fit = linregress(np.log(lags), np.log(moments))
    return SlopeFit(float(fit.slope), float(fit.stderr), float(fit.intercept), moments, lags)


# ---------------------------------------------------------------- Holder tails


@dataclass
class TailEstimate:
    A: np.ndarray
    prob: np.ndarray
    stderr: np.ndarray
    norms: np.ndarray = field(repr=False)


def holder_tail(paths, gamma: float, A_grid, step: Optional[float] = None, min_batch: int = 100) -> TailEstimate:
    """Empirical ``P[||path||_gamma > A]`` with binomial standard errors.

    ``paths`` is a list of :class:`SamplePath` or an array ``(M, n, d)``
    together with ``step``.
    """
    if isinstance(paths, (list, tuple)):
        if not paths:
            raise InsufficientDataError("empty batch")
        step = paths[0].grid.step
        values = np.stack([p.values for p in paths])
    else:
        values = np.asarray(paths, dtype=float)
        if step is None:
            raise ParameterError("step is required for array input")
    if values.shape[0] < min_batch:
        raise InsufficientDataError(f"need at least {min_batch} paths, got {values.shape[0]}")
    norms = holder_seminorm(values, step, gamma)
    A = np.asarray(A_grid, dtype=float)
    prob = (norms[:, None] > A[None, :]).mean(axis=0)
    return TailEstimate(A, prob, np.sqrt(prob * (1 - prob) / norms.size), norms)


@dataclass
class TrendTest:
    z: np.ndarray
    threshold: float
    passed: bool


def tail_trend_test(tails: Sequence[TailEstimate], level: float = 0.01) -> TrendTest:
    """One-sided test for an upward trend as ``eps`` decreases.

    ``tails`` is ordered by decreasing ``eps``. For each consecutive pair and
    each ``A`` the pooled two-proportion z statistic of ``p_next - p_prev`` is
    formed; the trend is rejected (pass) unless the largest statistic
    exceeds the Bonferroni-corrected one-sided ``level`` quantile.
    """
    zs = []
    for a, b in zip(tails[:-1], tails[1:]):
        na, nb = a.norms.size, b.norms.size
        pooled = (a.prob * na + b.prob * nb) / (na + nb)
        se = np.sqrt(pooled * (1 - pooled) * (1 / na + 1 / nb))
        diff = b.prob - a.prob
        zs.append(np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0)))
    z = np.array(zs)
    thr = float(norm.ppf(1 - level / max(z.size, 1)))
    return TrendTest(z, thr, bool(np.all(z <= thr)))


# ---------------------------------------------------------------- reference law of (B_1, B2_01(1,2))


def rb_reference_cf(u_grid, H: float, n_cells: int, M: int, seed: int, T: float = 1.0, chunk: int = 500):
    """Characteristic function of ``(B^1_T, B2_{0T}(1, 2))`` on a 2-d ``u_grid``.

    Given ``W^2`` the pair is linear in the independent ``W^1``, hence
    centred Gaussian; its conditional characteristic function is explicit
    and only the average over ``W^2`` is taken by Monte Carlo. Returns
    ``(values, stderr)``.
    """
    u = _as_2d(u_grid, "u_grid")
    if u.shape[1] != 2:
        raise DataError("the reference pair is two-dimensional")
    h = T / n_cells
    g = volterra_kernel(h, n_cells, H)[::-1]  # weight of cell k in B_T
    acc = np.zeros(u.shape[0])
    acc2 = np.zeros(u.shape[0])
    for lo in range(0, M, chunk):
        n = min(chunk, M - lo)
        dW2 = np.stack([rng.generator(seed, rng.WIENER, lo + r, 1).standard_normal(n_cells) for r in range(n)])
        dW2 *= np.sqrt(h)
        B2 = volterra_from_increments(dW2[..., None], h, H)[..., 0]
        c = lm12_coefficients(B2, h, H, 0, n_cells)
        G = h * np.dot(g, g)
        GC = h * (c @ g)
        CC = h * np.einsum("mk,mk->m", c, c)
        q = np.outer(np.ones(n), u[:, 0] ** 2 * G) + np.outer(GC, 2 * u[:, 0] * u[:, 1]) + np.outer(CC, u[:, 1] ** 2)
        v = np.exp(-0.5 * q)
        acc += v.sum(axis=0)
        acc2 += (v * v).sum(axis=0)
    mean = acc / M
    var = np.clip(acc2 / M - mean**2, 0, None) * M / max(M - 1, 1)
    return mean, np.sqrt(var / M)


def tail_envelope_test(tails: Sequence[TailEstimate], limit: TailEstimate, level: float = 0.01) -> TrendTest:
    """Uniform-in-eps bound: no tail may significantly exceed the limit's tail.

    One-sided two-proportion z statistics of ``p_eps(A) - p_limit(A)`` with a
    Bonferroni correction over all ``(eps, A)`` pairs.
    """
    zs = []
    for t in tails:
        n1, n2 = t.norms.size, limit.norms.size
        pooled = (t.prob * n1 + limit.prob * n2) / (n1 + n2)
        se = np.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
        diff = t.prob - limit.prob
        zs.append(np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(diff > 0, np.inf, 0.0)))
    z = np.array(zs)
    thr = float(norm.ppf(1 - level / max(z.size, 1)))
    return TrendTest(z, thr, bool(np.all(z <= thr)))

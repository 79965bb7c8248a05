"""Exponential-sum representation of the shifted Volterra kernel, and a
batched telegraph engine built on it.

For ``x in [0, T]`` the kernel ``k(x) = (x + eps)^{H-1/2}`` is smooth, and the
Gamma-integral identity

    z^{-a} = Gamma(a)^{-1} int_R exp(a s - e^s z) ds,   a = 1/2 - H,

discretised by the trapezoid rule in ``s`` gives ``k(x) ~ sum_l w_l exp(-lam_l x)``.
With that form ``Y_l(t) = int_0^t exp(-lam_l (t - r)) theta(r) dr`` obeys an
exact one-step recursion while ``theta`` is constant, so ``X^eps`` and its
derivative cost O(L) per evaluation instead of O(#jumps).

The exact closed forms in :mod:`roughkac.kac_stroock` stay the reference;
:func:`ExpSumKernel.max_rel_error` certifies the fit on a dense grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import ParameterError, ToleranceError
from .kac_stroock import check_hurst


@dataclass(frozen=True)
class ExpSumKernel:
    """``(x + eps)^{H-1/2} ~ sum_l weights[l] * exp(-rates[l] * x)`` on ``[0, T]``."""

    H: float
    eps: float
    T: float
    rates: np.ndarray
    weights: np.ndarray

    @classmethod
    def fit(cls, H: float, eps: float, T: float, rtol: float = 1e-9, step: float = 0.6, max_halvings: int = 12):
        check_hurst(H)
        a = 0.5 - H
        for _ in range(max_halvings + 1):
            k = cls._build(H, eps, T, a, step, rtol)
            if max(k.max_rel_error()) <= rtol:
                return k
            step *= 0.8
        raise ToleranceError("exponential-sum fit did not reach tolerance", residual=max(k.max_rel_error()))

    @classmethod
    def _build(cls, H, eps, T, a, step, rtol):
        s_hi = np.log(45.0 / eps)
        # modes slower than this are lumped into one tail mode
        s_lo = np.log(min(rtol, 1e-6) ** 0.5 / (T + eps))
        s = s_hi - step * np.arange(int(np.ceil((s_hi - s_lo) / step)) + 1)
        lam = np.exp(s)
        g = gamma_fn(a)
        w = step * np.exp(a * s - lam * eps) / g
        # geometric tail of the trapezoid sum below s[-1], matched to first order in z
        s_next = s[-1] - step
        w0 = step * np.exp(a * s_next) / (-np.expm1(-a * step)) / g
        m1 = step * np.exp((1 + a) * s_next) / (-np.expm1(-(1 + a) * step)) / g
        lam0 = m1 / w0
        rates = np.concatenate((lam, [lam0]))
        weights = np.concatenate((w, [w0 * np.exp(-lam0 * eps)]))
        return cls(H, eps, T, rates, weights)

    @property
    def size(self) -> int:
        return self.rates.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.multiply.outer(x, self.rates)) @ self.weights

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -np.exp(-np.multiply.outer(x, self.rates)) @ (self.weights * self.rates)

    def max_rel_error(self, n: int = 4001):
        """Max relative error of the kernel and of its derivative on ``[0, T]``."""
        x = np.concatenate((np.linspace(0, self.T, n), self.eps * np.geomspace(1e-4, 10, 200)))
        x = x[x <= self.T]
        beta = self.H - 0.5
        k = (x + self.eps) ** beta
        dk = beta * (x + self.eps) ** (beta - 1)
        return (
            float(np.max(np.abs(self(x) - k) / k)),
            float(np.max(np.abs(self.derivative(x) - dk) / np.abs(dk))),
        )


def step_schedule(realizations, record_times: np.ndarray, max_step: float):
    """Per-replicate step times merging record nodes, substeps and sign changes.

    Returns ``times`` (M, K+1), ``signs`` (M, K, d) for each step and
    ``slot`` (M, K+1) giving the record index of each time (-1 if none).
    Short schedules are padded with zero-length steps at ``T``.
    """
    T = float(record_times[-1])
    n_sub = int(np.ceil(T / max_step))
    base = np.union1d(record_times, np.linspace(0.0, T, n_sub + 1))
    rows, sign_rows, slot_rows = [], [], []
    for pr in realizations:
        if not np.isclose(pr.T, T) and pr.T < T:
            raise ParameterError("realization horizon shorter than the record grid")
        taus = [pr.switch_times(i) for i in range(pr.dim)]
        inner = np.concatenate([t[t < T] for t in taus]) if taus else np.zeros(0)
        times = np.union1d(base, inner)
        left = times[:-1]
        sg = np.stack(
            [np.where(np.searchsorted(t, left, side="right") % 2 == 0, 1.0, -1.0) for t in taus], axis=-1
        )
        slot = np.full(times.size, -1)
        slot[np.searchsorted(times, record_times)] = np.arange(record_times.size)
        rows.append(times)
        sign_rows.append(sg)
        slot_rows.append(slot)
    K = max(r.size for r in rows) - 1
    M, d = len(rows), realizations[0].dim
    times = np.full((M, K + 1), T)
    signs = np.ones((M, K, d))
    slots = np.full((M, K + 1), -1)
    for m, (t, sg, sl) in enumerate(zip(rows, sign_rows, slot_rows)):
        times[m, : t.size] = t
        signs[m, : sg.shape[0]] = sg
        slots[m, : sl.size] = sl
    return times, signs, slots


def run_telegraph_batch(realizations, kernel: ExpSumKernel, record_times, max_step, vf=None, y0=None, areas=True):
    """March ``X^eps`` (and optionally ``y^eps`` and anchored areas) over a batch.

    Within each step every ``theta`` is constant, so the exponential states
    advance exactly; ``y`` uses classical RK4 and the areas
    ``int_0^t X^j dX^i`` use the matching Simpson rule. Returns a dict with
    ``X`` (M, R, d), ``area`` (M, R, d, d) and ``y`` (M, R, n) at the record
    times.
    """
    record_times = np.asarray(record_times, dtype=float)
    eps = realizations[0].eps
    times, signs, slots = step_schedule(realizations, record_times, max_step)
    M, K = signs.shape[0], signs.shape[1]
    d = signs.shape[2]
    R = record_times.size
    lam, w = kernel.rates, kernel.weights
    lw = lam * w
    wsum = w.sum()
    Y = np.zeros((M, d, lam.size))
    X_rec = np.zeros((M, R, d))
    A = np.zeros((M, d, d))
    A_rec = np.zeros((M, R, d, d)) if areas else None
    y = None
    y_rec = None
    if vf is not None:
        y = np.broadcast_to(np.asarray(y0, dtype=float), (M, len(np.atleast_1d(y0)))).copy()
        y_rec = np.zeros((M, R, y.shape[1]))
        y_rec[:, 0] = y
    rows = np.arange(M)
    for k in range(K):
        h = times[:, k + 1] - times[:, k]
        th = signs[:, k, :] / eps
        E_half = np.exp(-np.multiply.outer(0.5 * h, lam))
        G_half = -np.expm1(-np.multiply.outer(0.5 * h, lam)) / lam
        E_full = E_half * E_half
        G_full = G_half * (1.0 + E_half)
        Y_half = Y * E_half[:, None, :] + th[:, :, None] * G_half[:, None, :]
        Y_full = Y * E_full[:, None, :] + th[:, :, None] * G_full[:, None, :]
        v0 = th * wsum - Y @ lw
        vh = th * wsum - Y_half @ lw
        v1 = th * wsum - Y_full @ lw
        if areas:
            x0 = Y @ w
            xh = Y_half @ w
            x1 = Y_full @ w
            A += (h / 6.0)[:, None, None] * (
                v0[:, :, None] * x0[:, None, :] + 4.0 * vh[:, :, None] * xh[:, None, :] + v1[:, :, None] * x1[:, None, :]
            )
        if vf is not None:
            y = rk4_step(vf, y, h, v0, vh, v1)
        Y = Y_full
        sl = slots[:, k + 1]
        hit = sl >= 0
        if hit.any():
            r_idx, s_idx = rows[hit], sl[hit]
            X_rec[r_idx, s_idx] = Y[hit] @ w
            if areas:
                A_rec[r_idx, s_idx] = A[hit]
            if vf is not None:
                y_rec[r_idx, s_idx] = y[hit]
    return {"X": X_rec, "area": A_rec, "y": y_rec, "steps": K}


def rk4_step(vf, y, h, v0, vh, v1):
    """One RK4 step of ``y' = sigma(y) v(t) + b(y)`` with driver-derivative
    samples at the start, midpoint and (left limit at the) end of the step.
    ``h`` may be a scalar or one value per batch row."""
    h = np.asarray(h, dtype=float)
    hc = h[..., None] if h.ndim else h

    def F(yy, v):
        return np.einsum("...kd,...d->...k", vf.sigma(yy), v) + vf.b(yy)

    k1 = F(y, v0)
    k2 = F(y + 0.5 * hc * k1, vh)
    k3 = F(y + 0.5 * hc * k2, vh)
    k4 = F(y + hc * k3, v1)
    return y + hc / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def telegraph_monte_carlo(d: int, H: float, eps: float, T: float, M: int, seed: int, record_times, max_step=None,
                          vf=None, y0=None, areas: bool = True, chunk: int = 500, threads: int = 1, rtol: float = 1e-9):
    """Run :func:`run_telegraph_batch` over replicates ``0..M-1`` in fixed chunks.

    Replicate ``r`` always uses the Poisson substreams ``(seed, r, i)``, so
    the output is independent of ``chunk`` boundaries and of ``threads``.
    """
    from .kac_stroock import sample_poisson_batch
    from .parallel import chunks, map_ordered

    kernel = ExpSumKernel.fit(H, eps, T, rtol=rtol)
    max_step = eps**2 / 4 if max_step is None else max_step
    record_times = np.asarray(record_times, dtype=float)

    def work(item):
        lo, n = item
        prs = sample_poisson_batch(d, T, eps, seed, n, start=lo)
        return run_telegraph_batch(prs, kernel, record_times, max_step, vf=vf, y0=y0, areas=areas)

    parts = map_ordered(work, chunks(M, chunk), threads)
    out = {}
    for key in ("X", "area", "y"):
        vals = [p[key] for p in parts]
        out[key] = None if vals[0] is None else np.concatenate(vals)
    return out

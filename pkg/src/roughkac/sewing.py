"""Sewing of almost-additive germs by dyadic Riemann sums.

For a germ ``g`` whose defect ``g_st - g_su - g_ut`` is ``O(|t-s|^mu)`` with
``mu > 1`` the sums ``S_n`` over ``2^n`` equal pieces converge to the sewn
integral and consecutive differences ``D_n = S_n - S_{n-1}`` shrink by the
factor ``2^{1-mu}``. Because that ratio is observable, the geometric tail
``D_n r / (1 - r)`` can be added back (Richardson extrapolation), which
reaches tight tolerances with far fewer levels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np

from .errors import DomainError, OrderingError, ParameterError, RegularityError

MU_FLOOR = 1.0 + 1e-6


@dataclass(frozen=True)
class Germ:
    """``fn(s, t)`` evaluated on arrays of left and right endpoints.

    ``mu`` is the claimed regularity of the defect.
    """

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    mu: float = 2.0

    def __post_init__(self):
        if not self.mu > 1:
            raise ParameterError(f"germ regularity must exceed 1, got mu={self.mu}")

    def __call__(self, s, t):
        return np.asarray(self.fn(np.asarray(s, dtype=float), np.asarray(t, dtype=float)), dtype=float)


@dataclass
class SewResult:
    value: np.ndarray
    error: float
    levels: int
    sums: List = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    extrapolated: bool = True

    @property
    def last_ratio(self) -> float:
        return self.ratios[-1] if self.ratios else float("nan")


def _norm(x) -> float:
    return float(np.sqrt(np.sum(np.square(x))))


def dyadic_sum(germ: Germ, s: float, t: float, level: int):
    nodes = np.linspace(s, t, 2**level + 1)
    return np.sum(germ(nodes[:-1], nodes[1:]), axis=0)


def sew(germ: Germ, s: float, t: float, tol: float = 1e-10, max_levels: int = 22, min_levels: int = 3,
        extrapolate: bool = True) -> SewResult:
    """Limit of the dyadic sums of ``germ`` over ``[s, t]``.

    Stops once the change between consecutive estimates is below ``tol``
    (the reported error). With ``extrapolate`` the estimate at level ``n``
    is ``S_n + D_n r_n / (1 - r_n)`` with the observed ratio
    ``r_n = |D_n| / |D_{n-1}|``; otherwise it is ``S_n``.

    Raises :class:`RegularityError` if the observed ratio stays at or above
    1 for three consecutive levels.
    """
    if s > t:
        raise OrderingError(f"need s <= t, got s={s}, t={t}")
    S = [dyadic_sum(germ, s, t, 0)]
    if s == t:
        return SewResult(S[0] * 0.0, 0.0, 0, S, [], extrapolate)
    ratios: List[float] = []
    estimates = [S[0]]
    bad = 0
    for n in range(1, max_levels + 1):
        S.append(dyadic_sum(germ, s, t, n))
        D = S[-1] - S[-2]
        dn = _norm(D)
        if dn == 0.0:
            return SewResult(S[-1], 0.0, n, S, ratios, False)
        if n >= 2:
            dprev = _norm(S[-2] - S[-3])
            r = dn / dprev if dprev > 0 else np.inf
            ratios.append(r)
            bad = bad + 1 if r >= 1 else 0
            if bad >= 3:
                raise RegularityError(f"dyadic sums do not contract (observed ratio {r:.4g})", ratio=r)
        if extrapolate and len(ratios) >= 1 and ratios[-1] < 1:
            r = ratios[-1]
            est = S[-1] + D * r / (1.0 - r)
        else:
            est = S[-1]
        err = _norm(est - estimates[-1])
        estimates.append(est)
        if n >= min_levels and err < tol:
            return SewResult(est, err, n, S, ratios, extrapolate)
    return SewResult(estimates[-1], err, max_levels, S, ratios, extrapolate)


def lambda_error_budget(mu: float) -> float:
    """``1 / (2^mu - 2)``: norm bound of the sewing map on defects of order ``mu``."""
    if not mu > MU_FLOOR:
        raise DomainError(f"the sewing constant diverges as mu -> 1; need mu > {MU_FLOOR}, got {mu}")
    return 1.0 / (2.0**mu - 2.0)


def young_germ(f: Callable, h: Callable, mu: float = 2.0) -> Germ:
    """``g_st = f(s) (h(t) - h(s))``."""
    return Germ(lambda s, t: f(s) * (h(t) - h(s)), mu)

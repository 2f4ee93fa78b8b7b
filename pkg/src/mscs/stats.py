"""Chi-square numerics and the scalar diagnostics used by the detectability check.

The regularized incomplete gamma function uses the usual split: power series
for x < a + 1, Lentz continued fraction otherwise. Both return log values so
tail probabilities far below the double-precision floor keep their ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

_EPS = 1e-15
_TINY = 1e-300
_MAX_TERMS = 10_000
_POISSON_TAIL = 1e-14


@dataclass(frozen=True)
class ChiSqSpec:
    df: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if self.df < 0 or self.noncentrality < 0:
            raise ValueError("df and noncentrality must be non-negative")


def _log_prefactor(a: float, x: float) -> float:
    return a * math.log(x) - x - math.lgamma(a)


def _series(a: float, x: float) -> float:
    # sum_{n>=0} x^n / (a (a+1) ... (a+n)), times a
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total


def _continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of Q(a, x) / prefactor
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def log_gammainc_pair(a: float, x: float) -> tuple[float, float]:
    """(log P(a, x), log Q(a, x)) for a > 0, x >= 0."""
    if x <= 0.0:
        return -math.inf, 0.0
    lp = _log_prefactor(a, x)
    if x < a + 1.0:
        log_p = lp + math.log(_series(a, x))
        p = math.exp(log_p)
        log_q = math.log1p(-p) if p < 1.0 else -math.inf
        return log_p, log_q
    log_q = lp + math.log(_continued_fraction(a, x))
    q = math.exp(log_q)
    log_p = math.log1p(-q) if q < 1.0 else -math.inf
    return log_p, log_q


def _central_logcdf_logsf(x: float, df: float) -> tuple[float, float]:
    if df == 0:
        return (0.0, -math.inf) if x >= 0 else (-math.inf, 0.0)
    if x <= 0:
        return -math.inf, 0.0
    return log_gammainc_pair(df / 2.0, x / 2.0)


def _poisson_weights(lam: float):
    """Yield (m, weight) around the mode until both tails are below tolerance."""
    mode = int(math.floor(lam))
    log_mode = -lam + mode * math.log(lam) - math.lgamma(mode + 1) if lam > 0 else 0.0
    yield mode, math.exp(log_mode)
    w = math.exp(log_mode)
    m = mode
    while True:
        m += 1
        w *= lam / m
        yield m, w
        if w < _POISSON_TAIL and m > lam:
            break
    w = math.exp(log_mode)
    m = mode
    while m > 0:
        w *= m / lam
        m -= 1
        yield m, w
        if w < _POISSON_TAIL:
            break


def chi2_cdf(x: float, df: int | ChiSqSpec, noncentrality: float = 0.0) -> float:
    """P(X <= x) for a (noncentral) chi-square variable.

    ``df`` may be a :class:`ChiSqSpec`. The noncentral case is the Poisson
    mixture of central laws with df + 2m degrees of freedom.
    """
    if isinstance(df, ChiSqSpec):
        df, noncentrality = df.df, df.noncentrality
    if x < 0:
        return 0.0
    if noncentrality == 0.0:
        return math.exp(_central_logcdf_logsf(x, df)[0])
    total = 0.0
    for m, w in _poisson_weights(noncentrality / 2.0):
        total += w * math.exp(_central_logcdf_logsf(x, df + 2 * m)[0])
    return min(total, 1.0)


def chi2_sf(x: float, df: int | ChiSqSpec, noncentrality: float = 0.0) -> float:
    """Upper tail P(X > x), computed directly rather than as 1 - cdf."""
    if isinstance(df, ChiSqSpec):
        df, noncentrality = df.df, df.noncentrality
    if noncentrality == 0.0:
        return math.exp(chi2_logsf(x, df))
    if x < 0:
        return 1.0
    total = 0.0
    for m, w in _poisson_weights(noncentrality / 2.0):
        total += w * math.exp(_central_logcdf_logsf(x, df + 2 * m)[1])
    return min(total, 1.0)


def chi2_logsf(x: float, df: int) -> float:
    """log P(X > x) for a central chi-square; finite far below 1e-308."""
    return _central_logcdf_logsf(x, df)[1]


def _chi2_logpdf(x: float, df: int) -> float:
    k = df / 2.0
    return (k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - math.lgamma(k)


def chi2_quantile(alpha: float, df: int) -> float:
    """Upper alpha-quantile q with P(X > q) = alpha.

    df = 0 returns 0, so a model with no missing parameters is never rejected.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if df == 0:
        return 0.0
    target = 1.0 - alpha

    def resid(q):
        # compare on the tail that is numerically better resolved
        if alpha < 0.5:
            return alpha - chi2_sf(q, df)
        return chi2_cdf(q, df) - target

    # Wilson-Hilferty start, then bracket
    z = _normal_upper_quantile(alpha)
    h = 2.0 / (9.0 * df)
    q = max(df * (1.0 - h + z * math.sqrt(h)) ** 3, 1e-8)
    lo, hi = 0.0, q
    while resid(hi) < 0:
        lo = hi
        hi *= 2.0
    f = resid(q)
    for _ in range(200):
        if f < 0:
            lo = q
        else:
            hi = q
        dens = math.exp(_chi2_logpdf(q, df)) if q > 0 else 0.0
        step = f / dens if dens > 0 else math.inf
        nq = q - step
        if not lo < nq < hi:
            nq = 0.5 * (lo + hi)
        if abs(nq - q) <= 1e-15 * max(1.0, q) or hi - lo <= 1e-15 * max(1.0, hi):
            q = nq
            break
        q = nq
        f = resid(q)
    return q


def _normal_upper_quantile(alpha: float) -> float:
    # only a starting value; bisection/Newton refines it
    return math.sqrt(2.0) * _erfinv(1.0 - 2.0 * alpha)


def _erfinv(y: float) -> float:
    a = 0.147
    ln = math.log(1.0 - y * y)
    t = 2.0 / (math.pi * a) + ln / 2.0
    return math.copysign(math.sqrt(math.sqrt(t * t - ln / a) - t), y)


def kn(s: int, p: int) -> float:
    """Multiplicity rate s * log(p / s)."""
    if not 1 <= s <= p:
        raise ValueError(f"need 1 <= s <= p, got s={s}, p={p}")
    return s * math.log(p / s)


def noncentrality(theta_star, theta_star_gamma, fisher) -> float:
    """Quadratic form (theta_gamma - theta)^T F (theta_gamma - theta).

    ``fisher`` is the total information (already multiplied by n).
    """
    theta_star = np.asarray(theta_star, dtype=float)
    theta_gamma = np.asarray(theta_star_gamma, dtype=float)
    fisher = np.asarray(fisher, dtype=float)
    if theta_gamma.shape != theta_star.shape or fisher.shape != (theta_star.size,) * 2:
        raise DimensionMismatch(
            f"theta {theta_star.shape}, theta_gamma {theta_gamma.shape}, fisher {fisher.shape}"
        )
    diff = theta_gamma - theta_star
    return float(diff @ fisher @ diff)

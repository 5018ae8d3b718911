"""Gaussian special functions and the exact-level tail evaluator.

The tail of ``sum a_n |xi_n|`` for i.i.d. ``N(alpha, beta^2)`` terms is
asymptotically an infinite product of per-term factors ``eps_hat`` times a
single Gaussian tail.  Everything is accumulated in log space: the factors
tend to one while the Gaussian tail underflows long before the thresholds
of interest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .errors import BadExponentError, NonconvergedError, ThresholdTooSmallError
from .seqspec import MAX_TERMS, SequenceSpec

_SQRT2 = math.sqrt(2.0)
_LOG_HALF = math.log(0.5)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianParams:
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def y(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class LogProb:
    value: float
    method: str
    n_terms: int = 0
    tail_correction: float = 0.0
    tail_halfwidth: float = 0.0

    def __post_init__(self):
        if self.value > 0:
            raise ValueError("log-probability must be <= 0")


def phi_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def phi_cdf(x):
    """Standard normal distribution function."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def mills_ratio(x):
    """``(1 - Phi(x)) / phi(x)``, stable for large positive ``x``."""
    return math.sqrt(math.pi / 2.0) * erfcx(np.asarray(x, dtype=float) / _SQRT2)


def log_one_minus_phi(x):
    """``log(1 - Phi(x))`` without underflow for large ``x``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        pos = _LOG_HALF + np.log(erfcx(np.abs(x) / _SQRT2)) - 0.5 * x * x
        neg = np.log(0.5 * erfc(x / _SQRT2))
    out = np.where(x > 0, pos, neg)
    return out if out.ndim else float(out)


def log_phi(x):
    """``log Phi(x)``."""
    return log_one_minus_phi(-np.asarray(x, dtype=float))


def eps_hat(x, y):
    """``Phi(x + |y|) + exp(-2 x |y|) Phi(x - |y|)``."""
    x = np.asarray(x, dtype=float)
    ya = abs(float(y))
    out = phi_cdf(x + ya) + np.exp(-2.0 * x * ya) * phi_cdf(x - ya)
    return out if out.ndim else float(out)


def log_eps_hat(x, y):
    x = np.asarray(x, dtype=float)
    ya = abs(float(y))
    out = np.logaddexp(log_phi(x + ya), -2.0 * x * ya + log_phi(x - ya))
    return out if out.ndim else float(out)


def eps_hat_slope(y: float) -> float:
    """Derivative of ``log eps_hat(x, y)`` at ``x = 0``."""
    ya = abs(y)
    return 2.0 * float(phi_pdf(ya)) - 2.0 * ya * float(phi_cdf(-ya))


def _curvature_bound(x: float, y: float) -> float:
    # |d^2/dx^2 log eps_hat| <= Var of the tilted folded normal + 1, and the
    # variance is bounded by the untilted second moment of exp(x|xi|)*xi^2.
    ya = abs(y)
    return 2.0 * math.exp(0.5 * x * x + ya * x) * ((ya + x) ** 2 + 1.0)


def _tail_interval(spec: SequenceSpec, N: int, X: float, y: float):
    """Certified interval for ``sum_{n>N} log eps_hat(X a_n, y)``."""
    k = eps_hat_slope(y)
    t1_lo, t1_hi = spec.tail_bounds(N, 1.0)
    _, t2_hi = spec.tail_bounds(N, 2.0)
    sup_a = min(spec.max_term_beyond(N), math.sqrt(t2_hi))
    err = 0.5 * _curvature_bound(X * sup_a, y) * X * X * t2_hi
    return k * X * t1_lo - err, k * X * t1_hi + err


def _log_head(spec: SequenceSpec, N: int, X: float, y: float) -> float:
    total = 0.0
    chunk = 1 << 20
    for start in range(1, N + 1, chunk):
        n = np.arange(start, min(N, start + chunk - 1) + 1)
        total += float(np.sum(log_eps_hat(X * spec.terms(n), y)))
    return total


def lifshits_log_tail(
    spec: SequenceSpec, params: GaussianParams, r: float, tol: float = 1e-10
) -> LogProb:
    """Log of the exact-level asymptotic form of ``P{sum a_n |xi_n| >= r}``.

    The infinite product is truncated at the smallest power-of-two-refined
    ``N`` whose certified tail interval has half-width at most ``tol``; the
    returned value uses the interval midpoint, so it is within ``tol`` of the
    full product.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    s1 = spec.power_sum(1.0)
    l2sq = spec.power_sum(2.0)
    shift = r - abs(params.alpha) * s1
    if not shift > 0:
        raise ThresholdTooSmallError(
            f"threshold {r} does not exceed |alpha| * sum a_n = {abs(params.alpha) * s1}"
        )
    X = shift / (l2sq * params.beta)
    y = params.y
    log_gauss = float(log_one_minus_phi(shift / (math.sqrt(l2sq) * params.beta)))

    if spec.length is not None:
        N = spec.length
        mid, hw = 0.0, 0.0
    else:

        def halfwidth(n):
            lo, hi = _tail_interval(spec, n, X, y)
            return 0.5 * (hi - lo)

        hi_n = 16
        while halfwidth(hi_n) > tol:
            hi_n *= 2
            if hi_n > MAX_TERMS:
                raise NonconvergedError("product tail does not reach tol within term cap")
        lo_n = hi_n // 2
        while hi_n - lo_n > 1:
            m = (lo_n + hi_n) // 2
            if halfwidth(m) <= tol:
                hi_n = m
            else:
                lo_n = m
        N = hi_n
        lo, hi = _tail_interval(spec, N, X, y)
        mid, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)

    value = _log_head(spec, N, X, y) + mid + log_gauss
    return LogProb(
        value=min(value, 0.0),
        method="lifshits_asymptotic",
        n_terms=N,
        tail_correction=mid,
        tail_halfwidth=hw,
    )


def scaled_threshold(spec: SequenceSpec, params: GaussianParams, r: float) -> float:
    """``r ||a||_2 beta + |alpha| sum a_n``."""
    return r * spec.norm(2.0) * params.beta + abs(params.alpha) * spec.power_sum(1.0)


def sigma_p(spec: SequenceSpec, beta: float, p: float) -> float:
    """``(sum a_n^(m/p))^(1/m) * beta`` with ``m = 2p / (2 - p)``."""
    if not 1.0 <= p < 2.0:
        raise BadExponentError(f"p must lie in [1, 2), got {p}")
    m = 2.0 * p / (2.0 - p)
    return spec.power_sum(m / p) ** (1.0 / m) * beta


def scaled_threshold_p(
    spec: SequenceSpec, params: GaussianParams, r: float, p: float
) -> float:
    """``(r sigma_a + |alpha| sum a_n^(1/p))^p`` for ``1 <= p < 2``."""
    sig = sigma_p(spec, params.beta, p)
    shift = abs(params.alpha) * spec.power_sum(1.0 / p) if params.alpha else 0.0
    return (r * sig + shift) ** p

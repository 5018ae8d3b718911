"""Logarithmic-level tail asymptotics.

For i.i.d. ``|xi_n|`` with ``log P{|xi| >= u} ~ -c u^p`` the tail of
``sum a_n |xi_n|`` satisfies ``log P{S >= r} ~ -c r^p ||a||_q^{-p}`` with
``1/p + 1/q = 1``.  The constant comes from a constrained rate infimum with
one-sided power costs, solved here on finite weight vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize

from .errors import (
    ConfigError,
    HypothesisViolatedError,
    InfeasibleError,
    NonconvergedError,
)
from .laws import TailLaw, power_transform  # noqa: F401  (re-exported)
from .seqspec import SequenceSpec


def conjugate(p: float) -> float:
    return math.inf if p == 1 else p / (p - 1.0)


def psi(t, c1: float, c2: float, p: float):
    """One-sided power cost: ``c1 |t|^p`` for ``t < 0``, ``c2 t^p`` for ``t > 0``."""
    if p < 1:
        raise ConfigError("p must be >= 1")
    t = np.asarray(t, dtype=float)
    with np.errstate(invalid="ignore"):
        a = np.abs(t) ** p
        out = np.where(t < 0, c1 * a, np.where(t > 0, c2 * a, 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RateProblem:
    x: tuple[float, ...]
    c1: float
    c2: float
    p: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if self.p < 1:
            raise ConfigError("p must be >= 1")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ConfigError("costs must be positive")
        if math.isinf(self.c1) and math.isinf(self.c2):
            raise ConfigError("at least one cost must be finite")
        if not any(self.x):
            raise ConfigError("at least one weight must be non-zero")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RateProblem":
        def cost(v):
            return math.inf if v in (None, "inf", "Infinity") else float(v)

        return cls(tuple(d["x"]), cost(d.get("c1")), cost(d.get("c2")), float(d["p"]), float(d["z"]))

    def to_dict(self) -> dict[str, Any]:
        return {"x": list(self.x), "c1": self.c1, "c2": self.c2, "p": self.p, "z": self.z}


@dataclass(frozen=True)
class RateResult:
    value: float
    u: np.ndarray = field(repr=False)
    multiplier: float = 0.0
    gap: float = 0.0
    iterations: int = 0


def _side_costs(prob: RateProblem) -> np.ndarray:
    """Cost constant for each coordinate on the side that helps reach ``z``."""
    x = np.asarray(prob.x)
    direction = np.sign(prob.z) * np.sign(x)
    return np.where(direction > 0, prob.c2, np.where(direction < 0, prob.c1, math.inf))


def rate_infimum(prob: RateProblem, tol: float = 1e-8, max_iter: int = 10_000) -> RateResult:
    """``inf { sum psi(u_j) : sum u_j x_j = z }`` with a feasible minimiser.

    The equality constraint is dualised; each coordinate's inner minimiser
    is explicit, and the multiplier is found by bracketed root finding on
    the constraint residual.  The returned ``gap`` is the primal-dual gap
    and certifies ``|value - I(z)| <= gap``.
    """
    x = np.asarray(prob.x)
    m = len(x)
    if prob.z == 0:
        return RateResult(0.0, np.zeros(m))
    C = _side_costs(prob)
    active = np.isfinite(C) & (x != 0)
    if not np.any(active):
        raise InfeasibleError("no coordinate can move the constraint towards z")
    ax = np.abs(x[active])
    Ca = C[active]
    p, z = prob.p, abs(prob.z)
    sgn = np.sign(prob.z) * np.sign(x[active])

    u = np.zeros(m)
    if p == 1:
        ratio = Ca / ax
        j = int(np.argmin(ratio))
        ua = np.zeros(len(ax))
        ua[j] = z / ax[j]
        u[active] = sgn * ua
        value = z * float(ratio[j])
        return RateResult(value, u, multiplier=float(ratio[j]), gap=0.0, iterations=0)

    e = 1.0 / (p - 1.0)

    def inner(mu):
        return (mu * ax / (p * Ca)) ** e

    def residual(mu):
        return float(np.sum(ax * inner(mu))) - z

    # warm start from the symmetric solution with the cheapest finite cost
    c_ref = float(np.min(Ca))
    qn = float(np.sum(ax ** conjugate(p))) ** (1.0 / conjugate(p))
    mu0 = p * c_ref * z ** (p - 1.0) / qn**p
    lo, hi = mu0, mu0
    it = 0
    while residual(lo) > 0:
        lo *= 0.5
        it += 1
    while residual(hi) < 0:
        hi *= 2.0
        it += 1
        if it > max_iter:
            raise NonconvergedError("could not bracket the multiplier")
    if residual(lo) == 0:
        mu = lo
    else:
        mu, info = optimize.brentq(
            residual, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=max_iter, full_output=True
        )
        it += info.iterations
    ua = inner(mu)
    ua *= z / float(np.sum(ax * ua))  # exact feasibility
    primal = float(np.sum(Ca * ua**p))
    dual = mu * z - (p - 1.0) * float(np.sum(Ca * inner(mu) ** p))
    gap = max(primal - dual, 0.0)
    if gap > tol:
        raise NonconvergedError(f"duality gap {gap:.3e} exceeds tol {tol:.1e}")
    u[active] = sgn * ua
    return RateResult(primal, u, multiplier=float(mu), gap=gap, iterations=it)


def holder_rate(x, c: float, p: float, z: float) -> float:
    """Symmetric-cost closed form ``c |z|^p / ||x||_q^p``."""
    x = np.abs(np.asarray(x, dtype=float))
    q = conjugate(p)
    nq = float(np.max(x)) if math.isinf(q) else float(np.sum(x**q)) ** (1.0 / q)
    return c * abs(z) ** p / nq**p


def rate_halfline(prob: RateProblem, tol: float = 1e-8) -> float:
    """``inf { I(y) : y >= z }`` for ``z > 0``; ``I`` grows along each sign."""
    if prob.z <= 0:
        return 0.0
    return rate_infimum(prob, tol).value


def series_rate_bounds(spec: SequenceSpec, c: float, p: float, z: float, N: int) -> tuple[float, float]:
    """Bracket the rate of the infinite weight sequence by its ``N``-term truncation.

    Dropping coordinates can only raise the infimum, while the closed form
    with the full-sequence norm is exact for symmetric costs.
    """
    prob = RateProblem(tuple(spec.head(N)), c, c, p, z)
    upper = rate_infimum(prob).value
    q = conjugate(p)
    lower = c * abs(z) ** p / spec.norm(q) ** p
    return lower, upper


def _check_hypothesis(spec: SequenceSpec, law: TailLaw) -> None:
    power = min(2.0, law.q)
    if not spec.converges(power):
        raise HypothesisViolatedError(
            f"sum a_n^{power:g} diverges; the log-level asymptote needs it finite"
        )


def log_tail_asymptote(spec: SequenceSpec, law: TailLaw, r: float) -> float:
    """``-c r^p ||a||_q^{-p}``."""
    _check_hypothesis(spec, law)
    return -(r**law.p) * law.c * spec.norm(law.q) ** (-law.p)


def log_ratio_asymptote(a: SequenceSpec, b: SequenceSpec, law: TailLaw) -> float:
    """Limit of ``log P_a(r) / log P_b(r)``: ``(||b||_q / ||a||_q)^p``."""
    _check_hypothesis(a, law)
    _check_hypothesis(b, law)
    return (b.norm(law.q) / a.norm(law.q)) ** law.p


def scaled_log_ratio(a: SequenceSpec, b: SequenceSpec, law: TailLaw, r: float) -> float:
    """Asymptote ratio with thresholds ``r ||a||_q`` and ``r ||b||_q``; always 1."""
    la = log_tail_asymptote(a, law, r * a.norm(law.q))
    lb = log_tail_asymptote(b, law, r * b.norm(law.q))
    return la / lb

"""Distributions of ``|xi|`` with a stretched-exponential tail.

Every law exposes its tail exponent ``p`` and constant ``c``
(``log P{|xi| >= u} ~ -c u^p``), the first absolute moment, the cumulant
generating function ``K(t) = log E exp(t |xi|)`` with its derivative, and a
sampler for the exponentially tilted law ``exp(t y - K(t)) P(dy)``.  The
sampler consumes two uniform arrays so that ``t = 0`` reproduces untilted
draws exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma, ndtri

from .errors import BadExponentError, ConfigError
from .gauss import log_phi, mills_ratio, phi_cdf


class TailLaw:
    name: str = ""
    #: supremum of the cumulant domain (exclusive)
    t_max: float = math.inf

    @property
    def p(self) -> float:
        raise NotImplementedError

    @property
    def c(self) -> float:
        raise NotImplementedError

    @property
    def q(self) -> float:
        """Hoelder conjugate of ``p``."""
        return math.inf if self.p == 1 else self.p / (self.p - 1.0)

    @property
    def mean_abs(self) -> float:
        raise NotImplementedError

    def survival(self, u):
        raise NotImplementedError

    def logpdf(self, x):
        raise NotImplementedError

    def cgf(self, t):
        raise NotImplementedError

    def cgf_prime(self, t):
        raise NotImplementedError

    def sample(self, t, u, v):
        """Tilted draws; ``t`` has shape ``(N,)``, ``u`` and ``v`` ``(B, N)``
        with values in ``(0, 1]``."""
        raise NotImplementedError

    def quantile(self, level: float) -> float:
        f = lambda x: float(self.survival(x)) - (1.0 - level)
        hi = 1.0
        while f(hi) > 0:
            hi *= 2.0
        return optimize.brentq(f, 0.0, hi, xtol=1e-12, rtol=1e-12)

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class FoldedGaussian(TailLaw):
    """``|xi|`` for ``xi ~ N(alpha, beta^2)``."""

    alpha: float = 0.0
    beta: float = 1.0
    name = "folded_gaussian"

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError("beta must be positive")

    @property
    def p(self):
        return 2.0

    @property
    def c(self):
        return 0.5 / self.beta**2

    @property
    def mean_abs(self):
        a, b = self.alpha, self.beta
        return b * math.sqrt(2 / math.pi) * math.exp(-0.5 * (a / b) ** 2) + a * (
            1.0 - 2.0 * float(phi_cdf(-a / b))
        )

    def survival(self, u):
        u = np.asarray(u, dtype=float)
        a, b = self.alpha, self.beta
        return np.where(u <= 0, 1.0, phi_cdf(-(u - a) / b) + phi_cdf(-(u + a) / b))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.alpha, self.beta
        lp = np.logaddexp(-0.5 * ((x - a) / b) ** 2, -0.5 * ((x + a) / b) ** 2)
        return lp - math.log(b * math.sqrt(2 * math.pi))

    def _components(self, t):
        # tilted |xi| is a mixture of N(+-alpha + beta^2 t, beta^2) on [0, inf)
        t = np.asarray(t, dtype=float)
        a, b = self.alpha, self.beta
        mu_p = a + b * b * t
        mu_m = -a + b * b * t
        lw_p = a * t + log_phi(mu_p / b)
        lw_m = -a * t + log_phi(mu_m / b)
        return mu_p, mu_m, lw_p, lw_m

    def cgf(self, t):
        t = np.asarray(t, dtype=float)
        _, _, lw_p, lw_m = self._components(t)
        return 0.5 * (self.beta * t) ** 2 + np.logaddexp(lw_p, lw_m)

    def cgf_prime(self, t):
        b = self.beta
        mu_p, mu_m, lw_p, lw_m = self._components(t)
        # mean of N(mu, b^2) truncated to [0, inf) is mu + b / R(-mu/b)
        m_p = mu_p + b / mills_ratio(-mu_p / b)
        m_m = mu_m + b / mills_ratio(-mu_m / b)
        w_p = 1.0 / (1.0 + np.exp(lw_m - lw_p))
        return w_p * m_p + (1.0 - w_p) * m_m

    def sample(self, t, u, v):
        b = self.beta
        mu_p, mu_m, lw_p, lw_m = self._components(t)
        w_p = 1.0 / (1.0 + np.exp(lw_m - lw_p))
        mu = np.where(v <= w_p, mu_p, mu_m)
        z = -ndtri(u * phi_cdf(mu / b))
        return np.maximum(mu + b * z, 0.0)

    def quantile(self, level):
        if self.alpha == 0:
            return self.beta * float(ndtri(0.5 * (1.0 + level)))
        return super().quantile(level)

    def to_dict(self):
        return {"name": self.name, "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class Exponential(TailLaw):
    rate: float = 1.0
    name = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigError("rate must be positive")

    @property
    def t_max(self):  # type: ignore[override]
        return self.rate

    @property
    def p(self):
        return 1.0

    @property
    def c(self):
        return self.rate

    @property
    def mean_abs(self):
        return 1.0 / self.rate

    def survival(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(-self.rate * np.maximum(u, 0.0))

    def logpdf(self, x):
        return math.log(self.rate) - self.rate * np.asarray(x, dtype=float)

    def cgf(self, t):
        return -np.log1p(-np.asarray(t, dtype=float) / self.rate)

    def cgf_prime(self, t):
        gap = self.rate - np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(gap > 0, 1.0 / gap, np.inf)

    def sample(self, t, u, v):
        return -np.log(u) / (self.rate - np.asarray(t, dtype=float))

    def quantile(self, level):
        return -math.log1p(-level) / self.rate

    def to_dict(self):
        return {"name": self.name, "rate": self.rate}


class _GridTilt:
    """Tilted law of ``Y = X^k`` tabulated on an ``x`` grid.

    Used when no closed-form cumulant exists.  The same grid provides the
    normaliser ``K(t)``, the tilted mean and the inverse-CDF sampler, so the
    importance weights are consistent with the sampling density.
    """

    n_grid = 8193

    def __init__(self, law: TailLaw, k: float):
        self.law = law
        self.k = k
        self._cache: dict[float, tuple] = {}
        self._x0 = law.quantile(1.0 - 1e-15)

    def _table(self, t: float):
        t = float(t)
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        x_hi = self._x0
        # x = x_hi s^2 clusters nodes near 0, where densities like x^(p-1) have a cusp
        s = np.linspace(0.0, 1.0, self.n_grid)
        for _ in range(60):
            x = x_hi * s * s
            with np.errstate(divide="ignore"):
                lg = t * x**self.k + self.law.logpdf(x) + np.log(2.0 * x_hi * s)
            top = float(np.max(lg))
            if lg[-1] < top - 45.0 and np.argmax(lg) < self.n_grid - 1:
                break
            x_hi *= 2.0
        g = np.exp(lg - top)
        ds = np.diff(s)
        cell = 0.5 * (g[1:] + g[:-1]) * ds
        cdf = np.concatenate(([0.0], np.cumsum(cell)))
        z = cdf[-1]
        y = x**self.k
        mean = float(np.sum(0.5 * (g[1:] * y[1:] + g[:-1] * y[:-1]) * ds) / z)
        entry = (x, cdf / z, top + math.log(z), mean)
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[t] = entry
        return entry

    def cgf(self, t):
        t = np.asarray(t, dtype=float)
        k0 = self._table(0.0)[2]
        out = np.array([self._table(ti)[2] - k0 for ti in t.ravel()])
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def cgf_prime(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array([self._table(ti)[3] for ti in t.ravel()])
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def sample(self, t, u):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(u)
        for j, tj in enumerate(t):
            x, cdf, _, _ = self._table(tj)
            out[:, j] = np.interp(1.0 - u[:, j], cdf, x) ** self.k
        return out


@dataclass(frozen=True)
class WeibullType(TailLaw):
    """``P{|xi| >= u} = exp(-c u^p)`` for ``u >= 0``."""

    p: float = 2.0  # type: ignore[assignment]
    c: float = 1.0  # type: ignore[assignment]
    name = "weibull_type"
    _tilt: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError("weibull_type needs p >= 1")
        if not self.c > 0:
            raise ConfigError("weibull_type needs c > 0")
        object.__setattr__(self, "_tilt", _GridTilt(self, 1.0))

    @property
    def t_max(self):  # type: ignore[override]
        return self.c if self.p == 1 else math.inf

    @property
    def mean_abs(self):
        return gamma(1.0 + 1.0 / self.p) * self.c ** (-1.0 / self.p)

    def survival(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        return np.exp(-self.c * u**self.p)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)
            body = math.log(self.c * self.p) - self.c * x**self.p
            if self.p == 1:
                return body
            return body + (self.p - 1.0) * lx

    def quantile(self, level):
        return (-math.log1p(-level) / self.c) ** (1.0 / self.p)

    def cgf(self, t):
        return self._tilt.cgf(t)

    def cgf_prime(self, t):
        return self._tilt.cgf_prime(t)

    def sample(self, t, u, v):
        t = np.asarray(t, dtype=float)
        exact = (-np.log(u) / self.c) ** (1.0 / self.p)
        if not np.any(t):
            return exact
        return self._tilt.sample(t, u)

    def to_dict(self):
        return {"name": self.name, "p": self.p, "c": self.c}


@dataclass(frozen=True)
class PoweredLaw(TailLaw):
    """Law of ``|xi|^k`` for a base law of ``|xi|``."""

    base: TailLaw
    k: float
    _tilt: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.k > 0:
            raise BadExponentError("k must be positive")
        if self.base.p / self.k < 1:
            raise BadExponentError(
                f"p/k = {self.base.p / self.k} < 1; the powered law has no LDP of this form"
            )
        object.__setattr__(self, "_tilt", _GridTilt(self.base, self.k))

    @property
    def name(self):  # type: ignore[override]
        return self.base.name

    @property
    def t_max(self):  # type: ignore[override]
        return self.base.c if self.p == 1 else math.inf

    @property
    def p(self):
        return self.base.p / self.k

    @property
    def c(self):
        return self.base.c

    @property
    def mean_abs(self):
        f = lambda x: x**self.k * math.exp(float(self.base.logpdf(x)))
        val, _ = integrate.quad(f, 0.0, math.inf, limit=200)
        return val

    def survival(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        return self.base.survival(u ** (1.0 / self.k))

    def logpdf(self, y):
        y = np.asarray(y, dtype=float)
        x = y ** (1.0 / self.k)
        return self.base.logpdf(x) + (1.0 / self.k - 1.0) * np.log(y) - math.log(self.k)

    def quantile(self, level):
        return self.base.quantile(level) ** self.k

    def cgf(self, t):
        return self._tilt.cgf(t)

    def cgf_prime(self, t):
        return self._tilt.cgf_prime(t)

    def sample(self, t, u, v):
        t = np.asarray(t, dtype=float)
        if not np.any(t):
            return self.base.sample(np.zeros_like(t), u, v) ** self.k
        return self._tilt.sample(t, u)

    def to_dict(self):
        d = self.base.to_dict()
        d["power"] = self.k
        return d


def power_transform(law: TailLaw, k: float) -> TailLaw:
    """Descriptor for ``|xi|^k``; exponent ``p/k`` and the same ``c``."""
    if k == 1:
        return law
    return PoweredLaw(law, float(k))


def law_from_dict(d: dict[str, Any]) -> TailLaw:
    name = d.get("name")
    if name == "folded_gaussian":
        law: TailLaw = FoldedGaussian(float(d.get("alpha", 0.0)), float(d.get("beta", 1.0)))
    elif name == "exponential":
        law = Exponential(float(d.get("rate", 1.0)))
    elif name == "weibull_type":
        law = WeibullType(float(d["p"]), float(d["c"]))
    else:
        raise ConfigError(f"unknown law {name!r}")
    if "power" in d and float(d["power"]) != 1:
        law = power_transform(law, float(d["power"]))
    return law

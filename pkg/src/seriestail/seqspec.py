"""Positive weight sequences {a_n}, n >= 1.

Each family knows its own power sums and tail sums: geometric families in
closed form, polynomial families through the Hurwitz zeta function with
integral-sandwich tail bounds, explicit lists by direct summation.
Perturbed families multiply a base sequence by ``1 + d_n`` where ``d_n`` is
a :class:`SignedForm`, so that downstream checkers can reason about the
deviation analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.special import zeta

from .errors import ConfigError, DivergentNormError

# Hard cap on the number of terms any routine will materialise.
MAX_TERMS = 1 << 26
# Head length used when a perturbed family has to be summed explicitly.
_PERTURBED_HEAD = 1 << 17


def _as_index(n) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    if np.any(n < 1):
        raise ValueError("sequence indices start at 1")
    return n


@dataclass(frozen=True)
class SignedForm:
    """Signed sequence ``d_n``.

    ``d_n = head[n-1]`` for ``n <= len(head)`` and
    ``d_n = const + coef * s_n * n**(-power)`` afterwards, where
    ``s_n = (-1)**n`` if ``alternating`` else 1.
    """

    coef: float = 0.0
    power: float = 1.0
    alternating: bool = False
    const: float = 0.0
    head: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(float(h) for h in self.head))
        if self.coef != 0.0 and self.power < 0:
            raise ConfigError("deviation power must be non-negative")

    def terms(self, n) -> np.ndarray:
        n = _as_index(n)
        nf = n.astype(float)
        sign = np.where(n % 2 == 0, 1.0, -1.0) if self.alternating else 1.0
        out = self.const + self.coef * sign * nf ** (-self.power)
        if self.head:
            h = np.asarray(self.head)
            inside = n <= len(h)
            out = np.where(inside, h[np.minimum(n, len(h)) - 1], out)
        return out

    def tail_sup(self, n0: int) -> float:
        """Upper bound on ``sup_{n > n0} |d_n|`` for ``n0 >= len(head)``."""
        n0 = max(int(n0), len(self.head))
        if self.coef == 0.0:
            return abs(self.const)
        return abs(self.const) + abs(self.coef) * (n0 + 1.0) ** (-self.power)

    @property
    def is_zero(self) -> bool:
        return self.coef == 0.0 and self.const == 0.0 and not any(self.head)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "form",
            "coef": self.coef,
            "power": self.power,
            "alternating": self.alternating,
            "const": self.const,
            "head": list(self.head),
        }


def deviation_from_dict(d: dict[str, Any]) -> SignedForm:
    """Parse the JSON deviation catalogue into a :class:`SignedForm`."""
    kind = d.get("kind")
    scale = float(d.get("scale", 1.0))
    if kind == "alternating_harmonic":
        return SignedForm(coef=scale, power=1.0, alternating=True)
    if kind == "harmonic":
        return SignedForm(coef=scale, power=1.0)
    if kind == "inverse_square":
        return SignedForm(coef=scale, power=2.0)
    if kind in ("power", "alternating_power"):
        return SignedForm(
            coef=scale,
            power=float(d["exponent"]),
            alternating=kind == "alternating_power" or bool(d.get("alternating", False)),
        )
    if kind == "explicit":
        return SignedForm(head=tuple(scale * float(t) for t in d["terms"]))
    if kind == "zero":
        return SignedForm()
    if kind == "form":
        return SignedForm(
            coef=float(d.get("coef", 0.0)),
            power=float(d.get("power", 1.0)),
            alternating=bool(d.get("alternating", False)),
            const=float(d.get("const", 0.0)),
            head=tuple(d.get("head", ())),
        )
    raise ConfigError(f"unknown deviation kind {kind!r}")


@dataclass(frozen=True)
class MonotonicityVerdict:
    nonincreasing: bool
    basis: str  # "analytic" or "prefix-only"
    horizon: int

    def __bool__(self) -> bool:
        return self.nonincreasing


class SequenceSpec:
    """Base class for weight sequences."""

    #: number of non-zero terms for finite sequences, ``None`` otherwise
    length: int | None = None

    # -- per-family primitives ------------------------------------------------
    def log_terms(self, n) -> np.ndarray:
        raise NotImplementedError

    def converges(self, power: float) -> bool:
        raise NotImplementedError

    def _power_sum(self, power: float) -> float:
        raise NotImplementedError

    def _tail_bounds(self, N: int, power: float) -> tuple[float, float]:
        raise NotImplementedError

    def _tail_estimate(self, N: int, power: float) -> float:
        lo, hi = self._tail_bounds(N, power)
        return 0.5 * (lo + hi)

    def max_term(self) -> float:
        raise NotImplementedError

    def max_term_beyond(self, P: int) -> float:
        """Upper bound on ``sup_{n > P} a_n``."""
        return self.max_term()

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    # -- public API -------------------------------------------------------------
    def term(self, n: int) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        return float(self.terms(np.array([n]))[0])

    def terms(self, n) -> np.ndarray:
        return np.exp(self.log_terms(n))

    def head(self, N: int) -> np.ndarray:
        """The first ``N`` terms as an array."""
        if N > MAX_TERMS:
            raise ValueError(f"refusing to materialise {N} terms")
        return self.terms(np.arange(1, N + 1))

    def _require(self, power: float) -> None:
        if not self.converges(power):
            raise DivergentNormError(f"sum of a_n^{power} diverges for {self!r}")

    def power_sum(self, power: float) -> float:
        """``sum_n a_n**power``."""
        self._require(power)
        return self._power_sum(power)

    def norm(self, q: float) -> float:
        """The l^q norm; ``q = inf`` gives the largest term."""
        if q < 1:
            raise ValueError("q must be >= 1")
        if math.isinf(q):
            return self.max_term()
        return self.power_sum(q) ** (1.0 / q)

    def tail_bounds(self, N: int, power: float) -> tuple[float, float]:
        """Certified ``(lower, upper)`` bounds on ``sum_{n > N} a_n**power``."""
        self._require(power)
        if N < 0:
            raise ValueError("N must be >= 0")
        return self._tail_bounds(int(N), power)

    def tail_sum(self, N: int, power: float) -> float:
        """Conservative (upper) value of ``sum_{n > N} a_n**power``."""
        return self.tail_bounds(N, power)[1]

    def truncation_index(self, tol: float, power: float) -> int:
        """Smallest ``N`` with ``tail_sum(N, power) <= tol * power_sum(power)``."""
        if tol <= 0:
            raise ValueError("tol must be positive")
        self._require(power)
        if self.length is not None:
            return self.length
        target = tol * self._power_sum(power)

        def ok(N):
            return self._tail_bounds(N, power)[1] <= target

        if ok(0):
            return 0
        hi = 1
        while not ok(hi):
            hi *= 2
            if hi > MAX_TERMS:
                raise DivergentNormError(
                    f"truncation index for tol={tol} exceeds {MAX_TERMS} terms"
                )
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def is_nonincreasing(self, horizon: int = 10_000) -> MonotonicityVerdict:
        if horizon < 2:
            raise ValueError("horizon must be >= 2")
        h = horizon if self.length is None else min(horizon, self.length)
        lt = self.log_terms(np.arange(1, h + 1))
        prefix_ok = bool(np.all(np.diff(lt) <= 0))
        tail_ok = self._analytic_monotone_beyond(horizon)
        if tail_ok is None:
            return MonotonicityVerdict(prefix_ok, "prefix-only", horizon)
        return MonotonicityVerdict(prefix_ok and tail_ok, "analytic", horizon)

    def _analytic_monotone_beyond(self, horizon: int) -> bool | None:
        return None


@dataclass(frozen=True)
class Geometric(SequenceSpec):
    """``a_n = rho**n`` with ``0 < rho < 1``."""

    rho: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("geometric family requires 0 < rho < 1")

    def log_terms(self, n):
        return _as_index(n) * math.log(self.rho)

    def terms(self, n):
        return self.rho ** _as_index(n).astype(float)

    def converges(self, power):
        return power > 0

    def _power_sum(self, power):
        r = self.rho**power
        return r / (1.0 - r)

    def _tail_bounds(self, N, power):
        r = self.rho**power
        v = r ** (N + 1) / (1.0 - r)
        return v, v

    def truncation_index(self, tol, power):
        if tol <= 0:
            raise ValueError("tol must be positive")
        self._require(power)
        # tail(N) / full = rho**(power*N)
        if tol >= 1.0:
            return 0
        N = max(0, math.ceil(math.log(tol) / (power * math.log(self.rho))) - 2)
        while self.rho ** (power * N) > tol:
            N += 1
        return N

    def max_term(self):
        return self.rho

    def max_term_beyond(self, P):
        return self.term(P + 1)

    def _analytic_monotone_beyond(self, horizon):
        return True

    def to_dict(self):
        return {"family": "geometric", "rho": self.rho}


@dataclass(frozen=True)
class Polynomial(SequenceSpec):
    """``a_n = (n + offset)**(-s)`` with ``s > 1`` and ``offset > -1``."""

    s: float
    offset: float = 0.0

    def __post_init__(self):
        if not self.s > 1.0:
            raise ConfigError("polynomial family requires s > 1")
        if not self.offset > -1.0:
            raise ConfigError("polynomial family requires offset > -1")

    def log_terms(self, n):
        return -self.s * np.log(_as_index(n) + self.offset)

    def terms(self, n):
        return (_as_index(n) + self.offset) ** (-self.s)

    def converges(self, power):
        return self.s * power > 1.0

    def _power_sum(self, power):
        return float(zeta(self.s * power, 1.0 + self.offset))

    def _tail_bounds(self, N, power):
        u = self.s * power
        lo = (N + 1.0 + self.offset) ** (1.0 - u) / (u - 1.0)
        x0 = N + self.offset
        if x0 > 0:
            hi = x0 ** (1.0 - u) / (u - 1.0)
        else:
            hi = (N + 1.0 + self.offset) ** (-u) + lo
        return lo, hi

    def _tail_estimate(self, N, power):
        return float(zeta(self.s * power, N + 1.0 + self.offset))

    def max_term(self):
        return (1.0 + self.offset) ** (-self.s)

    def max_term_beyond(self, P):
        return self.term(P + 1)

    def _analytic_monotone_beyond(self, horizon):
        return True

    def to_dict(self):
        return {"family": "polynomial", "s": self.s, "offset": self.offset}


@dataclass(frozen=True)
class Explicit(SequenceSpec):
    """A finite list of positive weights; terms beyond the list are zero."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("explicit family needs at least one term")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise ConfigError("explicit terms must be positive and finite")
        object.__setattr__(self, "values", vals)

    @property
    def length(self):  # type: ignore[override]
        return len(self.values)

    def log_terms(self, n):
        n = _as_index(n)
        lv = np.log(np.asarray(self.values))
        inside = n <= len(lv)
        return np.where(inside, lv[np.minimum(n, len(lv)) - 1], -np.inf)

    def terms(self, n):
        n = _as_index(n)
        v = np.asarray(self.values)
        return np.where(n <= len(v), v[np.minimum(n, len(v)) - 1], 0.0)

    def converges(self, power):
        return power > 0

    def _power_sum(self, power):
        return math.fsum(v**power for v in self.values)

    def _tail_bounds(self, N, power):
        v = math.fsum(x**power for x in self.values[N:])
        return v, v

    def max_term(self):
        return max(self.values)

    def to_dict(self):
        return {"family": "explicit", "terms": list(self.values)}


@dataclass(frozen=True)
class Scaled(SequenceSpec):
    """``a_n = factor * base_n``."""

    base: SequenceSpec
    factor: float

    def __post_init__(self):
        if not self.factor > 0:
            raise ConfigError("scale factor must be positive")

    @property
    def length(self):  # type: ignore[override]
        return self.base.length

    def log_terms(self, n):
        return self.base.log_terms(n) + math.log(self.factor)

    def converges(self, power):
        return self.base.converges(power)

    def _power_sum(self, power):
        return self.factor**power * self.base._power_sum(power)

    def _tail_bounds(self, N, power):
        lo, hi = self.base._tail_bounds(N, power)
        f = self.factor**power
        return f * lo, f * hi

    def _tail_estimate(self, N, power):
        return self.factor**power * self.base._tail_estimate(N, power)

    def truncation_index(self, tol, power):
        return self.base.truncation_index(tol, power)

    def max_term(self):
        return self.factor * self.base.max_term()

    def max_term_beyond(self, P):
        return self.factor * self.base.max_term_beyond(P)

    def _analytic_monotone_beyond(self, horizon):
        return self.base._analytic_monotone_beyond(horizon)

    def to_dict(self):
        return {"family": "scaled", "base": self.base.to_dict(), "factor": self.factor}


@dataclass(frozen=True)
class Perturbed(SequenceSpec):
    """``a_n = base_n * (1 + d_n)``.

    With ``match_norm=q`` the first term is replaced so that
    ``norm(q)`` equals ``base.norm(q)``; the normalised ratio of the two
    sequences is then exactly ``1 + d_n`` for every ``n >= 2``.
    """

    base: SequenceSpec
    deviation: SignedForm
    match_norm: float | None = None
    prefix: int = 10_000
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.base.length is not None:
            raise ConfigError("perturbed families need an infinite base")
        if self.match_norm is not None and not (1 <= self.match_norm < math.inf):
            raise ConfigError("match_norm must be a finite q >= 1")
        n = np.arange(1, self.prefix + 1)
        d = self.deviation.terms(n)
        check = d[1:] if self.match_norm is not None else d
        if np.any(1.0 + check <= 0):
            raise ConfigError("perturbation makes some term non-positive")
        if self.deviation.tail_sup(self.prefix) >= 1.0:
            raise ConfigError("deviation bound does not keep the tail positive")
        if self.match_norm is not None and not self.first_term > 0:
            raise ConfigError("norm matching needs a non-positive first term")

    # raw terms ignore the norm-matching override of a_1
    def _raw_log_terms(self, n):
        n = _as_index(n)
        d = self.deviation.terms(n)
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.base.log_terms(n) + np.log1p(d)

    @cached_property
    def first_term(self) -> float:
        if self.match_norm is None:
            return float(np.exp(self._raw_log_terms(np.array([1])))[0])
        q = self.match_norm
        rest = self._raw_tail_estimate(1, q)
        total = self.base._power_sum(q)
        gap = total - rest
        return gap ** (1.0 / q) if gap > 0 else float("nan")

    def log_terms(self, n):
        n = _as_index(n)
        lt = self._raw_log_terms(n)
        if self.match_norm is not None:
            lt = np.where(n == 1, math.log(self.first_term), lt)
        return lt

    def converges(self, power):
        return self.base.converges(power)

    def _head_len(self, power: float) -> int:
        try:
            M = self.base.truncation_index(1e-18, power)
        except DivergentNormError:
            M = _PERTURBED_HEAD
        return int(min(max(M, len(self.deviation.head) + 1, 64), _PERTURBED_HEAD))

    def _raw_tail_estimate(self, N: int, power: float) -> float:
        M = max(self._head_len(power), N)
        vals = np.exp(power * self._raw_log_terms(np.arange(N + 1, M + 1)))
        return math.fsum(vals) + self.base._tail_estimate(M, power)

    def _power_sum(self, power):
        key = ("sum", power)
        if key not in self._cache:
            self._cache[key] = self.first_term**power + self._tail_estimate(1, power)
        return self._cache[key]

    def _tail_estimate(self, N, power):
        if N == 0:
            return self._power_sum(power)
        return self._raw_tail_estimate(N, power)

    def _tail_bounds(self, N, power):
        M = self._head_len(power)
        if N >= M:
            lo, hi = self.base._tail_bounds(N, power)
            delta = self.deviation.tail_sup(N)
            return lo * (1.0 - delta) ** power, hi * (1.0 + delta) ** power
        vals = np.exp(power * self.log_terms(np.arange(N + 1, M + 1)))
        exact = math.fsum(vals)
        lo, hi = self._tail_bounds(M, power)
        return exact + lo, exact + hi

    def max_term(self):
        P = 64
        while True:
            best = float(np.max(self.head(P)))
            bound = self.base.max_term_beyond(P) * (1.0 + self.deviation.tail_sup(P))
            if bound <= best or P >= _PERTURBED_HEAD:
                return best
            P *= 4

    def _analytic_monotone_beyond(self, horizon):
        dev = self.deviation
        n0 = max(horizon, len(dev.head))
        if dev.const == 0.0 and not dev.alternating and dev.coef >= 0:
            # product of two positive non-increasing sequences
            if self.base._analytic_monotone_beyond(horizon):
                return True
        if isinstance(self.base, Geometric):
            delta = dev.tail_sup(n0)
            if delta < 1 and self.base.rho * (1 + delta) / (1 - delta) < 1:
                return True
        return None

    def to_dict(self):
        d = {
            "family": "perturbed",
            "base": self.base.to_dict(),
            "deviation": self.deviation.to_dict(),
        }
        if self.match_norm is not None:
            d["match_norm"] = self.match_norm
        return d


def sequence_from_dict(d: dict[str, Any]) -> SequenceSpec:
    """Build a sequence from its JSON description."""
    try:
        fam = d["family"]
    except (KeyError, TypeError):
        raise ConfigError(f"sequence spec needs a 'family': {d!r}") from None
    try:
        if fam == "geometric":
            return Geometric(float(d["rho"]))
        if fam == "polynomial":
            return Polynomial(float(d["s"]), float(d.get("offset", 0.0)))
        if fam == "explicit":
            return Explicit(tuple(d["terms"]))
        if fam == "scaled":
            return Scaled(sequence_from_dict(d["base"]), float(d["factor"]))
        if fam == "perturbed":
            mn = d.get("match_norm")
            return Perturbed(
                sequence_from_dict(d["base"]),
                deviation_from_dict(d["deviation"]),
                match_norm=None if mn is None else float(mn),
            )
    except KeyError as exc:
        raise ConfigError(f"sequence spec {fam!r} is missing {exc}") from None
    raise ConfigError(f"unknown sequence family {fam!r}")

"""Grid falsification harnesses for three elementary inequalities.

* weighted tail bound: ``|sum_{n>=N} c_n g(d_n)| <= (D + sup|g|) sup_{k>=N} |sum_{n=N}^k c_n|``
  for monotone non-negative ``d`` and ``g`` of total variation ``D``;
* ``1 + a*delta <= (1 + delta)**a`` for ``a <= 0``;
* ``1 + a*delta + gamma <= (1 + delta)**a * (1 + delta**2) * (1 + gamma)**2``
  for ``|a| <= sigma`` and ``|delta| <= lambda(sigma)``.

A clean run means no counterexample was found on the grid, nothing more.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, NoValidLambdaError, NotMonotoneError

SLACK = 1e-12


@dataclass(frozen=True)
class PiecewiseFunction:
    """Continuous piecewise-linear ``g`` on ``[0, inf)``, constant outside the breakpoints."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.breakpoints)
        y = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)
        if not x or len(x) != len(y):
            raise ConfigError("breakpoints and values must be non-empty and of equal length")
        if x[0] < 0 or any(b <= a for a, b in zip(x, x[1:])):
            raise ConfigError("breakpoints must be non-negative and strictly increasing")

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.breakpoints, self.values)

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))

    @property
    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PiecewiseFunction":
        return cls(tuple(d["breakpoints"]), tuple(d["values"]))

    def to_dict(self) -> dict[str, Any]:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}


@dataclass(frozen=True)
class WeightedTailCheck:
    holds: bool
    left: float
    right: float
    slack: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def check_lemma_22(
    c: Sequence[float], g: PiecewiseFunction, d: Sequence[float], N: int = 1
) -> WeightedTailCheck:
    """Evaluate both sides of the weighted tail bound on finite data (1-based ``N``).

    The supremum runs over ``k >= N``; the single-term partial sum ``c_N``
    must be included for the bound to hold on finite sequences.
    """
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if c.ndim != 1 or c.shape != d.shape:
        raise ConfigError("c and d must be lists of equal length")
    if not 1 <= N <= len(c):
        raise ConfigError(f"N must lie in [1, {len(c)}]")
    if np.any(d < 0):
        raise NotMonotoneError("d must be non-negative")
    step = np.diff(d)
    if not (np.all(step >= 0) or np.all(step <= 0)):
        raise NotMonotoneError("d is not monotone")
    cs, ds = c[N - 1 :], d[N - 1 :]
    left = abs(math.fsum(cs * g(ds)))
    partial = np.cumsum(cs)
    right = (g.total_variation + g.sup_abs) * float(np.max(np.abs(partial)))
    return WeightedTailCheck(left <= right + SLACK, left, right, right - left)


@dataclass(frozen=True)
class Violation:
    a: float
    delta: float
    gap: float
    gamma: float | None = None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if self.gamma is None:
            d.pop("gamma")
        return d


@dataclass(frozen=True)
class Lemma23Report:
    violations: tuple[Violation, ...]
    valid_range: dict[float, tuple[float, float]] = field(repr=False)
    n_points: int = 0

    @property
    def clean(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "clean": self.clean,
            "n_points": self.n_points,
            "violations": [v.to_dict() for v in self.violations],
            "valid_range": {repr(a): list(r) for a, r in self.valid_range.items()},
        }


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    k = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(k + 1), 12)


DEFAULT_A23 = _grid(-10.0, 0.0, 0.1)
DEFAULT_D23 = _grid(-0.05, 0.05, 1e-3)


def check_lemma_23(
    a_grid: Sequence[float] | None = None,
    delta_grid: Sequence[float] | None = None,
    slack: float = SLACK,
) -> Lemma23Report:
    """Grid check of ``1 + a delta <= (1 + delta)^a``.

    ``valid_range[a]`` is the widest grid interval around ``delta = 0`` on
    which the inequality held; outside it something failed or the grid
    ended.
    """
    a = np.asarray(DEFAULT_A23 if a_grid is None else a_grid, dtype=float)
    dl = np.asarray(DEFAULT_D23 if delta_grid is None else delta_grid, dtype=float)
    if np.any(a > 0):
        raise ConfigError("a_grid must be <= 0")
    if np.any(dl <= -1):
        raise ConfigError("delta_grid must be > -1")
    dl = np.sort(dl)
    A, Dl = np.meshgrid(a, dl, indexing="ij")
    lhs = 1.0 + A * Dl
    rhs = np.exp(A * np.log1p(Dl))
    gap = lhs - rhs
    bad = gap > slack * np.maximum(1.0, np.abs(rhs))

    viol = tuple(
        Violation(float(A[i, j]), float(Dl[i, j]), float(gap[i, j])) for i, j in zip(*np.nonzero(bad))
    )
    ranges: dict[float, tuple[float, float]] = {}
    zero = int(np.searchsorted(dl, 0.0))
    for i, av in enumerate(a):
        row = bad[i]
        hi_idx = len(dl) - 1
        up = np.nonzero(row[zero:])[0]
        if up.size:
            hi_idx = zero + int(up[0]) - 1
        lo_idx = 0
        down = np.nonzero(row[:zero][::-1])[0]
        if down.size:
            lo_idx = zero - int(down[0])
        lo_v = float(dl[lo_idx]) if lo_idx < zero else 0.0
        hi_v = float(dl[hi_idx]) if hi_idx >= zero else 0.0
        ranges[float(av)] = (min(lo_v, 0.0), max(hi_v, 0.0))
    return Lemma23Report(viol, ranges, int(A.size))


@dataclass(frozen=True)
class Lemma24Report:
    sigma: float
    lambda_hat: float
    binding: Violation | None
    tightest: Violation
    n_points: int
    bisection_steps: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "sigma": self.sigma,
            "lambda_hat": self.lambda_hat,
            "binding": None if self.binding is None else self.binding.to_dict(),
            "tightest": self.tightest.to_dict(),
            "n_points": self.n_points,
            "bisection_steps": self.bisection_steps,
        }


def check_lemma_24(
    sigma: float,
    a_grid: Sequence[float] | None = None,
    delta_grid: Sequence[float] | None = None,
    gamma_grid: Sequence[float] | None = None,
    a_step: float = 0.1,
    lambda_cap: float = 0.5,
    slack: float = SLACK,
) -> Lemma24Report:
    """Largest grid ``lambda <= lambda_cap`` with no violation for ``|delta| <= lambda``.

    ``binding`` is the first violating point beyond ``lambda_hat`` (None if the
    cap is reached), ``tightest`` the accepted point with the smallest margin.
    """
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    if a_grid is None:
        k = int(round(sigma / a_step))
        a = np.round(a_step * np.arange(-k, k + 1), 12)
    else:
        a = np.asarray(a_grid, dtype=float)
        if np.any(np.abs(a) > sigma * (1 + 1e-12)):
            raise ConfigError("a_grid must satisfy |a| <= sigma")
    if delta_grid is None:
        pos = _grid(0.0, lambda_cap, 1e-3)
        dl = np.concatenate([-pos[:0:-1], pos])
    else:
        dl = np.asarray(delta_grid, dtype=float)
    if np.any(dl <= -1):
        raise ConfigError("delta_grid must be > -1")
    gm = np.logspace(-6, 3, 37) if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    if np.any(gm <= 0):
        raise ConfigError("gamma_grid must be positive")

    A, Dl, G = np.meshgrid(a, dl, gm, indexing="ij")
    lhs = 1.0 + A * Dl + G
    rhs = np.exp(A * np.log1p(Dl)) * (1.0 + Dl * Dl) * (1.0 + G) ** 2
    margin = rhs - lhs
    fail = margin < -slack * np.maximum(1.0, np.abs(lhs))

    levels = np.unique(np.abs(dl[np.abs(dl) <= lambda_cap]))
    absd = np.abs(Dl)

    def ok(idx: int) -> bool:
        return not np.any(fail[absd <= levels[idx]])

    steps = 0
    if not ok(0):
        raise NoValidLambdaError("inequality fails already at the smallest |delta| on the grid")
    if ok(len(levels) - 1):
        best = len(levels) - 1
    else:
        lo, hi = 0, len(levels) - 1  # ok(lo) holds, ok(hi) fails
        while hi - lo > 1:
            mid = (lo + hi) // 2
            steps += 1
            if ok(mid):
                lo = mid
            else:
                hi = mid
        best = lo
    lam = float(levels[best])
    if lam == 0.0:
        raise NoValidLambdaError("no positive |delta| on the grid satisfies the inequality")

    def point(ix) -> Violation:
        i, j, k = ix
        return Violation(float(A[i, j, k]), float(Dl[i, j, k]), float(-margin[i, j, k]), float(G[i, j, k]))

    inside = absd <= lam
    masked = np.where(inside, margin, np.inf)
    tightest = point(np.unravel_index(int(np.argmin(masked)), masked.shape))
    binding = None
    if best < len(levels) - 1:
        nxt = (absd == levels[best + 1]) & fail
        binding = point(np.argwhere(nxt)[0])
    return Lemma24Report(float(sigma), lam, binding, tightest, int(A.size), steps)

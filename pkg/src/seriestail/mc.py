"""Monte Carlo oracle for ``P{sum a_n Y_n >= r}`` with ``Y_n`` i.i.d. from a
:class:`~seriestail.laws.TailLaw`.

Two estimators share one sampling path: plain frequency counting, and
importance sampling with a single global exponential tilt ``theta`` applied
to every coordinate ``a_n Y_n``.  With ``theta = 0`` both consume identical
random numbers and return identical estimates.

Each worker owns a Philox stream keyed by ``(seed, worker index)``; workers
report log-shifted weight sums that are merged in worker order, so results
are bit-reproducible for a fixed ``(seed, n_workers)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import optimize, stats

from .errors import BelowMeanError, ConfigError, DomainError
from .laws import TailLaw
from .ldp import log_tail_asymptote
from .seqspec import SequenceSpec

MAX_MC_TERMS = 1 << 16


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int = 100_000
    seed: int = 20240601
    n_workers: int = 1
    truncation_tol: float = 1e-12
    batch: int = 1 << 15
    confidence: float = 0.99
    tail_quantile: float = 1.0 - 1e-9
    # "none"/"lower": threshold r on the truncated sum; "upper": r - trunc_bound
    bracket: str = "none"
    # "normal" (delta method on the log scale) or "exact" (Clopper-Pearson, naive only)
    ci: str = "normal"

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.n_workers < 1:
            raise ConfigError("n_workers must be >= 1")
        if not self.truncation_tol > 0:
            raise ConfigError("truncation_tol must be positive")
        if self.bracket not in ("none", "lower", "upper"):
            raise ConfigError(f"unknown bracket {self.bracket!r}")
        if self.ci not in ("normal", "exact"):
            raise ConfigError(f"unknown ci method {self.ci!r}")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SamplerConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown sampler settings {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    log_p_hat: float
    ci_low: float
    ci_high: float
    ess: float
    trunc_bound: float
    method: str
    n_samples: int
    n_terms: int
    hits: int
    theta: float = 0.0
    threshold: float = 0.0
    workers: tuple = field(default=(), repr=False)

    @property
    def log_halfwidth(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def to_dict(self, with_workers: bool = False) -> dict[str, Any]:
        d = asdict(self)
        if with_workers:
            d["workers"] = [dict(w) for w in self.workers]
        else:
            d.pop("workers")
        return d


def truncation(spec: SequenceSpec, law: TailLaw, cfg: SamplerConfig) -> tuple[int, float]:
    """Number of simulated terms and the deterministic bound on the rest."""
    N = spec.truncation_index(cfg.truncation_tol, 1.0)
    if N > MAX_MC_TERMS:
        raise ConfigError(
            f"truncation_tol={cfg.truncation_tol} needs {N} terms; more than {MAX_MC_TERMS}"
        )
    N = max(N, 1)
    tail = spec.tail_sum(N, 1.0)
    return N, tail * law.quantile(cfg.tail_quantile) if tail > 0 else 0.0


def _stream(seed: int, worker: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(worker,))
    return np.random.Generator(np.random.Philox(ss))


def _worker(law, a, t, log_norm, theta, thresh, n, seed, idx, batch):
    rng = _stream(seed, idx)
    hits = 0
    top = -math.inf
    s1 = 0.0
    s2 = 0.0
    done = 0
    while done < n:
        b = min(batch, n - done)
        u = 1.0 - rng.random((b, len(a)))
        v = rng.random((b, len(a)))
        y = law.sample(t, u, v)
        s = y @ a
        hit = s >= thresh
        k = int(np.count_nonzero(hit))
        if k:
            lw = log_norm - theta * s[hit] if theta else np.zeros(k)
            m = float(np.max(lw))
            if m > top:
                scale = math.exp(top - m) if math.isfinite(top) else 0.0
                s1 *= scale
                s2 *= scale * scale
                top = m
            w = np.exp(lw - top)
            s1 += float(np.sum(w))
            s2 += float(np.sum(w * w))
            hits += k
        done += b
    return {"n": n, "hits": hits, "log_shift": top, "s1": s1, "s2": s2}


def _simulate(law, spec, r, cfg, theta, method) -> Estimate:
    N, trunc_bound = truncation(spec, law, cfg)
    a = spec.head(N)
    thresh = r - trunc_bound if cfg.bracket == "upper" else r
    t = theta * a
    log_norm = float(np.sum(law.cgf(t))) if theta else 0.0

    w = cfg.n_workers
    sizes = [cfg.n_samples // w + (1 if i < cfg.n_samples % w else 0) for i in range(w)]
    jobs = [
        (law, a, t, log_norm, theta, thresh, sizes[i], cfg.seed, i, cfg.batch)
        for i in range(w)
        if sizes[i] > 0
    ]
    if len(jobs) == 1:
        parts = [_worker(*jobs[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(jobs)) as ex:
            parts = list(ex.map(lambda j: _worker(*j), jobs))
    return _merge(parts, cfg, method, N, trunc_bound, theta, thresh)


def _merge(parts, cfg, method, N, trunc_bound, theta, thresh) -> Estimate:
    n = sum(pt["n"] for pt in parts)
    hits = sum(pt["hits"] for pt in parts)
    z = float(stats.norm.ppf(0.5 + 0.5 * cfg.confidence))
    alpha = 1.0 - cfg.confidence
    common = dict(
        method=method,
        n_samples=n,
        n_terms=N,
        hits=hits,
        theta=float(theta),
        threshold=float(thresh),
        trunc_bound=float(trunc_bound),
        workers=tuple(parts),
    )
    if hits == 0:
        upper = -math.expm1(math.log(alpha / 2.0) / n)
        return Estimate(0.0, -math.inf, -math.inf, math.log(upper), 0.0, **common)
    top = max(pt["log_shift"] for pt in parts if pt["hits"])
    s1 = 0.0
    s2 = 0.0
    for pt in parts:
        if pt["hits"]:
            f = math.exp(pt["log_shift"] - top)
            s1 += pt["s1"] * f
            s2 += pt["s2"] * f * f
    if theta == 0:
        p_hat = hits / n
        log_p = math.log(p_hat)
    else:
        log_p = top + math.log(s1) - math.log(n)
        p_hat = math.exp(log_p)
    ess = s1 * s1 / s2
    if cfg.ci == "exact" and theta == 0:
        lo = stats.beta.ppf(alpha / 2, hits, n - hits + 1) if hits > 0 else 0.0
        hi = stats.beta.ppf(1 - alpha / 2, hits + 1, n - hits) if hits < n else 1.0
        ci_low = math.log(lo) if lo > 0 else -math.inf
        ci_high = math.log(hi)
        ci_low, ci_high = min(ci_low, log_p), max(ci_high, log_p)
    else:
        rel = math.sqrt(max(n * s2 / (s1 * s1) - 1.0, 0.0) / max(n - 1, 1))
        ci_low, ci_high = log_p - z * rel, log_p + z * rel
    return Estimate(min(p_hat, 1.0), min(log_p, 0.0), ci_low, ci_high, ess, **common)


def sample_naive(law: TailLaw, spec: SequenceSpec, r: float, cfg: SamplerConfig) -> Estimate:
    """Frequency estimate of ``P{sum_{n<=N} a_n Y_n >= r}``."""
    return _simulate(law, spec, r, cfg, 0.0, "mc_naive")


def tilt_parameter(law: TailLaw, spec: SequenceSpec, r: float, N: int) -> float:
    """``theta`` with ``sum_{n<=N} a_n K'(theta a_n) = r``."""
    a = spec.head(N)
    mean = float(np.sum(a)) * law.mean_abs
    if r < mean * (1.0 - 1e-12):
        raise BelowMeanError(f"r={r} lies below the truncated mean {mean}")
    if r <= mean * (1.0 + 1e-12):
        return 0.0

    def f(theta):
        return float(np.sum(a * law.cgf_prime(theta * a))) - r

    sup = law.t_max / float(np.max(a))
    if math.isfinite(sup):
        hi = None
        for k in range(1, 60):
            cand = sup * (1.0 - 2.0**-k)
            if f(cand) > 0:
                hi = cand
                break
        if hi is None:
            raise DomainError(f"no tilt inside the cumulant domain reaches r={r}")
    else:
        hi = 1.0
        while f(hi) <= 0:
            hi *= 2.0
            if hi > 1e12:
                raise DomainError(f"no tilt reaches r={r}")
    lo = 0.0
    return float(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500))


def sample_is(
    law: TailLaw,
    spec: SequenceSpec,
    r: float,
    cfg: SamplerConfig,
    theta: float | None = None,
) -> Estimate:
    """Importance-sampling estimate under the dominating-point tilt."""
    if theta is None:
        N, _ = truncation(spec, law, cfg)
        theta = tilt_parameter(law, spec, r, N)
    return _simulate(law, spec, r, cfg, theta, "mc_is")


def sample_best(law: TailLaw, spec: SequenceSpec, r: float, cfg: SamplerConfig) -> Estimate:
    """Importance sampling when the threshold is above the mean, naive otherwise."""
    try:
        return sample_is(law, spec, r, cfg)
    except BelowMeanError:
        return sample_naive(law, spec, r, cfg)


@dataclass(frozen=True)
class SlopeFit:
    c_eff: float
    intercept: float
    target: float
    p: float
    r_grid: tuple[float, ...]
    residuals: tuple[float, ...]
    estimates: tuple[Estimate, ...] = field(repr=False)

    @property
    def rel_error(self) -> float:
        return abs(self.c_eff - self.target) / self.target


def empirical_log_slope(
    law: TailLaw, spec: SequenceSpec, r_grid: Sequence[float], cfg: SamplerConfig
) -> SlopeFit:
    """Least-squares fit of ``log p(r) = intercept - c_eff r^p``."""
    r_grid = tuple(float(r) for r in r_grid)
    if len(r_grid) < 3:
        raise ConfigError("need at least three thresholds for a slope fit")
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ConfigError("r_grid must be strictly increasing")
    ests = tuple(sample_best(law, spec, r, cfg) for r in r_grid)
    y = np.array([e.log_p_hat for e in ests])
    if not np.all(np.isfinite(y)):
        raise ConfigError("some grid points produced no hits; lower r or add samples")
    x = -np.asarray(r_grid) ** law.p
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    target = -log_tail_asymptote(spec, law, 1.0)
    return SlopeFit(
        c_eff=float(slope),
        intercept=float(intercept),
        target=float(target),
        p=law.p,
        r_grid=r_grid,
        residuals=tuple(float(v) for v in resid),
        estimates=ests,
    )

"""Convergence checkers for normalised ratio sequences.

Every verdict is three-valued.  Closed-form deviations
``d_n = const + coef * s_n * n**(-power)`` (``s_n`` optionally ``(-1)**n``)
are decided analytically; anything else goes through a windowed heuristic on
partial sums and is tagged as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError, NonpositiveFactorError, ZeroFactorError
from .gauss import sigma_p
from .seqspec import Perturbed, Scaled, SequenceSpec, SignedForm

DEFAULT_HORIZON = 10**6
DEFAULT_WINDOW = 10**3
DEFAULT_EPS = 1e-8


class Status(str, Enum):
    CONVERGES = "converges"
    DIVERGES = "diverges"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ConvergenceVerdict:
    status: Status
    evidence: dict[str, Any] = field(default_factory=dict)
    analytic: str | None = None

    def __post_init__(self):
        if self.analytic is not None and self.status is Status.INCONCLUSIVE:
            raise ValueError("analytic verdicts must be decisive")

    @property
    def converges(self) -> bool:
        return self.status is Status.CONVERGES

    @property
    def diverges(self) -> bool:
        return self.status is Status.DIVERGES

    def to_dict(self) -> dict[str, Any]:
        return {"status": self.status.value, "analytic": self.analytic, "evidence": self.evidence}


def _analytic(ok: bool, tag: str, **evidence) -> ConvergenceVerdict:
    return ConvergenceVerdict(Status.CONVERGES if ok else Status.DIVERGES, evidence, tag)


# closed-form catalogue ---------------------------------------------------


def _form_sum(d: SignedForm) -> tuple[bool, str]:
    if d.const != 0.0:
        return False, "nonzero_limit"
    if d.coef == 0.0:
        return True, "eventually_zero"
    if d.alternating:
        return d.power > 0, "alternating_series_test" if d.power > 0 else "nonvanishing_terms"
    return d.power > 1, "p_series"


def _form_squares(d: SignedForm) -> tuple[bool, str]:
    if d.const != 0.0:
        return False, "nonzero_limit"
    if d.coef == 0.0:
        return True, "eventually_zero"
    return 2.0 * d.power > 1, "p_series"


def _form_abs(d: SignedForm) -> tuple[bool, str]:
    if d.const != 0.0:
        return False, "nonzero_limit"
    if d.coef == 0.0:
        return True, "eventually_zero"
    return d.power > 1, "p_series"


def _form_product(d: SignedForm) -> tuple[bool, str]:
    # log(1 + c d) = c d - c^2 d^2 / 2 + O(|d|^3) once |d| < 1
    s, _ = _form_sum(d)
    q, _ = _form_squares(d)
    return s and q, "log_expansion"


def _safe_start(d: SignedForm, bound: float) -> int | None:
    """First index beyond which ``|d_n| < bound`` is guaranteed."""
    c = abs(d.const)
    if c >= bound:
        return None
    h = len(d.head)
    if d.coef == 0.0:
        return h
    if d.power == 0:
        return h if c + abs(d.coef) < bound else None
    n = math.floor((abs(d.coef) / (bound - c)) ** (1.0 / d.power))
    return max(h, n)


# heuristic ---------------------------------------------------------------


def _check_window(horizon: int, window: int, eps: float) -> None:
    if window < 2 or horizon < 2 * window:
        raise ConfigError("need window >= 2 and horizon >= 2 * window")
    if not eps > 0:
        raise ConfigError("eps must be positive")


def _series_verdict(x: np.ndarray, window: int, eps: float) -> ConvergenceVerdict:
    """Windowed Cauchy heuristic on the partial sums of ``x``."""
    horizon = len(x)
    if not np.all(np.isfinite(x)):
        return ConvergenceVerdict(Status.DIVERGES, {"reason": "non_finite_terms", "horizon": horizon})
    S = np.cumsum(x)
    # averaging neighbours removes the leading oscillation of alternating sums
    A = 0.5 * (S[:-1] + S[1:])
    last = A[-window:]
    osc = float(np.max(last) - np.min(last))
    drift = float(last[-1] - last[0])
    steps = np.diff(last)
    monotone = bool(np.all(steps >= 0) or np.all(steps <= 0))
    early = float(np.max(np.abs(x[:window])))
    late = float(np.max(np.abs(x[-window:])))
    ev = {
        "horizon": horizon,
        "window": window,
        "eps": eps,
        "oscillation": osc,
        "drift": drift,
        "monotone": monotone,
        "last_value": float(A[-1]),
        "early_max_term": early,
        "late_max_term": late,
    }
    if late > eps and late > 0.5 * early:
        ev["reason"] = "terms_not_vanishing"
        return ConvergenceVerdict(Status.DIVERGES, ev)
    if osc < eps:
        ev["reason"] = "window_oscillation_below_eps"
        return ConvergenceVerdict(Status.CONVERGES, ev)
    if monotone and abs(drift) > eps * window:
        ev["reason"] = "monotone_drift"
        return ConvergenceVerdict(Status.DIVERGES, ev)
    ev["reason"] = "undecided"
    return ConvergenceVerdict(Status.INCONCLUSIVE, ev)


def _finite_verdict(length: int) -> ConvergenceVerdict:
    return ConvergenceVerdict(Status.CONVERGES, {"length": length}, "finite_list")


# ratio sequences ---------------------------------------------------------


def _unscale(s: SequenceSpec) -> SequenceSpec:
    while isinstance(s, Scaled):
        s = s.base
    return s


def _recognise(a: SequenceSpec, b: SequenceSpec, q: float) -> SignedForm | None:
    ca, cb = _unscale(a), _unscale(b)
    if ca == cb:
        return SignedForm()
    if not isinstance(ca, Perturbed) or _unscale(ca.base) != cb:
        return None
    d = ca.deviation
    if ca.match_norm == q:
        kappa = 1.0
        head = [-float(h) for h in d.head] or [0.0]
        head[0] = 1.0 - ca.first_term / ca.base.term(1)
    else:
        kappa = ca.base.norm(q) / ca.norm(q)
        head = [1.0 - kappa * (1.0 + h) for h in d.head]
    return SignedForm(
        coef=-kappa * d.coef,
        power=d.power,
        alternating=d.alternating,
        const=1.0 - kappa * (1.0 + d.const),
        head=tuple(head),
    )


@dataclass(frozen=True)
class RatioSequence:
    """``rho_n = (a_n / ||a||_q) / (b_n / ||b||_q)`` and ``deviation_n = 1 - rho_n``.

    Either built from two sequences (``q = 2`` by default) or directly from a
    closed-form deviation.  ``form`` is set whenever the deviation is
    recognised in closed form.
    """

    a: SequenceSpec | None = None
    b: SequenceSpec | None = None
    q: float = 2.0
    form: SignedForm | None = None
    prefix: int = 10_000

    def __post_init__(self):
        if self.a is None and self.b is None:
            if self.form is None:
                raise ConfigError("need sequences a, b or a deviation form")
        elif self.a is None or self.b is None:
            raise ConfigError("need both sequences a and b")
        elif self.form is None:
            object.__setattr__(self, "form", _recognise(self.a, self.b, self.q))
        if self.form is not None:
            # rho_n <= 0 is tolerated only at finitely many leading indices,
            # which the product checkers then drop
            d = self.form.terms(np.arange(1, self.prefix + 1))
            bad = np.nonzero(d >= 1.0)[0]
            n0 = _safe_start(self.form, 1.0)
            if n0 is None or (bad.size and bad[-1] + 1 > n0):
                raise NonpositiveFactorError("deviation >= 1 makes rho_n non-positive")

    @classmethod
    def from_deviation(cls, form: SignedForm) -> "RatioSequence":
        return cls(form=form)

    @property
    def length(self) -> int | None:
        if self.a is None:
            return None
        la, lb = self.a.length, self.b.length
        if la is None:
            return lb
        return la if lb is None else min(la, lb)

    @property
    def norms(self) -> tuple[float, float] | None:
        if self.a is None:
            return None
        return self.a.norm(self.q), self.b.norm(self.q)

    def log_rho(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        if self.form is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.log1p(-self.form.terms(n))
        na, nb = self.norms
        return self.a.log_terms(n) - math.log(na) - self.b.log_terms(n) + math.log(nb)

    def rho(self, n) -> np.ndarray:
        return np.exp(self.log_rho(n))

    def deviation(self, n) -> np.ndarray:
        if self.form is not None:
            return self.form.terms(np.asarray(n, dtype=np.int64))
        return -np.expm1(self.log_rho(n))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"q": self.q}
        if self.a is not None:
            out["a"] = self.a.to_dict()
            out["b"] = self.b.to_dict()
        if self.form is not None:
            out["deviation_form"] = self.form.to_dict()
        return out


def _log_factors(rs: RatioSequence, horizon: int, which: str) -> tuple[np.ndarray, list[int]]:
    """``log(2 - rho_n)`` or ``log(2 - 1/rho_n)`` with droppable leading factors removed."""
    n = np.arange(1, horizon + 1)
    lr = rs.log_rho(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = 2.0 - np.exp(lr) if which == "a_vs_b" else 2.0 - np.exp(-lr)
    bad = np.nonzero(~(f > 0))[0]
    dropped: list[int] = []
    if bad.size:
        # for closed forms |d_n| < 1/2 beyond n0 keeps both factors positive, so
        # finitely many leading non-positive factors do not affect convergence
        n0 = _safe_start(rs.form, 0.5) if rs.form is not None else None
        if n0 is None or bad[-1] + 1 > n0:
            k = int(bad[0]) + 1
            raise NonpositiveFactorError(f"factor {which} at n={k} is {f[k - 1]:.6g} <= 0")
        dropped = [int(i) + 1 for i in bad]
        f[bad] = 1.0
    return np.log(f), dropped


def check_condition_21(
    rs: RatioSequence,
    horizon: int = DEFAULT_HORIZON,
    window: int = DEFAULT_WINDOW,
    eps: float = DEFAULT_EPS,
    analytic: bool = True,
) -> tuple[ConvergenceVerdict, ConvergenceVerdict]:
    """Convergence of ``prod (2 - rho_n)`` and ``prod (2 - 1/rho_n)``."""
    _check_window(horizon, window, eps)
    L = rs.length
    if L is not None:
        if L < 1:
            raise ConfigError("empty sequences")
        _log_factors(rs, L, "a_vs_b")
        _log_factors(rs, L, "b_vs_a")
        return _finite_verdict(L), _finite_verdict(L)
    out = []
    for which in ("a_vs_b", "b_vs_a"):
        logs, dropped = _log_factors(rs, horizon, which)
        if analytic and rs.form is not None:
            ok, _ = _form_product(rs.form)
            out.append(_analytic(ok, "product_iff_series_and_squares", dropped_factors=dropped))
        else:
            v = _series_verdict(logs, window, eps)
            v.evidence["dropped_factors"] = dropped
            out.append(v)
    return out[0], out[1]


def check_condition_22(
    rs: RatioSequence,
    horizon: int = DEFAULT_HORIZON,
    window: int = DEFAULT_WINDOW,
    eps: float = DEFAULT_EPS,
    analytic: bool = True,
) -> tuple[ConvergenceVerdict, ConvergenceVerdict]:
    """Convergence of ``sum deviation_n`` and ``sum deviation_n**2``."""
    _check_window(horizon, window, eps)
    L = rs.length
    if L is not None:
        return _finite_verdict(L), _finite_verdict(L)
    if analytic and rs.form is not None:
        s_ok, s_tag = _form_sum(rs.form)
        q_ok, q_tag = _form_squares(rs.form)
        return _analytic(s_ok, s_tag), _analytic(q_ok, q_tag)
    d = rs.deviation(np.arange(1, horizon + 1))
    return _series_verdict(d, window, eps), _series_verdict(d * d, window, eps)


def check_condition_26(
    a: SequenceSpec,
    b: SequenceSpec,
    p: float,
    beta: float = 1.0,
    horizon: int = DEFAULT_HORIZON,
    window: int = DEFAULT_WINDOW,
    eps: float = DEFAULT_EPS,
    analytic: bool = True,
) -> ConvergenceVerdict:
    """Absolute convergence of ``sum |1 - (a_n / sigma_a^p) / (b_n / sigma_b^p)|``.

    ``sigma^p`` equals ``beta^p`` times the ``2/(2-p)``-norm, so the
    normalisation reduces to a ratio sequence in that norm.
    """
    _check_window(horizon, window, eps)
    sigma_p(a, beta, p)
    sigma_p(b, beta, p)
    rs = RatioSequence(a, b, q=2.0 / (2.0 - p))
    L = rs.length
    if L is not None:
        return _finite_verdict(L)
    if analytic and rs.form is not None:
        ok, tag = _form_abs(rs.form)
        return _analytic(ok, tag)
    d = np.abs(rs.deviation(np.arange(1, horizon + 1)))
    return _series_verdict(d, window, eps)


@dataclass(frozen=True)
class WermuthReport:
    product_plus: ConvergenceVerdict
    product_minus: ConvergenceVerdict
    series: ConvergenceVerdict
    squares: ConvergenceVerdict
    inconsistent: bool

    @property
    def verdicts(self) -> tuple[ConvergenceVerdict, ...]:
        return (self.product_plus, self.product_minus, self.series, self.squares)

    def to_dict(self) -> dict[str, Any]:
        return {
            "product_plus": self.product_plus.to_dict(),
            "product_minus": self.product_minus.to_dict(),
            "series": self.series.to_dict(),
            "squares": self.squares.to_dict(),
            "inconsistent": self.inconsistent,
        }


def _inconsistent(vs: Sequence[ConvergenceVerdict]) -> bool:
    conv = sum(v.converges for v in vs)
    return conv >= 2 and any(v.diverges for v in vs)


def _product_terms(x: np.ndarray, sign: float, n0: int | None) -> tuple[np.ndarray, list[int]]:
    f = 1.0 + sign * x
    bad = np.nonzero(~(f > 0))[0]
    dropped: list[int] = []
    if bad.size:
        zero = bad[f[bad] == 0]
        if n0 is None or bad[-1] + 1 > n0:
            k = int((zero if zero.size else bad)[0]) + 1
            kind = "zero" if zero.size else "negative"
            raise ZeroFactorError(f"1 {'+' if sign > 0 else '-'} x_n is {kind} at n={k}")
        dropped = [int(i) + 1 for i in bad]
        f[bad] = 1.0
    return np.log(f), dropped


def wermuth_relations(
    x: SignedForm | Sequence[float],
    horizon: int = DEFAULT_HORIZON,
    window: int = DEFAULT_WINDOW,
    eps: float = DEFAULT_EPS,
    analytic: bool = True,
) -> WermuthReport:
    """Verdicts for ``prod(1 + x)``, ``prod(1 - x)``, ``sum x`` and ``sum x**2``.

    ``inconsistent`` is raised when two or more are judged convergent while
    another is judged divergent, which no sequence with ``|x_n| < 1``
    eventually can do.  It signals a heuristic failure and is reported as-is.
    """
    _check_window(horizon, window, eps)
    if not isinstance(x, SignedForm):
        vals = np.asarray(x, dtype=float)
        if vals.ndim != 1 or vals.size == 0:
            raise ConfigError("explicit sequence must be a non-empty list")
        for s in (1.0, -1.0):
            _product_terms(vals, s, None)
        v = _finite_verdict(vals.size)
        return WermuthReport(v, v, v, v, False)

    n = np.arange(1, horizon + 1)
    xs = x.terms(n)
    n0 = _safe_start(x, 1.0)
    logs_p, drop_p = _product_terms(xs, 1.0, n0)
    logs_m, drop_m = _product_terms(xs, -1.0, n0)
    if analytic:
        ok_p, _ = _form_product(x)
        neg = SignedForm(-x.coef, x.power, x.alternating, -x.const, tuple(-h for h in x.head))
        ok_m, _ = _form_product(neg)
        s_ok, s_tag = _form_sum(x)
        q_ok, q_tag = _form_squares(x)
        vs = [
            _analytic(ok_p, "product_iff_series_and_squares", dropped_factors=drop_p),
            _analytic(ok_m, "product_iff_series_and_squares", dropped_factors=drop_m),
            _analytic(s_ok, s_tag),
            _analytic(q_ok, q_tag),
        ]
    else:
        vs = [
            _series_verdict(logs_p, window, eps),
            _series_verdict(logs_m, window, eps),
            _series_verdict(xs, window, eps),
            _series_verdict(xs * xs, window, eps),
        ]
        vs[0].evidence["dropped_factors"] = drop_p
        vs[1].evidence["dropped_factors"] = drop_m
    return WermuthReport(*vs, inconsistent=_inconsistent(vs))


"""``seriestail`` command line.

Every subcommand reads one JSON config (optional for ``check`` and
``proofcheck``), applies flag overrides, and writes a report that embeds the
fully resolved config.  Exit codes: 0 clean run, 1 a hypothesis failed or a
counterexample was found, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import conditions as cond
from . import mc
from .errors import ConfigError, SeriesTailError
from .gauss import GaussianParams, lifshits_log_tail, scaled_threshold
from .laws import FoldedGaussian, TailLaw, law_from_dict
from .ldp import log_tail_asymptote
from .proofcheck import PiecewiseFunction, check_lemma_22, check_lemma_23, check_lemma_24
from .seqspec import SequenceSpec, deviation_from_dict, sequence_from_dict

SEED_ENV = "SERIESTAIL_SEED"
METHODS = ("lifshits", "mc_is", "mc_naive", "ldp")
TABLE_COLUMNS = ("r", "method", "series", "threshold", "log_p", "ci_low", "ci_high", "ratio", "verdict", "n_terms")


class UsageError(Exception):
    pass


# config -------------------------------------------------------------------


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return mc.SamplerConfig().seed
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _resolve(cfg: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    cfg = json.loads(json.dumps(cfg))
    if getattr(args, "r", None) is not None:
        cfg["r_grid"] = args.r
    sampler = dict(cfg.get("sampler", {}))
    sampler.setdefault("seed", _default_seed())
    if getattr(args, "seed", None) is not None:
        sampler["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        sampler["n_samples"] = args.samples
    cfg["sampler"] = sampler
    return cfg


def _r_grid(cfg: dict[str, Any]) -> list[float]:
    grid = cfg.get("r_grid")
    if not isinstance(grid, list) or not grid:
        raise UsageError("r_grid must be a non-empty list")
    grid = [float(r) for r in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("r_grid must be strictly increasing")
    if any(not r > 0 for r in grid):
        raise UsageError("r_grid entries must be positive")
    return grid


def _methods(cfg: dict[str, Any], default: Sequence[str]) -> list[str]:
    ms = cfg.get("methods", list(default))
    if not isinstance(ms, list) or not ms:
        raise UsageError("methods must be a non-empty list")
    bad = [m for m in ms if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {list(METHODS)}")
    return ms


def _spec(cfg: dict[str, Any], key: str) -> SequenceSpec:
    if key not in cfg:
        raise UsageError(f"config needs '{key}'")
    return sequence_from_dict(cfg[key])


def _law(cfg: dict[str, Any]) -> TailLaw:
    if "law" not in cfg:
        raise UsageError("config needs 'law'")
    return law_from_dict(cfg["law"])


def _gaussian(law: TailLaw) -> GaussianParams | None:
    return GaussianParams(law.alpha, law.beta) if isinstance(law, FoldedGaussian) else None


def _sampler(cfg: dict[str, Any]) -> mc.SamplerConfig:
    return mc.SamplerConfig.from_dict(cfg["sampler"])


def _cond_kwargs(cfg: dict[str, Any]) -> dict[str, Any]:
    c = cfg.get("conditions", {})
    return {
        "horizon": int(c.get("horizon", cond.DEFAULT_HORIZON)),
        "window": int(c.get("window", cond.DEFAULT_WINDOW)),
        "eps": float(c.get("eps", cond.DEFAULT_EPS)),
    }


# evaluation helpers --------------------------------------------------------


def _row(**kw) -> dict[str, Any]:
    row = {c: None for c in TABLE_COLUMNS}
    row.update(kw)
    return row


def _evaluate(method, spec, law, r, scfg, tol) -> dict[str, Any]:
    """One log-tail value at threshold ``r``."""
    if method == "lifshits":
        params = _gaussian(law)
        if params is None:
            raise UsageError("method lifshits needs a folded_gaussian law")
        lp = lifshits_log_tail(spec, params, r, tol)
        return dict(
            log_p=lp.value,
            ci_low=lp.value - lp.tail_halfwidth,
            ci_high=lp.value + lp.tail_halfwidth,
            n_terms=lp.n_terms,
        )
    if method == "ldp":
        return dict(log_p=log_tail_asymptote(spec, law, r))
    if method == "mc_is":
        est = mc.sample_best(law, spec, r, scfg)
    else:
        est = mc.sample_naive(law, spec, r, scfg)
    return dict(
        log_p=est.log_p_hat,
        ci_low=est.ci_low,
        ci_high=est.ci_high,
        n_terms=est.n_terms,
        estimator=est.method,
        theta=est.theta,
        ess=est.ess,
        hits=est.hits,
        trunc_bound=est.trunc_bound,
    )


def _truncation_info(specs: dict[str, SequenceSpec], law: TailLaw, scfg, methods) -> dict[str, Any]:
    if not any(m.startswith("mc_") for m in methods):
        return {}
    out = {}
    for name, s in specs.items():
        N, tb = mc.truncation(s, law, scfg)
        out[name] = {"n_terms": N, "trunc_bound": tb}
    return out


# subcommands --------------------------------------------------------------


def cmd_eval(cfg: dict[str, Any]) -> tuple[dict[str, Any], int]:
    spec = _spec(cfg, "a")
    law = _law(cfg)
    grid = _r_grid(cfg)
    methods = _methods(cfg, ["lifshits"] if _gaussian(law) else ["ldp"])
    scfg = _sampler(cfg)
    tol = float(cfg.get("tol", 1e-10))
    rows = []
    for r in grid:
        for m in methods:
            vals = _evaluate(m, spec, law, r, scfg, tol)
            rows.append(_row(r=r, method=m, series="a", threshold=r, **vals))
    cfg["truncation"] = _truncation_info({"a": spec}, law, scfg, methods)
    return {"command": "eval", "config": cfg, "rows": rows}, 0


def _log_ratio_interval(va, vb) -> tuple[float, float, float]:
    """``P_a / P_b`` with a conservative interval from the two log intervals."""
    d = va["log_p"] - vb["log_p"]
    hw = math.hypot(
        0.5 * (va["ci_high"] - va["ci_low"]) if va.get("ci_high") is not None else 0.0,
        0.5 * (vb["ci_high"] - vb["ci_low"]) if vb.get("ci_high") is not None else 0.0,
    )
    return math.exp(d), math.exp(d - hw), math.exp(d + hw)


def _verdicts(a, b, law, ck) -> tuple[dict[str, Any], str, int]:
    if _gaussian(law) is not None:
        rs = cond.RatioSequence(a, b)
        c21 = cond.check_condition_21(rs, **ck)
        c22 = cond.check_condition_22(rs, **ck)
        v = {
            "product_a_vs_b": c21[0].to_dict(),
            "product_b_vs_a": c21[1].to_dict(),
            "deviation_series": c22[0].to_dict(),
            "deviation_squares": c22[1].to_dict(),
        }
        summary = "product=%s/%s;series=%s/%s" % tuple(x.status.value for x in (*c21, *c22))
        bad = any(x.diverges for x in (*c21, *c22))
        return v, summary, int(bad)
    power = min(2.0, law.q)
    ok = a.converges(power) and b.converges(power)
    v = {"summability": {"power": power, "status": "converges" if ok else "diverges"}}
    return v, f"summability={'converges' if ok else 'diverges'}", int(not ok)


def cmd_compare(cfg: dict[str, Any]) -> tuple[dict[str, Any], int]:
    a, b = _spec(cfg, "a"), _spec(cfg, "b")
    law = _law(cfg)
    grid = _r_grid(cfg)
    params = _gaussian(law)
    methods = _methods(cfg, ["lifshits"] if params else ["ldp"])
    scfg = _sampler(cfg)
    tol = float(cfg.get("tol", 1e-10))
    verdicts, summary, code = _verdicts(a, b, law, _cond_kwargs(cfg))
    if params is not None:
        header = {
            "scaling": "r*||.||_2*beta + |alpha|*sum",
            "ratio": "P_a / P_b",
            "hypotheses": (
                "product verdicts support exact-level comparison for centred Gaussians; "
                "series verdicts support it for general Gaussians"
            ),
        }
    else:
        header = {
            "scaling": f"r*||.||_q with q={law.q}",
            "ratio": "log P_a / log P_b",
            "hypotheses": "summability verdict supports log-level comparison",
        }
    rows = []
    for r in grid:
        if params is not None:
            ta, tb = scaled_threshold(a, params, r), scaled_threshold(b, params, r)
        else:
            ta, tb = r * a.norm(law.q), r * b.norm(law.q)
        for m in methods:
            va = _evaluate(m, a, law, ta, scfg, tol)
            vb = _evaluate(m, b, law, tb, scfg, tol)
            if params is not None:
                ratio, lo, hi = _log_ratio_interval(va, vb)
            else:
                ratio = va["log_p"] / vb["log_p"] if vb["log_p"] else float("nan")
                lo = hi = None
                if va.get("ci_high") is not None:
                    corners = [x / y for x in (va["ci_low"], va["ci_high"]) for y in (vb["ci_low"], vb["ci_high"])]
                    lo, hi = min(corners), max(corners)
            rows.append(_row(r=r, method=m, series="a", threshold=ta, **va))
            rows.append(_row(r=r, method=m, series="b", threshold=tb, **vb))
            rows.append(
                _row(r=r, method=m, series="a/b", ratio=ratio, ratio_low=lo, ratio_high=hi, verdict=summary)
            )
    cfg["truncation"] = _truncation_info({"a": a, "b": b}, law, scfg, methods)
    return {"command": "compare", "config": cfg, "header": header, "verdicts": verdicts, "rows": rows}, code


def _check_rows(named: dict[str, cond.ConvergenceVerdict]) -> list[dict[str, Any]]:
    return [
        {"check": k, "status": v.status.value, "analytic": v.analytic, "reason": v.evidence.get("reason")}
        for k, v in named.items()
    ]


def cmd_check(cfg: dict[str, Any]) -> tuple[dict[str, Any], int]:
    ck = _cond_kwargs(cfg)
    named: dict[str, cond.ConvergenceVerdict] = {}
    extra: dict[str, Any] = {}
    code = 0
    if "deviation" in cfg:
        form = deviation_from_dict(cfg["deviation"])
        rs = cond.RatioSequence.from_deviation(form)
        w = cond.wermuth_relations(form, **ck)
        extra["four_expressions_inconsistent"] = w.inconsistent
        code = int(w.inconsistent)
        named.update(
            {
                "product_plus": w.product_plus,
                "product_minus": w.product_minus,
            }
        )
    elif "a" in cfg and "b" in cfg:
        a, b = _spec(cfg, "a"), _spec(cfg, "b")
        rs = cond.RatioSequence(a, b)
        if "p" in cfg:
            beta = float(cfg.get("beta", 1.0))
            named["absolute_deviation_sigma"] = cond.check_condition_26(a, b, float(cfg["p"]), beta, **ck)
    else:
        raise UsageError("check needs 'deviation' or both 'a' and 'b'")
    c21 = cond.check_condition_21(rs, **ck)
    c22 = cond.check_condition_22(rs, **ck)
    named = {
        "product_a_vs_b": c21[0],
        "product_b_vs_a": c21[1],
        "deviation_series": c22[0],
        "deviation_squares": c22[1],
        **named,
    }
    if any(v.diverges for v in named.values()):
        code = 1
    report = {
        "command": "check",
        "config": cfg,
        "ratio": rs.to_dict(),
        "verdicts": {k: v.to_dict() for k, v in named.items()},
        "rows": _check_rows(named),
        **extra,
    }
    return report, code


def _random_lemma22(rng: np.random.Generator) -> tuple:
    L = int(rng.integers(5, 400))
    n = np.arange(1, L + 1)
    c = rng.standard_normal(L) / n ** rng.uniform(0.6, 2.0)
    d = np.sort(rng.uniform(0, 5, L))
    if rng.random() < 0.5:
        d = d[::-1]
    k = int(rng.integers(1, 21))
    x = np.sort(rng.uniform(0, 6, k + 1))
    x = np.unique(x)
    g = PiecewiseFunction(tuple(x), tuple(rng.uniform(-3, 3, len(x))))
    N = int(rng.integers(1, L + 1))
    return c, g, d, N


def cmd_proofcheck(cfg: dict[str, Any]) -> tuple[dict[str, Any], int]:
    lemma = cfg.get("lemma", "lemma23")
    rows: list[dict[str, Any]] = []
    columns: list[str] = []
    if lemma == "lemma22":
        count = int(cfg.get("instances", 1000))
        rng = np.random.default_rng(int(cfg["sampler"]["seed"]))
        failures = 0
        worst = math.inf
        for i in range(count):
            res = check_lemma_22(*_random_lemma22(rng))
            worst = min(worst, res.slack)
            failures += not res.holds
            if not res.holds:
                rows.append({"instance": i, **res.to_dict()})
        columns = ["instance", "holds", "left", "right", "slack"]
        summary = {"instances": count, "failures": failures, "min_slack": worst}
        code = int(failures > 0)
    elif lemma == "lemma23":
        rep = check_lemma_23(cfg.get("a_grid"), cfg.get("delta_grid"))
        rows = [v.to_dict() for v in rep.violations]
        columns = ["a", "delta", "gap"]
        summary = {"n_points": rep.n_points, "violations": len(rep.violations)}
        summary["valid_range"] = rep.to_dict()["valid_range"]
        code = int(not rep.clean)
    elif lemma == "lemma24":
        sigmas = [float(s) for s in cfg.get("sigmas", [1, 2, 5, 10])]
        reps = [check_lemma_24(s, delta_grid=cfg.get("delta_grid"), gamma_grid=cfg.get("gamma_grid")) for s in sigmas]
        rows = [{"sigma": r.sigma, "lambda_hat": r.lambda_hat} for r in reps]
        lams = [r.lambda_hat for r in reps]
        order = np.argsort(sigmas)
        mono = all(lams[i] >= lams[j] for i, j in zip(order, order[1:]))
        summary = {"reports": [r.to_dict() for r in reps], "non_increasing": mono}
        code = int(not mono)
    else:
        raise UsageError(f"unknown lemma {lemma!r}; choose lemma22, lemma23 or lemma24")
    cfg["lemma"] = lemma
    report = {"command": "proofcheck", "config": cfg, "summary": summary, "rows": rows, "columns": columns}
    return report, code


def cmd_simulate(cfg: dict[str, Any]) -> tuple[dict[str, Any], int]:
    spec = _spec(cfg, "a")
    law = _law(cfg)
    grid = _r_grid(cfg)
    methods = _methods(cfg, ["mc_is"])
    if any(not m.startswith("mc_") for m in methods):
        raise UsageError("simulate only runs mc_is and mc_naive")
    scfg = _sampler(cfg)
    rows, workers = [], []
    for r in grid:
        for m in methods:
            est = mc.sample_best(law, spec, r, scfg) if m == "mc_is" else mc.sample_naive(law, spec, r, scfg)
            d = est.to_dict(with_workers=True)
            for i, w in enumerate(d.pop("workers")):
                workers.append({"r": r, "method": m, "worker": i, **w})
            rows.append(
                _row(
                    r=r,
                    method=m,
                    series="a",
                    threshold=est.threshold,
                    log_p=est.log_p_hat,
                    ci_low=est.ci_low,
                    ci_high=est.ci_high,
                    n_terms=est.n_terms,
                    estimator=est.method,
                    theta=est.theta,
                    ess=est.ess,
                    hits=est.hits,
                    trunc_bound=est.trunc_bound,
                )
            )
    cfg["truncation"] = _truncation_info({"a": spec}, law, scfg, methods)
    return {"command": "simulate", "config": cfg, "rows": rows, "workers": workers}, 0


def cmd_slope(cfg: dict[str, Any]) -> tuple[dict[str, Any], int]:
    spec = _spec(cfg, "a")
    law = _law(cfg)
    grid = _r_grid(cfg)
    scfg = _sampler(cfg)
    fit = mc.empirical_log_slope(law, spec, grid, scfg)
    rows = [
        _row(r=r, method=e.method, series="a", threshold=e.threshold, log_p=e.log_p_hat,
             ci_low=e.ci_low, ci_high=e.ci_high, n_terms=e.n_terms, residual=res)
        for r, e, res in zip(fit.r_grid, fit.estimates, fit.residuals)
    ]
    summary = {
        "c_eff": fit.c_eff,
        "intercept": fit.intercept,
        "target": fit.target,
        "rel_error": fit.rel_error,
        "p": fit.p,
    }
    cfg["truncation"] = _truncation_info({"a": spec}, law, scfg, ["mc_is"])
    return {"command": "slope", "config": cfg, "summary": summary, "rows": rows}, 0


COMMANDS = {
    "eval": cmd_eval,
    "compare": cmd_compare,
    "check": cmd_check,
    "simulate": cmd_simulate,
    "slope": cmd_slope,
    "proofcheck": cmd_proofcheck,
}


# output -------------------------------------------------------------------


def to_json(report: dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return json.dumps(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def to_csv(report: dict[str, Any]) -> str:
    buf = io.StringIO()
    buf.write("# config " + json.dumps(report["config"], sort_keys=True) + "\n")
    rows = report.get("rows", [])
    cols: list[str] = list(report.get("columns", []))
    base = TABLE_COLUMNS if rows and "method" in rows[0] else ()
    for c in base:
        cols.append(c)
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seriestail", description="Tail asymptotics for weighted series")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="JSON config file")
        sp.add_argument("--r", type=lambda s: [float(x) for x in s.split(",") if x], help="comma-separated r grid")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--samples", type=int)
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if name == "check":
            sp.add_argument("--deviation", help="deviation kind, e.g. alternating_harmonic")
        if name == "proofcheck":
            sp.add_argument("--lemma", choices=("lemma22", "lemma23", "lemma24"))
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = _load_config(args.config)
        if args.config is None and args.command not in ("check", "proofcheck"):
            raise UsageError(f"{args.command} needs a config file")
        if getattr(args, "deviation", None):
            raw["deviation"] = json.loads(args.deviation) if args.deviation.startswith("{") else {"kind": args.deviation}
        if getattr(args, "lemma", None):
            raw["lemma"] = args.lemma
        cfg = _resolve(raw, args)
        report, code = COMMANDS[args.command](cfg)
    except (UsageError, SeriesTailError, ConfigError, KeyError, TypeError, ValueError) as exc:
        name = getattr(exc, "code", None) or type(exc).__name__
        print(f"seriestail {args.command}: {name}: {exc}", file=sys.stderr)
        return 2
    text = to_csv(report) if args.format == "csv" else to_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import mpmath as mp
import pytest

from seriestail.cli import TABLE_COLUMNS, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GEOM = {"family": "geometric", "rho": 0.5}
GAUSS = {"name": "folded_gaussian", "alpha": 0.0, "beta": 1.0}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, (json.loads(out) if out else None), err


class TestEval:
    def test_single_gaussian_r6(self, capsys):
        code, rep, _ = run_json(capsys, "eval", str(CONFIGS / "eval_single_gaussian.json"))
        assert code == 0
        (row,) = rep["rows"]
        expect = float(mp.log(2 * mp.ncdf(6) * mp.ncdf(-6)))
        assert row["r"] == 6.0 and row["method"] == "lifshits"
        assert row["log_p"] == pytest.approx(expect, abs=1e-10)

    def test_exponential_ldp(self, capsys):
        code, rep, _ = run_json(capsys, "eval", str(CONFIGS / "eval_exponential_ldp.json"))
        assert code == 0
        ldp = [r for r in rep["rows"] if r["method"] == "ldp"][0]
        assert ldp["log_p"] == -10.0
        mcis = [r for r in rep["rows"] if r["method"] == "mc_is"][0]
        assert mcis["ci_low"] <= -10.0 <= mcis["ci_high"]

    def test_empty_grid_flag(self, capsys):
        code, out, err = run(capsys, "eval", str(CONFIGS / "eval_single_gaussian.json"), "--r", "")
        assert code == 2 and out == ""
        assert "r_grid" in err and err.startswith("seriestail eval:")

    def test_empty_grid_config(self, capsys, tmp_path):
        path = write(tmp_path, {"a": GEOM, "law": GAUSS, "r_grid": []})
        assert run(capsys, "eval", path)[0] == 2

    @pytest.mark.parametrize(
        "cfg",
        [
            {"a": GEOM, "r_grid": [1.0]},
            {"a": GEOM, "law": GAUSS, "r_grid": [2.0, 1.0]},
            {"a": GEOM, "law": GAUSS, "r_grid": [1.0], "methods": ["magic"]},
            {"a": {"family": "nope"}, "law": GAUSS, "r_grid": [1.0]},
            {"a": GEOM, "law": {"name": "exponential"}, "r_grid": [1.0], "methods": ["lifshits"]},
            {"a": GEOM, "law": GAUSS, "r_grid": [1.0], "sampler": {"bogus": 1}},
        ],
    )
    def test_config_errors(self, capsys, tmp_path, cfg):
        code, out, err = run(capsys, "eval", write(tmp_path, cfg))
        assert code == 2 and out == "" and err

    def test_missing_file(self, capsys):
        assert run(capsys, "eval", "/nonexistent/cfg.json")[0] == 2

    def test_r_override(self, capsys):
        code, rep, _ = run_json(capsys, "eval", str(CONFIGS / "eval_single_gaussian.json"), "--r", "1,2,4")
        assert [r["r"] for r in rep["rows"]] == [1.0, 2.0, 4.0]
        assert rep["config"]["r_grid"] == [1.0, 2.0, 4.0]


class TestCompare:
    def test_identical_series(self, capsys, tmp_path):
        cfg = {"a": GEOM, "b": GEOM, "law": GAUSS, "r_grid": [2.0, 4.0], "methods": ["lifshits", "mc_is"],
               "sampler": {"n_samples": 5000}}
        code, rep, _ = run_json(capsys, "compare", write(tmp_path, cfg))
        assert code == 0
        ratios = [r["ratio"] for r in rep["rows"] if r["series"] == "a/b"]
        assert ratios == [1.0] * 4

    def test_gaussian_pair(self, capsys):
        code, rep, _ = run_json(capsys, "compare", str(CONFIGS / "compare_gaussian_geometric.json"))
        assert code == 0
        ratios = [r["ratio"] for r in rep["rows"] if r["series"] == "a/b"]
        dev = [abs(x - 1) for x in ratios]
        assert all(b < a for a, b in zip(dev, dev[1:]))
        assert dev[-1] <= 0.05
        assert "hypotheses" in rep["header"]
        assert rep["verdicts"]["deviation_series"]["status"] == "converges"

    def test_unmatched_pair_fails_hypotheses(self, capsys, tmp_path):
        cfg = json.loads((CONFIGS / "compare_gaussian_geometric.json").read_text())
        del cfg["a"]["match_norm"]
        code, rep, _ = run_json(capsys, "compare", write(tmp_path, cfg))
        assert code == 1
        assert rep["verdicts"]["deviation_series"]["status"] == "diverges"

    def test_exponential_pair(self, capsys):
        code, rep, _ = run_json(capsys, "compare", str(CONFIGS / "compare_exponential_geometric.json"))
        assert code == 0
        ldp = [r["ratio"] for r in rep["rows"] if r["series"] == "a/b" and r["method"] == "ldp"]
        assert ldp == pytest.approx([1.0, 1.0], abs=1e-12)
        mcr = [r for r in rep["rows"] if r["series"] == "a/b" and r["method"] == "mc_is"]
        # at desk scale the log-ratio approaches 1 from below as r grows
        assert mcr[0]["ratio"] < mcr[1]["ratio"] < 1.0
        assert rep["config"]["truncation"]["a"]["n_terms"] > 0


class TestCheck:
    def test_appendix_example(self, capsys):
        code, rep, _ = run_json(capsys, "check", "--deviation", "alternating_harmonic")
        assert code == 0
        v = rep["verdicts"]
        assert v["deviation_series"]["status"] == v["deviation_squares"]["status"] == "converges"
        assert rep["four_expressions_inconsistent"] is False

    def test_config_file(self, capsys):
        code, rep, _ = run_json(capsys, "check", str(CONFIGS / "check_alternating_harmonic.json"))
        assert code == 0

    def test_harmonic_fails(self, capsys):
        code, rep, _ = run_json(capsys, "check", "--deviation", "harmonic")
        assert code == 1
        assert rep["verdicts"]["deviation_series"]["status"] == "diverges"

    def test_json_deviation(self, capsys):
        code, rep, _ = run_json(capsys, "check", "--deviation", '{"kind": "inverse_square", "scale": 0.5}')
        assert code == 0

    def test_pair_with_p(self, capsys, tmp_path):
        b = GEOM
        a = {"family": "perturbed", "base": b, "deviation": {"kind": "inverse_square"}, "match_norm": 4}
        code, rep, _ = run_json(capsys, "check", write(tmp_path, {"a": a, "b": b, "p": 1.5}))
        assert rep["verdicts"]["absolute_deviation_sigma"]["status"] == "converges"

    def test_nothing_to_check(self, capsys):
        assert run(capsys, "check")[0] == 2


class TestProofcheck:
    def test_lemma23(self, capsys):
        code, rep, _ = run_json(capsys, "proofcheck", "--lemma", "lemma23")
        assert code == 0 and rep["summary"]["violations"] == 0

    def test_lemma24(self, capsys):
        code, rep, _ = run_json(capsys, "proofcheck", "--lemma", "lemma24")
        assert code == 0 and rep["summary"]["non_increasing"]
        assert all(r["lambda_hat"] > 0 for r in rep["rows"])

    def test_lemma22(self, capsys):
        code, rep, _ = run_json(capsys, "proofcheck", "--lemma", "lemma22")
        assert code == 0
        assert rep["summary"] == {**rep["summary"], "instances": 1000, "failures": 0}

    def test_lemma23_csv_header_without_rows(self, capsys):
        code, out, _ = run(capsys, "proofcheck", "--lemma", "lemma23", "--format", "csv")
        lines = out.splitlines()
        assert lines[0].startswith("# config ")
        assert lines[1] == "a,delta,gap"


class TestSlope:
    def test_exponential_geometric(self, capsys):
        code, rep, _ = run_json(capsys, "slope", str(CONFIGS / "slope_exponential_geometric.json"))
        assert code == 0
        assert rep["summary"]["c_eff"] == pytest.approx(2.0, rel=0.10)
        assert len(rep["rows"]) == 4


class TestReproducibility:
    def test_byte_identical_reruns(self, capsys, tmp_path):
        for name in ("eval_exponential_ldp.json", "compare_exponential_geometric.json"):
            outs = []
            for i in range(2):
                out = tmp_path / f"{name}.{i}"
                assert main(["compare" if name.startswith("compare") else "eval", str(CONFIGS / name),
                             "--out", str(out), "--samples", "20000"]) == 0
                outs.append(out.read_bytes())
            assert outs[0] == outs[1]

    def test_simulate_reruns(self, capsys, tmp_path):
        cfg = {"a": GEOM, "law": GAUSS, "r_grid": [3.0], "methods": ["mc_is", "mc_naive"],
               "sampler": {"n_samples": 20000, "n_workers": 3}}
        path = write(tmp_path, cfg)
        outs = [run(capsys, "simulate", path)[1] for _ in range(2)]
        assert outs[0] == outs[1]
        rep = json.loads(outs[0])
        assert len(rep["workers"]) == 6

    def test_seed_precedence(self, capsys, tmp_path, monkeypatch):
        cfg = {"a": GEOM, "law": GAUSS, "r_grid": [2.0], "methods": ["mc_naive"], "sampler": {"n_samples": 100}}
        path = write(tmp_path, cfg)
        seed = lambda *extra: run_json(capsys, "simulate", path, *extra)[1]["config"]["sampler"]["seed"]
        assert seed() == 20240601
        monkeypatch.setenv("SERIESTAIL_SEED", "11")
        assert seed() == 11
        cfg["sampler"]["seed"] = 22
        path = write(tmp_path, cfg)
        assert seed() == 22
        assert seed("--seed", "33") == 33
        monkeypatch.setenv("SERIESTAIL_SEED", "x")
        cfg["sampler"].pop("seed")
        path = write(tmp_path, cfg)
        assert run(capsys, "simulate", path)[0] == 2

    def test_csv_matches_json(self, capsys):
        cfgp = str(CONFIGS / "compare_exponential_geometric.json")
        _, rep, _ = run_json(capsys, "compare", cfgp, "--samples", "20000")
        _, out, _ = run(capsys, "compare", cfgp, "--samples", "20000", "--format", "csv")
        lines = out.splitlines()
        assert json.loads(lines[0][len("# config "):]) == rep["config"]
        rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
        assert list(rows[0])[: len(TABLE_COLUMNS)] == list(TABLE_COLUMNS)
        assert len(rows) == len(rep["rows"])
        for c_row, j_row in zip(rows, rep["rows"]):
            for key, val in j_row.items():
                if isinstance(val, float):
                    assert float(c_row[key]) == val or (math.isnan(val) and math.isnan(float(c_row[key])))
                elif val is None:
                    assert c_row[key] == ""
                else:
                    assert c_row[key] == str(val)

    def test_console_entry_point(self):
        res = subprocess.run(
            [sys.executable, "-m", "seriestail.cli", "eval", str(CONFIGS / "eval_single_gaussian.json")],
            capture_output=True, text=True, check=False,
        )
        assert res.returncode == 0
        assert json.loads(res.stdout)["rows"][0]["r"] == 6.0

"""CLI: config parsing, output formats, determinism, and exit codes."""

import csv
import json
import math

import pytest

from curation_laws import (
    CurationMode,
    GeometrySpec,
    classification_error,
    constants,
    make_keep_hard,
)
from curation_laws.cli import COMPARE_COLUMNS, main


def _write_cfg(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _read_table(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.DictReader(lines[1:]))
    return meta, rows


THEORY_CFG = {
    "task": "classification",
    "axes": {"p": [0.3, 0.7], "lambda": [1e-3, 1e-1]},
    "fixed": {"phi": 0.5, "strategy": "keep_hard",
              "rho": 0.8, "rho_g": 0.5, "rho_star": 0.5},
}


class TestTheory:
    def test_csv_output_and_values(self, tmp_path):
        out = tmp_path / "theory.csv"
        cfg = dict(THEORY_CFG, output=str(out))
        assert main(["theory", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        meta, rows = _read_table(out)
        assert meta["task"] == "classification"
        assert len(rows) == 4
        assert all(r["row_error"] == "" for r in rows)
        # spot check one grid point against the library directly
        row = next(r for r in rows if float(r["p_keep"]) < 0.5
                   and float(r["lambda"]) == 1e-3)
        g = GeometrySpec(0.8, 0.5, 0.5)
        from curation_laws import strategy_from_spec
        q = strategy_from_spec({"strategy": "keep_hard", "p": 0.3})
        c = constants(q, CurationMode.LABEL_AGNOSTIC, g)
        pred = classification_error(g, c, 0.5, 1e-3)
        assert float(row["error"]) == pytest.approx(pred.error, rel=1e-12)
        assert float(row["m0"]) == pytest.approx(pred.m0, rel=1e-12)
        assert float(row["nu0"]) == pytest.approx(pred.nu0, rel=1e-12)

    def test_rerun_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        p1 = _write_cfg(tmp_path, "c1.json", dict(THEORY_CFG, output=str(out1)))
        p2 = _write_cfg(tmp_path, "c2.json", dict(THEORY_CFG, output=str(out2)))
        assert main(["theory", "--config", p1]) == 0
        assert main(["theory", "--config", p2]) == 0
        assert out1.read_bytes().replace(str(out1).encode(), b"") == \
            out2.read_bytes().replace(str(out2).encode(), b"")

    def test_jsonl_by_extension(self, tmp_path):
        out = tmp_path / "theory.jsonl"
        cfg = dict(THEORY_CFG, output=str(out))
        assert main(["theory", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# ")
        parsed = [json.loads(ln) for ln in lines[1:]]
        assert len(parsed) == 4 and all("error" in r for r in parsed)

    def test_regression_task_columns(self, tmp_path):
        out = tmp_path / "reg.csv"
        cfg = {
            "task": "regression",
            "axes": {"p": [0.5, 1.0]},
            "fixed": {"phi": 0.4, "lambda": 1e-2, "sigma": 0.3,
                      "strategy": "keep_hard", "rho": 0.8, "rho_g": 0.5,
                      "rho_star": 0.5},
            "output": str(out),
        }
        assert main(["theory", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        assert {"B", "V", "total"} <= set(rows[0])
        for r in rows:
            assert float(r["total"]) > 0.0

    def test_infeasible_point_reported_per_row(self, tmp_path):
        out = tmp_path / "bad.csv"
        cfg = {
            "task": "classification",
            "axes": {"rho": [0.0, 0.99]},
            # rho_star ~ 1 makes the second triple infeasible under strict
            "fixed": {"phi": 0.5, "lambda": 1e-2, "strategy": "keep_hard",
                      "p": 0.5, "rho_g": 0.0, "rho_star": 0.999},
            "output": str(out),
        }
        assert main(["theory", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        errors = [r["row_error"] for r in rows]
        assert sum(1 for e in errors if e) >= 1
        assert sum(1 for e in errors if not e) >= 1


class TestSimulate:
    def test_simulate_and_determinism(self, tmp_path):
        out = tmp_path / "sim.csv"
        cfg = {
            "task": "classification",
            "axes": {"p": [0.5, 0.8]},
            "fixed": {"n": 300, "d": 100, "lambda": 1e-2,
                      "strategy": "keep_hard", "rho": 0.8, "rho_g": 0.5,
                      "rho_star": 0.5},
            "trials": 3, "seed": 4, "output": str(out),
        }
        p = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["simulate", "--config", p]) == 0
        _, rows = _read_table(out)
        assert len(rows) == 2
        first = [r["empirical_mean"] for r in rows]
        assert main(["simulate", "--config", p]) == 0
        _, rows2 = _read_table(out)
        assert [r["empirical_mean"] for r in rows2] == first
        for r in rows:
            assert 0.0 < float(r["empirical_mean"]) < 0.5
            assert 0.0 < float(r["kept_fraction"]) < 1.0
            assert r["skipped_trials"] == "0"


class TestCompare:
    def _cfg(self, tmp_path, out, tolerance=None):
        cfg = {
            "task": "classification",
            "axes": {"p": [0.5]},
            "fixed": {"n": 2000, "d": 200, "lambda": 1e-2,
                      "strategy": "keep_hard", "rho": 0.8, "rho_g": 0.5,
                      "rho_star": 0.5},
            "trials": 8, "seed": 1, "output": str(out),
        }
        if tolerance is not None:
            cfg["tolerance"] = tolerance
        return _write_cfg(tmp_path, "cmp.json", cfg)

    def test_schema_and_pass(self, tmp_path, capsys):
        out = tmp_path / "cmp.csv"
        assert main(["compare", "--config", self._cfg(tmp_path, out)]) == 0
        _, rows = _read_table(out)
        assert list(rows[0]) == COMPARE_COLUMNS
        assert float(rows[0]["rel_err"]) < 0.05
        assert "mean rel err" in capsys.readouterr().err

    def test_tolerance_exceeded_exit_3(self, tmp_path):
        out = tmp_path / "cmp.csv"
        assert main(["compare", "--config",
                     self._cfg(tmp_path, out, tolerance=1e-3)]) == 3
        _, rows = _read_table(out)  # output is still written
        assert len(rows) == 1


class TestCollapse:
    def test_paired_arms(self, tmp_path):
        out = tmp_path / "col.csv"
        cfg = {
            "n": 400, "d": 200, "lambda": 1e-3,
            "strategy": {"strategy": "keep_hard", "p": 0.5},
            "mode": "label_aware",
            "rho": 1.0, "rho_g": 1.0, "rho_star": 1.0,
            "rounds": 4, "seed": 0, "output": str(out),
        }
        assert main(["collapse", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        assert len(rows) == 4
        assert [r["round"] for r in rows] == ["0", "1", "2", "3"]
        # round 0 is uncurated in both arms, so the errors coincide
        assert rows[0]["error_curated"] == rows[0]["error_uncurated"]
        assert float(rows[0]["kept_fraction"]) == 1.0
        assert float(rows[1]["kept_fraction"]) < 1.0

    def test_zero_rounds_empty_table(self, tmp_path):
        out = tmp_path / "col.csv"
        cfg = {
            "n": 400, "d": 200, "lambda": 1e-3,
            "strategy": {"strategy": "keep_hard", "p": 0.5},
            "rho": 1.0, "rho_g": 1.0, "rho_star": 1.0,
            "rounds": 0, "output": str(out),
        }
        assert main(["collapse", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        assert rows == []


class TestLens:
    def test_bounds_and_samples(self, tmp_path):
        out = tmp_path / "lens.csv"
        cfg = {"axes": {"p": [0.3, 1.0]}, "output": str(out)}
        assert main(["lens", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        r03 = next(r for r in rows if float(r["p"]) == 0.3)
        gmin, gmax = float(r03["gamma_min"]), float(r03["gamma_max"])
        samples = [float(r03[f"gamma_u_{u}"])
                   for u in ("0.0", "0.25", "0.5", "0.75", "1.0")]
        assert samples[0] == pytest.approx(gmin, abs=1e-9)
        assert samples[-1] == pytest.approx(gmax, abs=1e-9)
        assert all(b > a for a, b in zip(samples, samples[1:]))
        r1 = next(r for r in rows if float(r["p"]) == 1.0)
        assert float(r1["gamma_min"]) == pytest.approx(1.0, abs=1e-12)
        assert float(r1["gamma_max"]) == pytest.approx(1.0, abs=1e-12)


class TestProbe:
    def test_resolvent(self, tmp_path):
        out = tmp_path / "probe.csv"
        cfg = {
            "probe": "resolvent",
            "fixed": {"n": 500, "d": 200, "lambda": 0.5,
                      "strategy": "keep_hard", "p": 0.5, "rho": 0.8,
                      "rho_g": 0.5, "rho_star": 0.5},
            "trials": 3, "output": str(out),
        }
        assert main(["probe", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        assert len(rows) == 1
        assert float(rows[0]["trace_gap"]) < 0.1
        assert {"parallel_gap", "perp_gap", "m", "m_tilde"} <= set(rows[0])

    def test_margin(self, tmp_path):
        out = tmp_path / "probe.csv"
        cfg = {
            "probe": "margin",
            "fixed": {"n": 500, "d": 200, "lambda": 0.5,
                      "strategy": "keep_hard", "p": 0.5, "rho": 0.8,
                      "rho_g": 0.5, "rho_star": 0.5},
            "trials": 3, "n_test": 20000, "output": str(out),
        }
        assert main(["probe", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 0
        _, rows = _read_table(out)
        assert {"first_moment_empirical", "first_moment_theory",
                "second_moment_empirical", "second_moment_theory"} <= set(rows[0])


class TestExitCodes:
    def test_missing_config_exit_2(self, tmp_path, capsys):
        assert main(["theory", "--config", str(tmp_path / "nope.json")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_axis_exit_2(self, tmp_path):
        cfg = dict(THEORY_CFG, axes={"bogus": [1]})
        assert main(["theory", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 2

    def test_runtime_failure_exit_4(self, tmp_path):
        # collapse with a strategy that keeps essentially nothing
        cfg = {
            "n": 50, "d": 10, "lambda": 1e-3,
            "strategy": {"strategy": "intervals",
                         "half_support": [[1e9, 1e9 + 1]]},
            "rho": 1.0, "rho_g": 1.0, "rho_star": 1.0,
            "rounds": 3, "output": str(tmp_path / "x.csv"),
        }
        assert main(["collapse", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 4

    def test_grid_too_large_exit_2(self, tmp_path):
        cfg = dict(THEORY_CFG, axes={"p": [0.01 * k for k in range(1, 400)],
                                     "rho": [0.001 * k for k in range(1, 400)]})
        assert main(["theory", "--config",
                     _write_cfg(tmp_path, "c.json", cfg)]) == 2

    def test_cli_overrides(self, tmp_path):
        out = tmp_path / "o.csv"
        cfg = {
            "task": "classification",
            "axes": {"p": [0.5]},
            "fixed": {"n": 200, "d": 100, "lambda": 1e-2,
                      "strategy": "keep_hard", "rho": 0.8, "rho_g": 0.5,
                      "rho_star": 0.5},
            "trials": 1, "seed": 0,
        }
        p = _write_cfg(tmp_path, "c.json", cfg)
        assert main(["simulate", "--config", p, "--out", str(out),
                     "--trials", "2", "--seed", "7"]) == 0
        meta, rows = _read_table(out)
        assert meta["trials"] == 2 and meta["seed"] == 7
        assert len(rows) == 1

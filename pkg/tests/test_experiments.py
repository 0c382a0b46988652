import math
import subprocess
import sys

import numpy as np
import pytest

from spherepoly.cli import build_parser, main
from spherepoly.experiments import (
    KINDS,
    ExperimentConfig,
    InsufficientDataError,
    fit_exponent,
    load_config,
    read_records,
    run,
    run_trial,
    write_records,
)


def strip_wall(text):
    out = []
    for ln in text.splitlines():
        out.append(ln.rsplit(",", 1)[0] if not ln.startswith("#") else ln)
    return out


class TestFit:
    def test_exact_power_law(self):
        rows = [{"m": m, "y": 7 * m ** 0.5} for m in (100, 200, 400, 800)]
        fit = fit_exponent(rows, "m", "y")
        assert fit.slope == pytest.approx(0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(7), abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)

    def test_constant(self):
        rows = [{"m": m, "y": 3.0} for m in (10, 20, 40)]
        fit = fit_exponent(rows, "m", "y")
        assert fit.slope == pytest.approx(0.0, abs=1e-12) and fit.r2 == 1.0

    def test_median_and_means(self):
        rows = [{"m": m, "y": v * m} for m in (10, 20, 40) for v in (1.0, 2.0, 30.0)]
        assert fit_exponent(rows, "m", "y", stat="median").slope == pytest.approx(1.0)
        assert fit_exponent(rows, "m", "y", stat="mean").slope == pytest.approx(1.0)

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            fit_exponent([{"m": 10, "y": 1}, {"m": 20, "y": 2}], "m", "y")


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="nope").validate()
        with pytest.raises(ValueError):
            ExperimentConfig(kind="tails", m_list=(200.0, 100.0)).validate()
        with pytest.raises(ValueError):
            ExperimentConfig(kind="tails", m_list=()).validate()
        with pytest.raises(ValueError):
            ExperimentConfig(kind="tails", trials=0).validate()

    def test_load_ini(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nkind = lb-certify\nn = 3\nm = 100, 200, 400\ntrials = 4\n"
                       "p = 0.01\nseed = 9\nout = somewhere\n\n[constants]\nc6 = 6\nc1 = 2.5\n")
        cfg = load_config(ini, trials=2)
        assert cfg.kind == "lb-certify" and cfg.m_list == (100.0, 200.0, 400.0)
        assert cfg.trials == 2 and cfg.p == 0.01 and cfg.seed == 9
        assert cfg.c6 == 6.0 and cfg.c1 == 2.5 and cfg.c2 == 1.0
        assert str(cfg.out) == "somewhere"

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.ini")


class TestRun:
    def test_single_hull_row(self, tmp_path):
        res = run(ExperimentConfig(kind="hull-validate", m_list=(100.0,), trials=1, out=tmp_path))
        assert len(res.records) == 1 and res.violations == 0 and not res.failures
        r = res.records[0]
        assert r["qhull_match"] == 1 and r["problems"] == 0
        assert r["V"] - r["E"] + r["F"] == 2

    @pytest.mark.parametrize("kind", KINDS)
    def test_every_kind_runs(self, tmp_path, kind):
        m = (800.0,) if kind in ("density", "stitch", "tails") else (150.0,)
        cfg = ExperimentConfig(kind=kind, m_list=m, trials=1, p=0.05, objectives=5, c6=3.0,
                               out=tmp_path, svg=True)
        res = run(cfg)
        assert not res.failures, res.failures
        assert res.violations == 0
        rows = read_records(tmp_path / "records.csv")
        assert len(rows) == 1 and rows[0]["kind"] == kind
        assert (tmp_path / "summary.csv").read_text().startswith("# spherepoly-summary v1")

    def test_reproducible(self, tmp_path):
        cfg = ExperimentConfig(kind="diameter-relation", m_list=(60.0, 120.0), trials=2, seed=5,
                               out=tmp_path / "a")
        run(cfg)
        run(ExperimentConfig(**{**cfg.__dict__, "out": tmp_path / "b"}))
        a = (tmp_path / "a" / "records.csv").read_text()
        b = (tmp_path / "b" / "records.csv").read_text()
        assert strip_wall(a) == strip_wall(b)

    def test_parallel_matches_serial(self, tmp_path):
        base = dict(kind="shadow-scaling", m_list=(80.0, 160.0), trials=2, seed=3)
        serial = run(ExperimentConfig(**base, out=tmp_path / "s"))
        par = run(ExperimentConfig(**base, jobs=2, out=tmp_path / "p"))
        drop = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]
        assert drop(serial.records) == drop(par.records)

    def test_failures_are_excluded(self, tmp_path):
        # the density radius is infeasible at m=50, p=1e-3, so each trial raises
        res = run(ExperimentConfig(kind="density", m_list=(50.0,), trials=2, p=1e-3, out=tmp_path))
        assert len(res.failures) == 2 and res.records == []
        assert "failures=2" in (tmp_path / "summary.csv").read_text()

    def test_scaling_fit_in_summary(self, tmp_path):
        res = run(ExperimentConfig(kind="shadow-scaling", m_list=(100.0, 400.0, 1600.0), trials=3,
                                   out=tmp_path))
        fit = res.fits["shadow_size:mean"]
        assert 0.2 < fit.slope < 0.8

    def test_trial_seeds_distinct(self):
        cfg = ExperimentConfig(kind="hull-validate", m_list=(50.0, 60.0), trials=2)
        seeds = {run_trial(cfg, i, t)["seed"] for i in range(2) for t in range(2)}
        assert len(seeds) == 4


def test_records_roundtrip(tmp_path):
    rows = [{"kind": "tails", "n": 3, "m": 100.0, "trial": 0, "seed": 1, "M": 97,
             "shadow_size": 12, "t_p": 0.1 + 0.2, "U": float("nan"), "violations": 0, "wall_time": 0.5}]
    write_records(rows, "tails", tmp_path / "r.csv")
    back = read_records(tmp_path / "r.csv")[0]
    assert back["t_p"] == 0.1 + 0.2 and math.isnan(back["U"]) and back["M"] == 97
    with pytest.raises(ValueError):
        (tmp_path / "x.csv").write_text("bad\n")
        read_records(tmp_path / "x.csv")


class TestCli:
    def test_parser_has_every_kind(self):
        p = build_parser()
        for kind in KINDS:
            args = p.parse_args([kind, "--m", "100,200"])
            assert args.command == kind and args.m == (100.0, 200.0)

    def test_main_subcommand(self, tmp_path, capsys):
        code = main(["hull-validate", "--m", "100", "--trials", "1", "--out", str(tmp_path)])
        assert code == 0
        assert "hull-validate: 1 records" in capsys.readouterr().out

    def test_main_config(self, tmp_path, capsys):
        ini = tmp_path / "c.ini"
        ini.write_text(f"[experiment]\nkind = tails\nm = 50\nout = {tmp_path / 'o'}\n")
        code = main(["run", "--config", str(ini), "--experiment", "hull-validate", "--m", "60,90,120",
                     "--trials", "1"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("hull-validate: 3 records") and "fit F:mean" in out

    def test_violation_sets_exit_code(self, tmp_path, monkeypatch):
        import spherepoly.experiments as ex

        def broken(cfg, m, seed, row, svg):
            row.update(shadow_size=5, t_p=1.0, U=1.0)
            return 1

        monkeypatch.setitem(ex._TRIALS, "tails", broken)
        assert main(["tails", "--m", "100", "--out", str(tmp_path)]) == 1

    def test_console_script_module(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "spherepoly.cli", "shadow-scaling", "--m", "100",
                            "--out", str(tmp_path)], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr

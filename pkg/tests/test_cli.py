import json
from pathlib import Path

import pytest

from cellwear.cli import main

TABLE_ROWS = {
    # family -> (days_base, thru_base, days_v2g, thru_v2g) from the
    # published end-of-life comparison, used as an arithmetic fixture
    "famA": (371.0, 390.3, 221.0, 453.5),
    "famB": (812.0, 854.2, 584.0, 1198.3),
    "famC": (380.0, 399.7, 349.0, 716.1),
}


def fake_summary(cell, scenario, variant, days, thru, censored=False):
    return {
        "cell": cell, "scenario": scenario, "drive_variant": variant,
        "mode": "accelerated", "days": days, "norm_throughput_ah": thru,
        "norm_throughput_wh": thru * 3.7,
        "c_p_retention_pct": 87.0, "c_n_retention_pct": 75.0,
        "lli_pct": 30.0, "lli_sei_pct": 6.5, "lli_plating_pct": 1.4,
        "lli_diss_pct": 0.0, "lli_sei_diss_pct": 6.5, "lli_crack_pct": 22.1,
        "lli_lam_pct": 22.1,
        "termination": {"reason": "eol", "censored": censored,
                        "eol_frac": 0.7, "simulated_days": 30,
                        "last_logged_day": int(days)},
    }


def write_run(root: Path, cell, scenario, variant, days, thru, censored=False):
    d = root / f"{cell}__{scenario}__{variant}"
    d.mkdir(parents=True)
    with open(d / "summary.json", "w") as fh:
        json.dump(fake_summary(cell, scenario, variant, days, thru, censored), fh)


class TestTvDCommand:
    def test_table_fixture_reproduces_ratios(self, tmp_path):
        runs = tmp_path / "runs"
        expected = {"famA": 0.4005, "famB": 1.4346, "famC": 9.7034}
        for fam, (db, tb, dv, tv) in TABLE_ROWS.items():
            write_run(runs, fam, "no_v2g", "long", db, tb)
            write_run(runs, fam, "v2g_moderate", "long", dv, tv)
        out = tmp_path / "tvd"
        assert main(["tvd", "--results", str(runs), "--out", str(out)]) == 0
        report = json.loads((out / "tvd_report.json").read_text())
        got = {r["cell"]: r["tvd"] for r in report["pairs"]}
        for fam, exp in expected.items():
            assert got[fam] == pytest.approx(exp, rel=0.01)
        trend = (out / "trend.csv").read_text().splitlines()
        assert trend[0] == "family,scenario,variant,cal_fraction,tvd,log10_tvd"
        assert len(trend) == 4

    def test_baseline_only_is_an_error(self, tmp_path, capsys):
        runs = tmp_path / "runs"
        write_run(runs, "famA", "no_v2g", "long", 371.0, 390.3)
        rc = main(["tvd", "--results", str(runs), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "no V2G runs found" in capsys.readouterr().err

    def test_variants_never_cross_paired(self, tmp_path, capsys):
        runs = tmp_path / "runs"
        write_run(runs, "famA", "no_v2g", "long", 371.0, 390.3)
        write_run(runs, "famA", "v2g_moderate", "short", 221.0, 453.5)
        rc = main(["tvd", "--results", str(runs), "--out", str(tmp_path / "o")])
        assert rc == 1
        assert "unmatched" in capsys.readouterr().err

    def test_censored_runs_listed_not_paired(self, tmp_path):
        runs = tmp_path / "runs"
        write_run(runs, "famA", "no_v2g", "long", 371.0, 390.3)
        write_run(runs, "famA", "v2g_moderate", "long", 221.0, 453.5)
        write_run(runs, "famB", "no_v2g", "long", 812.0, 854.2)
        write_run(runs, "famB", "v2g_moderate", "long", 584.0, 1198.3,
                  censored=True)
        out = tmp_path / "o"
        assert main(["tvd", "--results", str(runs), "--out", str(out)]) == 0
        report = json.loads((out / "tvd_report.json").read_text())
        assert len(report["pairs"]) == 1
        assert report["unmatched"] == [["famB", "v2g_moderate", "long"]]

    def test_empty_directory_is_config_error(self, tmp_path):
        assert main(["tvd", "--results", str(tmp_path),
                     "--out", str(tmp_path / "o")]) == 2


class TestFitCommand:
    def test_missing_calendar_dataset(self, tmp_path, capsys):
        ds_dir = tmp_path / "ds"
        ds_dir.mkdir()
        (ds_dir / "cyc.txt").write_text(
            "# condition: cycling\n# charge_c: 0.5\n# discharge_c: 0.5\n"
            "# dod: 0.5\n10, 5.5, 4.1, 0.01\n")
        rc = main(["fit", "--datasets", str(ds_dir), "--cell", "nmc111",
                   "--out", str(tmp_path / "fit")])
        assert rc == 1
        assert "stage1 requires calendar data" in capsys.readouterr().err

    def test_empty_dataset_dir(self, tmp_path):
        ds_dir = tmp_path / "ds"
        ds_dir.mkdir()
        assert main(["fit", "--datasets", str(ds_dir), "--cell", "nmc111",
                     "--out", str(tmp_path / "fit")]) == 2

    def test_unknown_cell(self, tmp_path):
        ds_dir = tmp_path / "ds"
        ds_dir.mkdir()
        assert main(["fit", "--datasets", str(ds_dir), "--cell", "nope",
                     "--out", str(tmp_path / "fit")]) == 2


class TestValidateCommand:
    def test_bundled_fixtures_pass(self):
        assert main(["validate"]) == 0


class TestSimulateCommand:
    def test_bad_scenario_is_config_error(self, tmp_path, capsys):
        rc = main(["simulate", "--cells", "nmc111", "--scenarios", "bogus",
                   "--out", str(tmp_path / "runs")])
        assert rc == 2

    def test_bad_cell_is_config_error(self, tmp_path):
        rc = main(["simulate", "--cells", "not_a_cell", "--scenarios",
                   "no_v2g", "--out", str(tmp_path / "runs")])
        assert rc == 2

    @pytest.mark.slow
    def test_grid_emits_outputs_idempotently(self, tmp_path):
        out = tmp_path / "runs"
        args = ["simulate", "--cells", "nmc111", "--scenarios", "no_v2g",
                "v2g_moderate", "--out", str(out)]
        assert main(args) == 0
        dirs = sorted(p.name for p in out.iterdir())
        assert dirs == ["nmc111__no_v2g__long", "nmc111__v2g_moderate__long"]
        for d in dirs:
            summary = json.loads((out / d / "summary.json").read_text())
            assert summary["termination"]["reason"] == "eol"
            header = (out / d / "trajectory.csv").read_text().splitlines()[0]
            assert header == ("day,capacity_frac,C_p,C_n,LLI,lli_sei,"
                              "lli_plating,lli_diss,lli_crack,cum_Ah_norm,"
                              "SOC_min,SOC_avg,SOC_max")
        first = {d: (out / d / "summary.json").read_bytes() for d in dirs}
        first_traj = {d: (out / d / "trajectory.csv").read_bytes() for d in dirs}
        assert main(args) == 0
        for d in dirs:
            assert (out / d / "summary.json").read_bytes() == first[d]
            assert (out / d / "trajectory.csv").read_bytes() == first_traj[d]

import os

import numpy as np
import pytest

from kvspectral import cli, harness


QUICK_PARAMS = {
    "dispersion": {"kappas": [1.0], "n_max": 3, "dt": 1e-3, "t_end": 0.5,
                   "rtol": 1e-4, "vieta_n_max": 8},
    "oscillation_oracle": {"members": [1, 2], "t_points": 2000},
    "weak_limits": {"ladder": [4, 8, 16]},
    "mms_convergence": {"ladder": [1, 2, 4], "dt": 4e-3, "t_end": 0.16,
                        "dt_ladder": [1.6e-2, 8e-3]},
    "dd_equivalence": {"n_modes": 8, "t_end": 0.2, "ladder": [4e-3, 2e-3]},
    "energy_identity": {"n_modes": 8, "t_end": 0.2, "scheme": "IF_RK4",
                        "ladder": [4e-3, 2e-3]},
    "energy_conservation": {"n_modes": 8, "t_end": 0.2, "scheme": "IF_RK4",
                            "ladder": [4e-3, 2e-3]},
    "h1_propagation": {"models": ["quadratic", "double_well"],
                       "n_modes": 16, "t_end": 0.2, "dt": 2e-3},
    "modulated_inequality": {"models": ["quadratic", "double_well"],
                             "n_modes": 16, "t_end": 0.2, "dt": 2e-3},
    "galerkin_cauchy": {"ladder": [4, 8, 16], "t_end": 0.1, "dt": 2e-3,
                        "final_gap_tol": 1e-4},
    "regularity_monitor": {"n_modes": 8, "t_end": 0.1, "dt": 2e-3},
}


def quick_spec(exp_id, label=None):
    return harness.ExperimentSpec(label=label or exp_id, id=exp_id,
                                  params=dict(QUICK_PARAMS[exp_id]), seed=7)


class TestConfigParsing:
    def test_minimal_section_with_defaults(self):
        specs = harness.parse_config(
            "id = dispersion\nkappas = 1.0\nn_max = 8\n")
        assert len(specs) == 1
        assert specs[0].id == "dispersion"
        assert specs[0].label == "default"
        assert specs[0].params["n_max"] == 8

    def test_sections_and_comments(self):
        text = """
        # experiment battery
        [fine]
        id = dispersion
        kappas = [0.25, 1.0]   # both stiffnesses
        n_max = 4

        [osc]
        id = oscillation_oracle
        a = 1.0
        b = 3.0
        """
        specs = harness.parse_config(text)
        assert [s.label for s in specs] == ["fine", "osc"]
        assert specs[0].params["kappas"] == [0.25, 1.0]

    def test_zero_dt_rejected_with_line(self):
        text = "[x]\nid = dispersion\ndt = 0.0\n"
        with pytest.raises(harness.ConfigError, match="line 3.*dt"):
            harness.parse_config(text)

    def test_unknown_key_rejected(self):
        text = "[x]\nid = dispersion\ncolor = red\n"
        with pytest.raises(harness.ConfigError, match="unknown key 'color'"):
            harness.parse_config(text)

    def test_unknown_id_rejected(self):
        with pytest.raises(harness.ConfigError, match="unknown experiment"):
            harness.parse_config("[x]\nid = warp_drive\n")

    def test_missing_id_rejected(self):
        with pytest.raises(harness.ConfigError, match="no id"):
            harness.parse_config("[x]\nn_max = 4\n")

    def test_duplicate_key_rejected(self):
        text = "[x]\nid = dispersion\nn_max = 4\nn_max = 8\n"
        with pytest.raises(harness.ConfigError, match="duplicate"):
            harness.parse_config(text)

    def test_nonmonotone_ladder_rejected(self):
        text = "[x]\nid = galerkin_cauchy\nladder = [8, 4, 16]\n"
        with pytest.raises(harness.ConfigError, match="monotone"):
            harness.parse_config(text)

    def test_monotone_ladder_accepted(self):
        specs = harness.parse_config(
            "[x]\nid = galerkin_cauchy\nladder = [8, 16, 32]\n")
        assert specs[0].params["ladder"] == [8, 16, 32]

    def test_bad_line_rejected(self):
        with pytest.raises(harness.ConfigError, match="key = value"):
            harness.parse_config("[x]\nid = dispersion\nwhatever\n")

    def test_empty_config_rejected(self):
        with pytest.raises(harness.ConfigError, match="no experiments"):
            harness.parse_config("# nothing here\n")


class TestExperimentExecution:
    @pytest.mark.parametrize("exp_id", ["weak_limits", "oscillation_oracle"])
    def test_quick_experiments_pass(self, tmp_path, exp_id):
        rep = harness.run_experiment(quick_spec(exp_id), tmp_path)
        assert rep.passed, [c for c in rep.checks if not c.passed] or rep.error
        assert os.path.exists(rep.artifacts[0])

    def test_csv_byte_identical_across_runs(self, tmp_path):
        spec = quick_spec("weak_limits")
        harness.run_experiment(spec, tmp_path / "a")
        harness.run_experiment(spec, tmp_path / "b")
        csv_a = (tmp_path / "a" / spec.label / "weak_limits.csv").read_bytes()
        csv_b = (tmp_path / "b" / spec.label / "weak_limits.csv").read_bytes()
        assert csv_a == csv_b

    def test_summary_and_manifest_written(self, tmp_path):
        spec = quick_spec("oscillation_oracle")
        harness.run_experiment(spec, tmp_path)
        base = tmp_path / spec.label
        summary = (base / "summary.txt").read_text()
        assert "result = PASS" in summary
        manifest = (base / "manifest.txt").read_text()
        assert "id = oscillation_oracle" in manifest
        assert "config_hash" in manifest

    def test_failure_captured_not_raised(self, tmp_path):
        spec = harness.ExperimentSpec(
            label="boom", id="regularity_monitor",
            params={"n_modes": 4, "t_end": 0.1, "dt": 2e-2,
                    "amplitude": 1e4})
        rep = harness.run_experiment(spec, tmp_path)
        assert not rep.passed
        assert "BlowUpError" in rep.error or rep.error


class TestSweep:
    def test_parallel_sweep_aggregates_deterministically(self, tmp_path):
        specs = [quick_spec("weak_limits", "wl"),
                 quick_spec("oscillation_oracle", "osc"),
                 quick_spec("dispersion", "disp")]
        reports = harness.sweep(specs, tmp_path, parallelism=3)
        assert [r.id for r in reports] == sorted(r.id for r in reports)
        assert all(r.passed for r in reports)
        agg = (tmp_path / "aggregate.txt").read_text()
        assert agg.count("PASS") == 3

    def test_diverging_member_recorded_others_complete(self, tmp_path):
        bad = harness.ExperimentSpec(
            label="bad", id="regularity_monitor",
            params={"n_modes": 4, "t_end": 0.1, "dt": 2e-2,
                    "amplitude": 1e4})
        specs = [quick_spec("weak_limits", "wl"), bad]
        reports = harness.sweep(specs, tmp_path, parallelism=2)
        by_label = {r.label: r for r in reports}
        assert by_label["wl"].passed
        assert not by_label["bad"].passed

    def test_empty_sweep_is_trivially_green(self, tmp_path):
        reports = harness.sweep([], tmp_path, parallelism=2)
        assert reports == []


class TestOracleBatteryAndReports:
    def test_verify_oracles_writes_summary(self, tmp_path):
        ok = harness.verify_oracles(tmp_path)
        assert ok
        text = (tmp_path / "oracle_summary.txt").read_text()
        assert "result = PASS" in text
        csv = (tmp_path / "oracle_report.csv").read_text()
        assert csv.splitlines()[0] == "check,residual,tolerance"

    def test_collect_reports(self, tmp_path):
        harness.run_experiment(quick_spec("weak_limits"), tmp_path)
        harness.verify_oracles(tmp_path)
        verdicts = harness.collect_reports(tmp_path)
        assert len(verdicts) == 2
        assert all(ok for _, ok in verdicts)


class TestCLI:
    def write_config(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("[wl]\nid = weak_limits\nladder = [4, 8, 16]\n")
        return cfg

    def test_run_command(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        code = cli.main(["-o", str(tmp_path / "out"), "run", str(cfg)])
        assert code == 0
        out = capsys.readouterr().out
        assert "[PASS] wl (weak_limits)" in out

    def test_sweep_command(self, tmp_path):
        cfg = self.write_config(tmp_path)
        code = cli.main(["-o", str(tmp_path / "out"), "sweep", str(cfg),
                         "--parallelism", "2"])
        assert code == 0

    def test_verify_oracles_command(self, tmp_path):
        code = cli.main(["-o", str(tmp_path / "out"), "verify-oracles"])
        assert code == 0

    def test_report_command(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        cli.main(["-o", str(tmp_path / "out"), "run", str(cfg)])
        code = cli.main(["report", str(tmp_path / "out")])
        assert code == 0
        assert "[PASS]" in capsys.readouterr().out

    def test_report_empty_dir_fails(self, tmp_path):
        assert cli.main(["report", str(tmp_path)]) == 1

    def test_output_env_var(self, tmp_path, monkeypatch, capsys):
        cfg = self.write_config(tmp_path)
        monkeypatch.setenv("KVSPECTRAL_OUT", str(tmp_path / "envout"))
        monkeypatch.chdir(tmp_path)
        code = cli.main(["run", str(cfg)])
        assert code == 0
        assert (tmp_path / "envout" / "wl" / "weak_limits.csv").exists()

    def test_plots_flag_emits_svg(self, tmp_path):
        cfg = self.write_config(tmp_path)
        code = cli.main(["-o", str(tmp_path / "out"), "run", str(cfg),
                         "--plots"])
        assert code == 0
        assert (tmp_path / "out" / "wl" / "weak_limits.svg").exists()

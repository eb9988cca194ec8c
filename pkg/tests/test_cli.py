import json
import math

import pytest

from magcool.cli import (EXIT_OK, EXIT_VALIDATION, ConfigError,
                         build_protocol_config, main)
from magcool.validate import run_validation


class TestConfigMerging:
    def test_flags_override_file(self):
        cfg = build_protocol_config({"nbar": 50.0, "readout_fidelity": 0.9},
                                    {"nbar": 75.0})
        assert cfg.nbar == 75.0
        assert cfg.readout_fidelity == 0.9

    def test_controller_dotted_overrides(self):
        cfg = build_protocol_config({}, {"controller.width_factor": 2.2,
                                         "mode": "bayes"})
        assert cfg.controller.width_factor == 2.2

    def test_incompatible_heuristic_rejected_with_all_errors(self):
        # target probability 0.9 at width factor 1.9 has no profile offset
        with pytest.raises(ConfigError) as err:
            build_protocol_config({}, {"controller.target_up_prob": 0.9,
                                       "nbar": -5.0})
        messages = " ".join(err.value.errors)
        assert "offset" in messages
        assert "nbar" in messages

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown configuration key"):
            build_protocol_config({"nbaar": 100}, {})

    def test_readout_fidelity_propagates_to_controller(self):
        cfg = build_protocol_config({"readout_fidelity": 0.85}, {})
        assert cfg.controller.readout_fidelity == 0.85


class TestPhysicsCommand:
    def test_preset_case_a(self, capsys):
        code = main(["physics", "--preset", "case-a"])
        assert code == EXIT_OK
        echo = json.loads(capsys.readouterr().out)
        assert echo["si"]["radius_m"] == 0.5e-6
        assert echo["si"]["trap_frequency_rad_s"] == pytest.approx(
            2 * math.pi * 1e3)
        assert echo["si"]["coupling_rad_s"] == pytest.approx(
            2 * math.pi * 148e3)

    def test_unknown_preset_fails_validation(self, capsys):
        code = main(["physics", "--preset", "nope"])
        assert code == EXIT_VALIDATION
        err = json.loads(capsys.readouterr().err)
        assert err["errors"]

    def test_explicit_parameters(self, capsys):
        code = main(["physics", "--radius", "1e-6", "--density", "7e3",
                     "--trap-frequency", "6283.2", "--sensor-distance",
                     "2e-6", "--magnetization", "1e6"])
        assert code == EXIT_OK
        echo = json.loads(capsys.readouterr().out)
        assert echo["si"]["field_gradient_T_m"] < 0

    def test_missing_parameters_listed(self, capsys):
        code = main(["physics", "--radius", "1e-6"])
        assert code == EXIT_VALIDATION
        err = json.loads(capsys.readouterr().err)
        assert any("density" in e for e in err["errors"])


class TestProfileCommand:
    def test_emits_samples_and_fit(self, tmp_path, capsys):
        code = main(["profile", "--width", "1.5", "--out", str(tmp_path)])
        assert code == EXIT_OK
        run_dir = capsys.readouterr().out.strip()
        csv_text = (tmp_path / run_dir.split("/")[-1] / "profile.csv").read_text() \
            if False else open(f"{run_dir}/profile.csv").read()
        assert csv_text.splitlines()[0] == "z,prob_up"
        fit = json.loads(open(f"{run_dir}/fit.json").read())
        assert fit["gaussian_ok"]
        assert fit["alpha"] == pytest.approx(1.15, abs=0.05)
        manifest = json.loads(open(f"{run_dir}/manifest.json").read())
        assert manifest["command"] == "profile"

    def test_calibrate_flag_adds_backaction_table(self, tmp_path, capsys):
        code = main(["profile", "--width", "1.5", "--calibrate",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        run_dir = capsys.readouterr().out.strip()
        table = json.loads(open(f"{run_dir}/backaction.json").read())
        assert table["format"] == "magcool-backaction/1"
        assert table["r_squared"] > 0.99


class TestCoolCommand:
    def test_bayes_trajectory_outputs(self, tmp_path, capsys):
        code = main(["cool", "--mode", "bayes", "--nbar", "50",
                     "--seed", "3", "--out", str(tmp_path)])
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        run_dir = summary["run_dir"]
        record = json.loads(open(f"{run_dir}/trajectory.json").read())
        assert record["seed"] == 3
        assert record["quadrature_1"]["measurement_count"] > 0
        steps = open(f"{run_dir}/steps.csv").read().splitlines()
        assert steps[0].startswith("quadrature,step,")
        assert len(steps) == 1 + (record["quadrature_1"]["measurement_count"]
                                  + record["quadrature_2"]["measurement_count"])

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.json"
        cfg_file.write_text(json.dumps({"nbar": 30.0, "mode": "bayes",
                                        "seed": 1}))
        code = main(["cool", "--config", str(cfg_file), "--nbar", "40",
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        record = json.loads(open(f"{summary['run_dir']}/trajectory.json").read())
        assert record["config"]["nbar"] == 40.0

    def test_invalid_combination_exits_one(self, tmp_path, capsys):
        code = main(["cool", "--mode", "bayes",
                     "--target-up-prob", "0.9", "--out", str(tmp_path)])
        assert code == EXIT_VALIDATION
        err = json.loads(capsys.readouterr().err)
        assert any("offset" in e for e in err["errors"])

    def test_missing_config_file_distinct_from_malformed(self, tmp_path,
                                                         capsys):
        code = main(["cool", "--config", str(tmp_path / "absent.json")])
        assert code == EXIT_VALIDATION
        missing = json.loads(capsys.readouterr().err)["errors"][0]
        assert "not found" in missing

        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        code = main(["cool", "--config", str(bad)])
        assert code == EXIT_VALIDATION
        malformed = json.loads(capsys.readouterr().err)["errors"][0]
        assert "not valid JSON" in malformed
        assert malformed != missing


class TestSweepCommand:
    def test_sweep_run_directory(self, tmp_path, capsys):
        spec = {"axes": [["nbar", [20.0, 30.0]]], "trajectories": 2,
                "base": {"mode": "bayes"}, "run_kind": "quadrature",
                "seed_base": 5}
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(spec))
        code = main(["sweep", "--config", str(spec_file),
                     "--out", str(tmp_path)])
        assert code == EXIT_OK
        run_dir = capsys.readouterr().out.strip()
        rows = open(f"{run_dir}/sweep_long.csv").read().splitlines()
        assert rows[0] == "nbar,metric,mean,std,n"
        assert len(rows) > 1
        manifest = json.loads(open(f"{run_dir}/manifest.json").read())
        assert manifest["command"] == "sweep"

    def test_sweep_requires_config(self, tmp_path, capsys):
        missing = tmp_path / "none.json"
        code = main(["sweep", "--config", str(missing)])
        assert code == EXIT_VALIDATION
        capsys.readouterr()

    def test_environment_overrides(self, tmp_path, capsys, monkeypatch):
        # MAGCOOL_OUT picks the run root; MAGCOOL_WORKERS the process count
        monkeypatch.setenv("MAGCOOL_OUT", str(tmp_path / "envout"))
        monkeypatch.setenv("MAGCOOL_WORKERS", "1")
        spec = {"axes": [["nbar", [20.0]]], "trajectories": 1,
                "base": {"mode": "bayes"}, "run_kind": "quadrature"}
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(spec))
        code = main(["sweep", "--config", str(spec_file)])
        assert code == EXIT_OK
        run_dir = capsys.readouterr().out.strip()
        assert run_dir.startswith(str(tmp_path / "envout"))


class TestValidateCommand:
    def test_all_oracles_pass(self, capsys):
        code = main(["validate"])
        out = capsys.readouterr().out
        assert code == EXIT_OK
        assert "FAIL" not in out
        # the report prints one tolerance per oracle
        assert out.count("tol=") == out.count("PASS")

    def test_fault_injection_fails(self, capsys):
        code = main(["validate", "--alpha-expected", "2.0"])
        out = capsys.readouterr().out
        assert code == EXIT_VALIDATION
        assert "FAIL" in out

    def test_library_level_fault_injection(self):
        results = run_validation(alpha_expected=2.0)
        failed = [r for r in results if not r.passed]
        assert len(failed) == 1
        assert "width constant" in failed[0].name

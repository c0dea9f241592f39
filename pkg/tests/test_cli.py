import csv
import json
import os

import pytest

from barsim.cli import (
    ExperimentSpec,
    SpecError,
    db_to_linear,
    main,
    parse_config,
    run_experiment,
)


class TestSpec:
    def test_defaults(self):
        spec = parse_config()
        assert spec.experiment == "rate-vs-snr"
        assert spec.snr_db == [10.0]
        assert spec.relays == [1]
        assert spec.protocols == ["genie"]
        assert spec.num_slots == 1_000_000
        assert spec.seed == 1
        assert spec.fmt == "csv"
        assert spec.omega_sr is None

    def test_db_conversion(self):
        assert db_to_linear(0.0) == 1.0
        assert db_to_linear(10.0) == pytest.approx(10.0)
        assert db_to_linear(-20.0) == pytest.approx(0.01)
        assert db_to_linear(3.0) == pytest.approx(1.9952623)

    def test_omega_length_mismatch(self):
        with pytest.raises(SpecError):
            ExperimentSpec(omega_sr=[1.0, 2.0], omega_rd=[1.0, 2.0],
                           relays=[3]).validate()
        with pytest.raises(SpecError):
            ExperimentSpec(omega_sr=[1.0], omega_rd=[1.0, 2.0],
                           relays=[1]).validate()
        with pytest.raises(SpecError):
            ExperimentSpec(omega_sr=[1.0]).validate()

    def test_unknown_keys_rejected(self):
        with pytest.raises(SpecError, match="unknown config keys"):
            ExperimentSpec.from_dict({"snr_dbs": [10.0]})

    def test_invalid_values_rejected(self):
        with pytest.raises(SpecError):
            ExperimentSpec(protocols=["carrier-pigeon"]).validate()
        with pytest.raises(SpecError):
            ExperimentSpec(num_slots=0).validate()
        with pytest.raises(SpecError):
            ExperimentSpec(fmt="xml").validate()
        with pytest.raises(SpecError):
            ExperimentSpec(delay_targets=[0.0]).validate()
        with pytest.raises(SpecError):
            ExperimentSpec(experiment="rate-vs-weather").validate()

    def test_config_file_round_trip(self, tmp_path):
        spec = ExperimentSpec(snr_db=[0.0, 5.0], relays=[2], protocols=["max-link"],
                              num_slots=1234, seed=42).validate()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(spec.to_dict()))
        assert parse_config(str(path)) == spec

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 5, "num_slots": 100}))
        spec = parse_config(str(path), {"seed": 9, "num_slots": None})
        assert spec.seed == 9
        assert spec.num_slots == 100

    def test_bad_config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("not json {")
        with pytest.raises(SpecError):
            parse_config(str(path))
        with pytest.raises(SpecError):
            parse_config(str(tmp_path / "missing.json"))


class TestRunExperiment:
    def test_analytical_only(self):
        spec = ExperimentSpec(experiment="analytical-only", snr_db=[0.0, 10.0],
                              relays=[1, 2], protocols=["genie", "conventional"]).validate()
        rows, errors = run_experiment(spec)
        assert errors == 0
        assert len(rows) == 4  # one row per (snr, M); both protocol rates in columns
        assert all(row["rate_ba"] > 0 and row["rate_conv"] > 0 for row in rows)

    def test_rate_sweep_small(self):
        spec = ExperimentSpec(experiment="rate-vs-snr", snr_db=[10.0], relays=[1],
                              protocols=["genie"], num_slots=5_000).validate()
        rows, errors = run_experiment(spec)
        assert errors == 0
        (row,) = rows
        assert row["protocol"] == "genie"
        assert abs(row["rate_sim"] - row["rate_analytical"]) / row["rate_analytical"] < 0.1

    def test_parallel_matches_serial(self):
        base = dict(experiment="analytical-only", snr_db=[0.0, 5.0, 10.0],
                    relays=[1, 2], protocols=["genie"])
        serial, _ = run_experiment(ExperimentSpec(**base, jobs=1).validate())
        parallel, _ = run_experiment(ExperimentSpec(**base, jobs=2).validate())
        assert serial == parallel


class TestMainEndToEnd:
    def test_simulate_writes_csv_manifest_figure(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["simulate", "--experiment", "rate-vs-snr", "--snr-db", "5,10",
                     "--relays", "1", "--protocol", "max-link", "--slots", "2000",
                     "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        manifest = json.loads((tmp_path / "sweep.manifest.json").read_text())
        assert manifest["rows"] == 2
        assert manifest["errors"] == 0
        assert manifest["config"]["num_slots"] == 2000
        assert (tmp_path / "sweep.png").stat().st_size > 0

    def test_no_figures_flag(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["simulate", "--snr-db", "10", "--relays", "1",
                     "--protocol", "conventional", "--slots", "2000",
                     "--no-figures", "--out", str(out)])
        assert code == 0
        assert not (tmp_path / "sweep.png").exists()

    def test_records_format(self, tmp_path):
        out = tmp_path / "rates.jsonl"
        code = main(["analyze", "--snr-db", "0,10", "--relays", "2",
                     "--format", "records", "--no-figures", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert all(json.loads(ln)["rate_ba"] > 0 for ln in lines)

    def test_output_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BARSIM_OUT_DIR", str(tmp_path))
        code = main(["analyze", "--snr-db", "10", "--relays", "1", "--no-figures"])
        assert code == 0
        assert (tmp_path / "analytical-only.csv").exists()

    def test_spec_error_exit_code(self, capsys):
        code = main(["simulate", "--snr-db", "10", "--relays", "0",
                     "--slots", "100", "--no-figures"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_mu_convergence_experiment(self, tmp_path):
        out = tmp_path / "mu.csv"
        code = main(["simulate", "--experiment", "mu-convergence", "--snr-db", "10",
                     "--relays", "2", "--protocol", "adaptive", "--slots", "5000",
                     "--no-figures", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert rows
        assert "mu_e_1" in rows[0] and "mu_star_1" in rows[0]

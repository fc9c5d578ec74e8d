"""Tests for the command-line interface (driven through main())."""

import json
import subprocess
import sys

import pytest

from ci3p3.cli import EXIT_CONFIG, EXIT_OK, EXIT_STATE, main


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestTable:
    def test_text_output(self, capsys):
        code, out, _ = run_cli(
            ["table", "--pt", "0.3", "--eps1", "0.05", "--eps2", "0.05", "--nmax", "12"], capsys
        )
        assert code == EXIT_OK
        assert "DU" in out and "E" in out

    def test_csv_output(self, capsys, tmp_path):
        target = tmp_path / "table.csv"
        code, _, _ = run_cli(
            ["table", "--nmax", "6", "--format", "csv", "-o", str(target)], capsys
        )
        assert code == EXIT_OK
        lines = target.read_text().strip().splitlines()
        assert lines[0] == "n,y,decision"
        assert lines[1] == "1,0,E"

    def test_same_cells_either_format(self, capsys):
        _, text_out, _ = run_cli(["table", "--nmax", "4"], capsys)
        _, csv_out, _ = run_cli(["table", "--nmax", "4", "--format", "csv"], capsys)
        # count decisions cell-by-cell: csv has sum(n+1) rows
        csv_cells = [line.split(",")[2] for line in csv_out.strip().splitlines()[1:]]
        text_cells = [c for line in text_out.splitlines()[1:] for c in line.split()[1:]]
        assert csv_cells.count("E") == text_cells.count("E")
        assert csv_cells.count("DU") == text_cells.count("DU")

    def test_invalid_interval(self, capsys):
        code, _, err = run_cli(["table", "--pt", "0.04", "--eps1", "0.05"], capsys)
        assert code == EXIT_CONFIG
        assert "lower bound" in err


class TestInitAndDecide:
    def test_init_and_first_decision(self, capsys, tmp_path):
        state_file = tmp_path / "trial.json"
        code, out, _ = run_cli(
            ["init", "--grid", "3x3", "--max-n", "30", "--seed", "42", "-o", str(state_file)],
            capsys,
        )
        assert code == EXIT_OK
        assert "d11" in out
        code, out, _ = run_cli(["decide", "--state", str(state_file)], capsys)
        assert code == EXIT_OK
        assert "next cohort: d11" in out

    def test_golden_walkthrough_via_cli(self, capsys, tmp_path):
        state_file = tmp_path / "trial.json"
        run_cli(["init", "--grid", "3x3", "--max-n", "30", "--seed", "7", "-o", str(state_file)], capsys)
        outcomes = [0, 0, 2, 1, 0, 1, 1, 0, 3, 0]
        coords = [(1, 1), (2, 1), (2, 2), (2, 1), (3, 1), (3, 2), (3, 2), (3, 2), (3, 3), (3, 2)]
        for (i, j), dlt in zip(coords, outcomes):
            code, out, err = run_cli(
                ["decide", "--state", str(state_file), "--dc", f"{i},{j}", "--dlt", str(dlt)],
                capsys,
            )
            assert code == EXIT_OK, err
        assert "MTDC: d32" in out
        doc = json.loads(state_file.read_text())
        assert doc["stage"] == "stopped"

    def test_decide_rejects_excluded(self, capsys, tmp_path):
        state_file = tmp_path / "trial.json"
        run_cli(["init", "--grid", "3x3", "--seed", "1", "-o", str(state_file)], capsys)
        run_cli(["decide", "--state", str(state_file), "--dc", "1,1", "--dlt", "3"], capsys)
        code, _, err = run_cli(
            ["decide", "--state", str(state_file), "--dc", "1,1", "--dlt", "0"], capsys
        )
        assert code == EXIT_CONFIG

    def test_corrupt_state_is_integrity_error(self, capsys, tmp_path):
        state_file = tmp_path / "trial.json"
        run_cli(["init", "--grid", "3x3", "--seed", "1", "-o", str(state_file)], capsys)
        doc = json.loads(state_file.read_text())
        doc["dcs"][0]["y"] += 1
        state_file.write_text(json.dumps(doc))
        code, _, err = run_cli(["decide", "--state", str(state_file)], capsys)
        assert code == EXIT_STATE
        assert "state error" in err

    def test_missing_state_file(self, capsys, tmp_path):
        code, _, _ = run_cli(["decide", "--state", str(tmp_path / "nope.json")], capsys)
        assert code == EXIT_STATE


class TestScenarios:
    def test_study1_export(self, capsys, tmp_path):
        out_dir = tmp_path / "sc"
        code, out, _ = run_cli(["scenarios", "--suite", "study1", "-o", str(out_dir)], capsys)
        assert code == EXIT_OK
        assert (out_dir / "study1_sc1.csv").exists()
        assert (out_dir / "study1_sc8.json").exists()
        report = json.loads((out_dir / "classification.json").read_text())
        assert report["count"] == 8

    def test_study2_histogram(self, capsys, tmp_path):
        out_dir = tmp_path / "sc2"
        code, out, _ = run_cli(["scenarios", "--suite", "study2", "-o", str(out_dir)], capsys)
        assert code == EXIT_OK
        report = json.loads((out_dir / "classification.json").read_text())
        assert report["histogram"] == {
            "all_safe": 13, "1": 18, "2": 24, "3": 5, ">3": 18, "all_toxic": 22,
        }


class TestSimulate:
    def test_small_run_with_config(self, capsys, tmp_path):
        config = {
            "schema": "ci3p3-config/1",
            "design": {"max_n": 30},
            "scenarios": "study1",
            "n_reps": 5,
            "master_seed": 3,
            "workers": 1,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(config))
        out_dir = tmp_path / "oc"
        code, out, _ = run_cli(
            ["simulate", "--config", str(cfg_path), "-o", str(out_dir)], capsys
        )
        assert code == EXIT_OK
        assert "pcs" in out
        assert (out_dir / "oc.csv").exists()
        assert (out_dir / "oc.json").exists()
        assert (out_dir / "oc_long.csv").exists()

    def test_unknown_config_key_rejected(self, capsys, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"schema": "ci3p3-config/1", "bogus": 1}))
        code, _, err = run_cli(["simulate", "--config", str(cfg_path)], capsys)
        assert code == EXIT_CONFIG
        assert "bogus" in err

    def test_missing_schema_rejected(self, capsys, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"n_reps": 5}))
        code, _, _ = run_cli(["simulate", "--config", str(cfg_path)], capsys)
        assert code == EXIT_CONFIG

    def test_cli_overrides(self, capsys):
        code, out, _ = run_cli(
            ["simulate", "--suite", "study1", "--reps", "3", "--workers", "1",
             "--master-seed", "5", "--max-n", "30"],
            capsys,
        )
        assert code == EXIT_OK
        assert "scenarios: study1 (8)" in out


class TestConduct:
    def test_scripted_session(self, tmp_path):
        state_file = tmp_path / "trial.json"
        subprocess.run(
            [sys.executable, "-m", "ci3p3.cli", "init", "--grid", "3x3", "--max-n", "12",
             "--seed", "11", "-o", str(state_file)],
            check=True,
            capture_output=True,
        )
        # four cohorts then the session ends at max N
        proc = subprocess.run(
            [sys.executable, "-m", "ci3p3.cli", "conduct", "--state", str(state_file)],
            input="0\n0\n1\nq\n",
            text=True,
            capture_output=True,
        )
        assert proc.returncode == 0
        doc = json.loads(state_file.read_text())
        assert len(doc["log"]) == 3

    def test_bad_entry_rejected_and_loop_continues(self, tmp_path):
        state_file = tmp_path / "trial.json"
        subprocess.run(
            [sys.executable, "-m", "ci3p3.cli", "init", "--grid", "3x3", "--max-n", "6",
             "--seed", "11", "-o", str(state_file)],
            check=True,
            capture_output=True,
        )
        proc = subprocess.run(
            [sys.executable, "-m", "ci3p3.cli", "conduct", "--state", str(state_file)],
            input="9\nx\n0\nq\n",
            text=True,
            capture_output=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.count("rejected") == 2
        doc = json.loads(state_file.read_text())
        assert len(doc["log"]) == 1

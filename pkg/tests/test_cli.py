import json
import subprocess
import sys

import pytest

from screened_anderson.cli import main


def run_cli(argv):
    return main(argv)


class TestDeterminism:
    def test_identical_bytes_for_identical_config_and_seed(self, tmp_path):
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        args = ["charfun", "--dist", "bernoulli-sym", "--d", "1", "--A", "2",
                "--tmax", "1e4", "--points", "10", "--seed", "5", "--no-plot"]
        assert run_cli(args + ["--out", str(out1)]) == 0
        assert run_cli(args + ["--out", str(out2)]) == 0
        assert (out1 / "charfun.csv").read_bytes() == (out2 / "charfun.csv").read_bytes()
        j1 = (out1 / "charfun.json").read_bytes()
        j2 = (out2 / "charfun.json").read_bytes()
        assert j1 == j2

    def test_thread_count_does_not_change_output(self, tmp_path):
        base = ["wegner", "--L", "2", "--tau", "2", "--theta", "0.5", "--A", "2",
                "--d", "1", "--g", "1", "--trials", "300",
                "--energies", "1.0,2.0,3.0", "--seed", "7", "--no-plot"]
        out1 = tmp_path / "t1"
        out4 = tmp_path / "t4"
        assert run_cli(base + ["--out", str(out1), "--threads", "1"]) == 0
        assert run_cli(base + ["--out", str(out4), "--threads", "4"]) == 0
        assert (out1 / "wegner.csv").read_bytes() == (out4 / "wegner.csv").read_bytes()
        assert (out1 / "wegner.json").read_bytes() == (out4 / "wegner.json").read_bytes()


class TestReports:
    def test_json_embeds_config_seed_version(self, tmp_path):
        out = tmp_path / "r"
        assert run_cli(["dos", "--dist", "uniform01", "--d", "1", "--L", "4",
                        "--trials", "1200", "--bins", "15", "--seed", "9",
                        "--out", str(out), "--no-plot"]) == 0
        doc = json.loads((out / "dos.json").read_text())
        assert doc["tool"] == "screened-anderson"
        assert doc["master_seed"] == 9
        assert doc["config"]["L"] == 4
        assert "version" in doc
        assert doc["normalization"] == pytest.approx(1.0, abs=1e-9)

    def test_plot_renders_png(self, tmp_path):
        out = tmp_path / "p"
        assert run_cli(["charfun", "--tmax", "1e3", "--points", "8",
                        "--out", str(out), "--seed", "1"]) == 0
        png = (out / "charfun.png").read_bytes()
        assert png[:8] == b"\x89PNG\r\n\x1a\n"

    def test_config_file_round_trip(self, tmp_path):
        cfg_path = tmp_path / "msa.json"
        cfg_path.write_text(json.dumps({
            "A": 3.0, "d": 1, "b": 1.2, "tau": 1.05, "alpha": 1.1, "S": 14,
            "theta": 0.5, "m": 1.0, "L0": 6, "k_max": 0, "trials": 60,
            "energy": 0.0, "g": 500.0,
        }))
        out = tmp_path / "m"
        assert run_cli(["msa", "--config", str(cfg_path), "--seed", "3",
                        "--out", str(out), "--no-plot"]) == 0
        doc = json.loads((out / "msa.json").read_text())
        assert doc["config"]["S"] == 14
        assert doc["scales"][0]["k"] == 0

    def test_flag_overrides_config(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"tmax": 1e3, "points": 8, "A": 2.0}))
        out = tmp_path / "o"
        assert run_cli(["charfun", "--config", str(cfg_path), "--A", "4",
                        "--out", str(out), "--seed", "0", "--no-plot"]) == 0
        doc = json.loads((out / "charfun.json").read_text())
        assert doc["config"]["A"] == 4.0


class TestExitCodes:
    def test_selftest_ok(self):
        assert run_cli(["selftest", "--seed", "0"]) == 0

    def test_config_validation_failure_is_2(self, tmp_path):
        out = tmp_path / "x"
        code = run_cli(["wegner", "--L", "2", "--tau", "0.5", "--theta", "0.1",
                        "--trials", "200", "--out", str(out), "--no-plot"])
        assert code == 2

    def test_missing_config_file_is_2(self, tmp_path):
        code = run_cli(["charfun", "--config", str(tmp_path / "nope.json"),
                        "--out", str(tmp_path / "y"), "--no-plot"])
        assert code == 2

    def test_missing_output_parent_is_2(self, tmp_path):
        code = run_cli(["charfun", "--tmax", "1e3", "--points", "6",
                        "--out", str(tmp_path / "no" / "such" / "dir"), "--no-plot"])
        assert code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli(["charfun", "--frobnicate", "1"])
        assert exc.value.code == 2

    def test_console_script_installed(self):
        proc = subprocess.run(
            [sys.executable, "-m", "screened_anderson", "--version"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.strip()


class TestFormatFlag:
    def test_json_format_skips_csv(self, tmp_path):
        out = tmp_path / "fj"
        assert run_cli(["charfun", "--tmax", "1e3", "--points", "6", "--format", "json",
                        "--out", str(out), "--seed", "0", "--no-plot"]) == 0
        assert (out / "charfun.json").exists()
        assert not (out / "charfun.csv").exists()

    def test_csv_format_writes_both(self, tmp_path):
        out = tmp_path / "fc"
        assert run_cli(["charfun", "--tmax", "1e3", "--points", "6", "--format", "csv",
                        "--out", str(out), "--seed", "0", "--no-plot"]) == 0
        assert (out / "charfun.json").exists()
        assert (out / "charfun.csv").exists()


class TestMsaDeterminism:
    def test_msa_config_run_twice_byte_identical(self, tmp_path):
        cfg_path = tmp_path / "msa.json"
        cfg_path.write_text(json.dumps({
            "A": 3.0, "d": 1, "b": 1.2, "tau": 1.05, "alpha": 1.1, "S": 14,
            "theta": 0.5, "m": 1.0, "L0": 6, "k_max": 1, "trials": 50,
            "energy": 0.0, "g": 500.0,
        }))
        outs = []
        for name in ("m1", "m2"):
            out = tmp_path / name
            assert run_cli(["msa", "--config", str(cfg_path), "--seed", "7",
                            "--out", str(out), "--no-plot"]) == 0
            outs.append(out)
        assert (outs[0] / "msa.csv").read_bytes() == (outs[1] / "msa.csv").read_bytes()
        assert (outs[0] / "msa.json").read_bytes() == (outs[1] / "msa.json").read_bytes()


class TestDistResolution:
    def test_config_file_carries_distribution(self, tmp_path):
        cfg_path = tmp_path / "w.json"
        cfg_path.write_text(json.dumps({
            "L": 2, "tau": 2.0, "theta": 0.5, "A": 2.0, "d": 1, "g": 1.0,
            "trials": 200, "energies": "2.0",
            "dist": {"kind": "bernoulli_p", "p": 0.4},
        }))
        out = tmp_path / "w"
        assert run_cli(["wegner", "--config", str(cfg_path), "--seed", "1",
                        "--out", str(out), "--no-plot"]) == 0
        doc = json.loads((out / "wegner.json").read_text())
        assert doc["config"]["dist"] == {"kind": "bernoulli_p", "p": 0.4}

    def test_flag_beats_config_distribution(self, tmp_path):
        cfg_path = tmp_path / "w.json"
        cfg_path.write_text(json.dumps({
            "L": 2, "tau": 2.0, "theta": 0.5, "A": 2.0, "d": 1, "g": 1.0,
            "trials": 200, "energies": "2.0",
            "dist": {"kind": "bernoulli_p", "p": 0.4},
        }))
        out = tmp_path / "x"
        assert run_cli(["wegner", "--config", str(cfg_path), "--dist", "bernoulli-sym",
                        "--seed", "1", "--out", str(out), "--no-plot"]) == 0
        doc = json.loads((out / "wegner.json").read_text())
        assert doc["config"]["dist"] == {"kind": "bernoulli_sym"}

    def test_bernoulli_p_without_p_is_config_error(self, tmp_path):
        assert run_cli(["dos", "--dist", "bernoulli-p", "--trials", "1200",
                        "--out", str(tmp_path / "d"), "--no-plot"]) == 2

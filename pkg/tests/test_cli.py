import json
import shutil
import subprocess
import sys

import pytest

from mhd_certify.cli import EXIT_NUMERIC, EXIT_OK, EXIT_REJECT, EXIT_USAGE, main
from mhd_certify.spectral import FieldPair, pair_to_dict, random_field

TRKAL = ["--beltrami", "trkal", "--set", "alpha=0.03", "--set", "beta=0.04", "--set", "gamma=0.01",
         "--set", "kappa=1", "--set", "lam=2"]


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


class TestSimulate:
    def test_random_datum_outputs(self, tmp_path, capsys):
        code = run(tmp_path, "simulate", "--random", "--amplitude", "0.1", "--t-end", "0.1", "--dt", "0.01",
                   "--cutoff", "1")
        assert code == EXIT_OK
        header = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
        assert header.startswith("t,norm_0.0")
        doc = json.loads((tmp_path / "trajectory.json").read_text())
        assert len(doc["times"]) == 11 and doc["config_digest"]
        assert "config digest" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["simulate", "--random", "--seed", "3", "--t-end", "0.05", "--cutoff", "1", "--format", "csv"]
        assert main([*args, "--out", str(a)]) == main([*args, "--out", str(b)]) == EXIT_OK
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()

    def test_datum_file_and_config(self, tmp_path):
        pair = FieldPair(random_field(1, 2, 2, amplitude=0.1), random_field(2, 2, 2, amplitude=0.1))
        (tmp_path / "w.json").write_text(json.dumps(pair_to_dict(pair)))
        (tmp_path / "c.toml").write_text('d = 2\ncutoff = 2\nt_end = 0.02\ndt = 0.01\nformat = "json"\n')
        code = run(tmp_path, "simulate", "--config", str(tmp_path / "c.toml"), "--datum", str(tmp_path / "w.json"))
        assert code == EXIT_OK
        assert (tmp_path / "trajectory.json").exists() and not (tmp_path / "trajectory.csv").exists()

    def test_flag_beats_config(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"t_end": 0.05, "dt": 0.01, "cutoff": 1}))
        code = run(tmp_path, "simulate", "--config", str(tmp_path / "c.json"), "--t-end", "0.02", "--zero",
                   "--format", "json")
        assert code == EXIT_OK
        assert len(json.loads((tmp_path / "trajectory.json").read_text())["times"]) == 3


class TestCertify:
    def test_global_certificate(self, tmp_path, capsys):
        code = run(tmp_path, "certify", *TRKAL, "--t-end", "2", "--dt", "0.01", "--perturb", "1e-4")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["global"] is True and doc["method"] == "closed-form"
        assert "+inf" in capsys.readouterr().out

    def test_large_error_gives_finite_tc(self, tmp_path):
        code = run(tmp_path, "certify", *TRKAL, "--t-end", "2", "--dt", "0.001", "--delta", "3=50", "--delta", "4=50")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["global"] is False and 0 < doc["T_c"] < 2

    def test_missing_delta(self, tmp_path):
        assert run(tmp_path, "certify", *TRKAL, "--t-end", "0.1") == EXIT_USAGE

    def test_refinement_failure_exit_code(self, tmp_path):
        code = run(tmp_path, "certify", "--random", "--amplitude", "3", "--cutoff", "1", "--nu", "0.01",
                   "--eta", "0.01", "--dt", "0.5", "--t-end", "5", "--epsilon", "galerkin", "--delta", "3=0",
                   "--delta", "4=0")
        assert code == EXIT_NUMERIC


class TestRadius:
    def test_sweep(self, tmp_path, capsys):
        code = run(tmp_path, "radius", *TRKAL, "--n-sweep", "3", "3.5", "--delta", "3=1e-5", "--delta", "4=1e-5",
                   "--format", "json")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "radius.json").read_text())
        assert [e["n"] for e in doc["entries"]] == [3.0, 3.5]
        assert doc["entries"][0]["report"]["regime"] == "inside_half"

    def test_zero_base(self, tmp_path):
        assert run(tmp_path, "radius", "--zero", "--format", "json") == EXIT_OK
        doc = json.loads((tmp_path / "radius.json").read_text())
        assert doc["entries"][0]["budget"]["J"]["3.0"] == 0.0


class TestBeltrami:
    def test_accepted(self, tmp_path, capsys):
        code = run(tmp_path, "beltrami", "--beltrami", "sinusoidal", "--set", "V=0,0,1", "--set", "C=0,0,1",
                   "--set", "k=1,0,0", "--set", "l=0,1,0", "--set", "phi=0.785", "--cutoff", "1")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "beltrami_pair.json").read_text())
        assert all(doc["provenance"]["checks"].values())
        assert "FAIL" not in capsys.readouterr().out

    def test_rejected(self, tmp_path, capsys):
        code = run(tmp_path, "beltrami", "--beltrami", "sinusoidal", "--set", "V=0,1,1", "--set", "C=0,0,1",
                   "--set", "k=1,0,0", "--set", "l=0,1,0", "--cutoff", "1")
        assert code == EXIT_REJECT
        assert "(V.l)C = 0" in capsys.readouterr().err

    def test_scaled_planar(self, tmp_path):
        code = run(tmp_path, "beltrami", "--d", "2", "--beltrami", "scaled", "--set", "W=2,-1", "--set", "k=1,2",
                   "--set", "alpha=0.5")
        assert code == EXIT_OK


class TestDiagnose:
    def test_beltrami_base(self, tmp_path, capsys):
        code = run(tmp_path, "diagnose", *TRKAL, "--t-end", "40", "--dt", "0.1")
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "diagnostics.json").read_text())
        assert doc["diagnostics"]["verdict"] == "decaying"
        assert "verdict: decaying" in capsys.readouterr().out


class TestErrors:
    def test_bad_flag(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run(tmp_path, "simulate", "--bogus")
        assert info.value.code == EXIT_USAGE

    def test_missing_constants(self, tmp_path):
        assert run(tmp_path, "certify", *TRKAL, "--constants", str(tmp_path / "none.json")) == EXIT_USAGE

    def test_no_datum(self, tmp_path):
        assert run(tmp_path, "simulate") == EXIT_USAGE

    def test_two_data(self, tmp_path):
        assert run(tmp_path, "simulate", "--zero", "--random") == EXIT_USAGE

    def test_bad_config_key(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"viscosity": 1}))
        assert run(tmp_path, "simulate", "--config", str(tmp_path / "c.json"), "--zero") == EXIT_USAGE

    def test_dt_not_dividing(self, tmp_path):
        assert run(tmp_path, "simulate", "--zero", "--dt", "0.3", "--t-end", "1") == EXIT_USAGE

    def test_constants_dimension_mismatch(self, tmp_path):
        (tmp_path / "k.json").write_text(json.dumps({"d": 2, "entries": [{"p": 3.5, "n": 3.5, "K": 1, "G": 1}]}))
        assert run(tmp_path, "radius", "--zero", "--constants", str(tmp_path / "k.json")) == EXIT_USAGE


@pytest.mark.skipif(shutil.which("mhd-certify") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["mhd-certify", "beltrami", "--beltrami", "trkal", "--set", "alpha=1", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "kappa = 1" in res.stdout


def test_module_entry(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mhd_certify", "simulate", "--zero", "--t-end", "0.02", "--dt", "0.01",
                          "--cutoff", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr

import json

import numpy as np
import pytest

from app import __version__
from app.cli import EXIT_OK, EXIT_USAGE, run
from app.services.opcalc import dump_tuple, validate_tuple


@pytest.fixture
def scalar_file(tmp_path):
    path = tmp_path / "scalar.json"
    path.write_text(json.dumps(dump_tuple(validate_tuple([np.array([[1.5]])]))))
    return str(path)


@pytest.fixture
def pair_file(tmp_path):
    path = tmp_path / "pair.json"
    path.write_text(json.dumps(dump_tuple(validate_tuple([np.diag([1.0, 2.0]), np.diag([0.5, 3.0])]))))
    return str(path)


class TestFunctionCommands:
    """norm, decompose and reproduce"""

    def test_norm(self, capsys):
        assert run(["norm", "--fn", "res([1], 1, 1)", "--n", "1"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["total"] == pytest.approx(2.0, rel=1e-4)
        assert report["quad"]["mapping"] == "compact"

    def test_norm_single_set(self, capsys):
        assert run(["norm", "--fn", "res([1], 2, 1)", "--omega", "1"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["entry"]["omega"] == [1]
        assert out["entry"]["value"] == pytest.approx(0.5, rel=1e-4)

    def test_repeated_runs_are_identical(self, capsys):
        argv = ["norm", "--fn", "res([1], 1, 1) + exp([2])", "--n", "1"]
        assert run(argv) == EXIT_OK
        first = capsys.readouterr().out
        assert run(argv) == EXIT_OK
        assert capsys.readouterr().out == first

    def test_tolerance_flag(self, capsys):
        assert run(["norm", "--fn", "exp([1])", "--tol", "1e-5"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["quad"]["rel_tol"] == 1e-5

    def test_decompose(self, capsys):
        assert run(["decompose", "--fn", "1 + res([1, 0], 1, 1)", "--n", "2"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert [p["omega"] for p in out["parts"]] == [[], [1]]

    def test_bad_function(self, capsys):
        assert run(["norm", "--fn", "res([1], 1", "--n", "1"]) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    def test_reproduce_shifted(self, capsys):
        assert run(["reproduce", "--fn", "res([1], 1, 1)", "--z", "1+0.5i", "--t", "1"]) == EXIT_OK
        result = json.loads(capsys.readouterr().out)["result"]
        assert result["passed"] is True
        # 1 / (3 + 0.5i)
        assert result["lhs"] == pytest.approx([3.0 / 9.25, -0.5 / 9.25], abs=1e-9)

    def test_reproduce_bad_point(self, capsys):
        assert run(["reproduce", "--fn", "res([1], 1, 1)", "--z", "one"]) == EXIT_USAGE


class TestOperatorCommands:
    """calc, spectrum and gsf over tuple files"""

    def test_calc(self, capsys, scalar_file):
        assert run(["calc", "--fn", "res([1], 1, 1)", "--matrices", scalar_file]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["value"][0][0] == pytest.approx([0.4, 0.0], abs=1e-6)

    def test_calc_dimension_from_tuple(self, capsys, pair_file):
        assert run(["calc", "--fn", "res([1, 1], 1, 1)", "--matrices", pair_file]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert len(out["value"]) == 2

    def test_missing_file(self, capsys, tmp_path):
        code = run(["calc", "--fn", "res([1], 1, 1)", "--matrices", str(tmp_path / "absent.json")])
        assert code == EXIT_USAGE

    def test_spectrum(self, capsys, pair_file):
        assert run(["spectrum", "--matrices", pair_file]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["spectrum"]["multiplicities"] == [1, 1]
        assert out["quad"]["mapping"] == "compact"
        assert out["version"] == __version__

    def test_spectrum_seed_from_environment(self, capsys, monkeypatch, pair_file):
        monkeypatch.setenv("BESOV_SEED", "7")
        assert run(["spectrum", "--matrices", pair_file]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["seed"] == 7
        assert run(["spectrum", "--matrices", pair_file, "--seed", "3"]) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["seed"] == 3

    def test_gsf_single_set(self, capsys, scalar_file):
        assert run(["gsf", "--matrices", scalar_file, "--omega", "1", "--tol", "1e-5"]) == EXIT_OK
        entry = json.loads(capsys.readouterr().out)["entry"]
        assert entry["omega"] == [1]
        assert entry["gamma_lower"] <= entry["gamma_upper"]


class TestVerify:
    """Suite runs and the command-line surface"""

    def test_hp_csv(self, capsys, scalar_file):
        code = run(["verify", "--suite", "hp", "--matrices", scalar_file, "--fn", "res([1], 1, 1)",
                    "--fn", "exp([2])", "--format", "csv"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "name,gap,budget,passed"
        assert len(lines) == 1 + 2 * 2 + 2
        assert all(line.endswith(",true") for line in lines[1:5])
        assert lines[5].startswith("# quad=alpha_max=")
        assert lines[6] == f"# version={__version__}"

    def test_csv_footer_records_tolerance(self, capsys, scalar_file):
        code = run(["verify", "--suite", "hp", "--matrices", scalar_file, "--fn", "exp([1])",
                    "--format", "csv", "--tol", "1e-5"])
        assert code == EXIT_OK
        footer = [line for line in capsys.readouterr().out.splitlines() if line.startswith("# quad=")]
        assert "rel_tol=1e-05" in footer[0].split(";")

    @pytest.mark.slow
    def test_estimate_csv_footer(self, capsys):
        run(["estimate", "--format", "csv"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[-2].startswith("# quad=")
        assert lines[-1] == f"# version={__version__}"

    def test_hp_json(self, capsys, scalar_file):
        assert run(["verify", "--suite", "hp", "--matrices", scalar_file, "--fn", "default"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["suite"] == "hp"
        assert report["n_failed"] == 0

    def test_unknown_suite(self, capsys):
        assert run(["verify", "--suite", "nonexistent"]) == EXIT_USAGE

    def test_version(self, capsys):
        assert run(["--version"]) == EXIT_OK
        assert "besov-calc" in capsys.readouterr().out

    def test_no_command(self, capsys):
        assert run([]) == EXIT_USAGE

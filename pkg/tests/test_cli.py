import json
import subprocess
import sys

import pytest

from sourcegap import cli
from sourcegap.core import ValidationError


def run_cli(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out
    return code, out


def run_json(args, capsys):
    code, out = run_cli(args, capsys)
    return code, json.loads(out)


def test_parse_set():
    E = cli.parse_set("-2,-1,1,2")
    assert len(E.intervals) == 2
    assert not cli.parse_set(" -inf,0").is_bounded
    with pytest.raises(ValidationError):
        cli.parse_set("1,2,3")


def test_prob_halfline(capsys):
    code, data = run_json(["prob", "--a", "0", "--k1", "1", "--k2", "0",
                           "--E", "-inf,0"], capsys)
    assert code == 0
    assert abs(data["probability"] - 0.5) < 1e-12
    assert data["schema_version"] == 1


def test_prob_matches_library_bytes(capsys):
    import sourcegap as sg
    args = ["prob", "--a", "1", "--k1", "1", "--k2", "1", "--E", "-2,2"]
    code, out1 = run_cli(args, capsys)
    assert code == 0
    code, out2 = run_cli(args, capsys)
    assert out1 == out2
    data = json.loads(out1)
    p = float(sg.gap_probability(sg.SourceSpec(1, 1, 1), sg.normalize([(-2, 2)]),
                                 sg.PrecisionConfig(30)))
    assert data["probability"] == p


def test_prob_degenerate_exit_2(capsys):
    code, _ = run_cli(["prob", "--a", "0", "--k1", "1", "--k2", "1",
                       "--E", "-2,2"], capsys)
    assert code == 2


def test_prob_missing_a_exit_2(capsys):
    code, _ = run_cli(["prob", "--k1", "1", "--k2", "0", "--E", "-1,1"], capsys)
    assert code == 2


def test_mc_reproducible_bytes(capsys):
    args = ["mc", "--a", "1", "--k1", "1", "--k2", "1", "--E", "-2,2",
            "--samples", "20000", "--seed", "5"]
    _, out1 = run_cli(args, capsys)
    _, out2 = run_cli(args, capsys)
    assert out1 == out2


def test_mc_full_line(capsys):
    code, data = run_json(["mc", "--a", "1", "--k1", "1", "--k2", "0",
                           "--E", "-inf,inf", "--samples", "2000", "--seed", "1"],
                          capsys)
    assert code == 0 and data["p_hat"] == 1.0


def test_mc_agrees_with_prob(capsys):
    _, mc_data = run_json(["mc", "--a", "1", "--k1", "1", "--k2", "1",
                           "--E", "-2,2", "--samples", "100000", "--seed", "3"],
                          capsys)
    _, p_data = run_json(["prob", "--a", "1", "--k1", "1", "--k2", "1",
                          "--E", "-2,2"], capsys)
    assert abs(mc_data["p_hat"] - p_data["probability"]) < 3 * mc_data["std_err"]


def test_check_identity_json_and_exit(capsys):
    code, data = run_json(["check-identity", "--id", "eq14", "--a", "1",
                           "--k1", "1", "--k2", "1", "--E", "-1,1"], capsys)
    assert code == 0
    assert data["passed"] is True
    assert data["residual"] < 1e-6
    assert "formula" in data and "step_sizes" in data and "digits" in data


def test_check_identity_failing_tolerance(capsys):
    code, data = run_json(["check-identity", "--id", "eq14", "--a", "1",
                           "--k1", "1", "--k2", "1", "--E", "-1,1",
                           "--tol", "1e-30"], capsys)
    assert code == 1
    assert data["passed"] is False


def test_pearcey_prob_stability(capsys):
    code, d40 = run_json(["pearcey-prob", "--t", "0", "--E", "-1,1",
                          "--order", "40", "--digits", "20"], capsys)
    assert code == 0
    code, d20 = run_json(["pearcey-prob", "--t", "0", "--E", "-1,1",
                          "--order", "20", "--digits", "20"], capsys)
    assert abs(d40["log_det"] - d20["log_det"]) < 1e-10


def test_pearcey_prob_grid_csv(capsys):
    code, out = run_cli(["pearcey-prob", "--E", "-1,1", "--order", "16",
                         "--digits", "16", "--grid", "t=-0.5:0.5:3",
                         "--format", "csv"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("#")
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header.split(",") == ["t", "log_det"]
    data_rows = [ln for ln in lines if not ln.startswith("#")][1:]
    ts = [float(r.split(",")[0]) for r in data_rows]
    assert ts == sorted(ts) and len(ts) == 3


def test_output_file(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code, out = run_cli(["prob", "--a", "0.5", "--k1", "1", "--k2", "0",
                         "--E", "-1,1", "-o", str(out_path)], capsys)
    assert code == 0
    assert out_path.read_text() == out


def test_config_file_and_flag_precedence(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("a = 0.5\nk1 = 1\nk2 = 0\nE = -1,1\ndigits = 21\n")
    code, data = run_json(["--config", str(conf), "prob", "--k1", "1",
                           "--k2", "0", "--E", "-1,1"], capsys)
    assert code == 0
    assert data["a"] == 0.5 and data["digits"] == 21
    # explicit flag wins over the file
    code, data = run_json(["--config", str(conf), "prob", "--a", "1.0",
                           "--k1", "1", "--k2", "0", "--E", "-1,1"], capsys)
    assert data["a"] == 1.0


def test_env_digits(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SOURCEGAP_DIGITS", "22")
    code, data = run_json(["prob", "--a", "0.5", "--k1", "1", "--k2", "0",
                           "--E", "-1,1"], capsys)
    assert data["digits"] == 22
    # flag beats env
    code, data = run_json(["prob", "--a", "0.5", "--k1", "1", "--k2", "0",
                           "--E", "-1,1", "--digits", "33"], capsys)
    assert data["digits"] == 33


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "sourcegap.cli", "prob",
                          "--a", "0", "--k1", "1", "--k2", "0", "--E", "-inf,0"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["probability"] == 0.5


def test_scaling_small(capsys):
    code, data = run_json(["scaling", "--s", "0", "--G", "-1,1", "--n", "8,16",
                           "--order", "24", "--digits", "20"], capsys)
    assert code == 0
    assert data["decreasing"] is True
    assert len(data["rows"]) == 2
    assert data["rows"][0]["abs_diff"] > data["rows"][1]["abs_diff"]

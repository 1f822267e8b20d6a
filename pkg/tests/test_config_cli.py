import json
import subprocess
import sys

import pytest

from fdesingular import ConfigError
from fdesingular.cli import main
from fdesingular.config import SCHEMA, parse_config


def test_empty_file_needs_command():
    with pytest.raises(ConfigError, match="command"):
        parse_config("")
    cfg = parse_config("", require_command=False)
    assert cfg["gamma"] == 2.75 and cfg.provenance["gamma"] == "default"


def test_section_override():
    cfg = parse_config("[run]\ncommand = profile\n[exponents]\ngamma = 2.6\n", "cfg.ini")
    assert cfg["gamma"] == 2.6
    assert cfg.provenance["gamma"] == "cfg.ini:4"
    assert cfg.command == "profile"


def test_duplicate_key_names_both_lines():
    text = "[run]\ncommand = profile\n[exponents]\ngamma = 2.6\nm = 0.2\ngamma = 2.7\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "x.ini")
    msg = str(exc.value)
    assert "x.ini:6" in msg and "line 4" in msg


@pytest.mark.parametrize("text,fragment", [
    ("[run]\ncommand = paint\n", "command"),
    ("[run]\ncommand = profile\nwibble = 3\n", "unknown key"),
    ("[colours]\n", "unknown section"),
    ("[run]\ncommand = profile\n[pde]\ngamma = 2.7\n", "belongs in [exponents]"),
    ("[run]\ncommand = profile\n[exponents]\nn = three\n", "cannot parse"),
    ("[run]\ncommand = profile\n[exponents]\nm = nan\n", "finite"),
    ("[run]\ncommand = profile\n[profile]\npoints_per_decade = 4\n", "out of range"),
    ("[run\n", "malformed"),
    ("[run]\ncommand profile\n", "key = value"),
    ("[run]\ncommand = simulate\n[oracle]\nt0 = 2\nt1 = 1\n", "t0"),
    ("[run]\ncommand = simulate\n[oracle]\nT = 1\n", "0.9"),
    ("[run]\ncommand = simulate\n[pde]\npde_ppd = 100\nR = 50\n", "integer"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "c.ini")
    assert fragment in str(exc.value)


def test_overrides_and_provenance():
    cfg = parse_config("[run]\ncommand = profile\n", "c.ini", {"gamma": "2.6", "refine": "16, 32"})
    assert cfg["gamma"] == 2.6 and cfg.provenance["gamma"] == "cli"
    assert cfg["refine"] == (16, 32)
    lines = cfg.manifest_lines()
    assert "config.gamma = 2.6  # cli" in lines
    assert not any(line.startswith("config.out") for line in lines)


def test_manifest_lists_every_numeric_setting():
    cfg = parse_config("[run]\ncommand = profile\n")
    keys = {line.split(" =")[0][len("config."):] for line in cfg.manifest_lines()}
    assert keys == set(SCHEMA) - {"out"}


# --- CLI -----------------------------------------------------------------------------

def run_cli(args, capsys):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_config_error(tmp_path, capsys):
    code, _, err = run_cli(["profile", "gamma=9", "--out", tmp_path], capsys)
    assert code == 2
    summary = json.loads(err.strip().splitlines()[-1])
    assert summary["status"] == "config_error"


def test_cli_bad_token(tmp_path, capsys):
    assert run_cli(["profile", "gamma", "--out", tmp_path], capsys)[0] == 2
    assert run_cli(["profile", "--config", tmp_path / "missing.ini"], capsys)[0] == 2


def test_cli_numerical_failure(tmp_path, capsys):
    code, _, err = run_cli(["profile", "plateau_tol=1e-9", "r_max_cap=1e8", "--out", tmp_path],
                           capsys)
    assert code == 3
    summary = json.loads(err.strip().splitlines()[-1])
    assert summary["status"] == "numerical_failure" and "NoPlateau" in summary["message"]


def test_cli_diagnostic_failure(tmp_path, capsys):
    code, out, err = run_cli(["simulate", "R=10", "refine=8,16", "pde_rtol=1e-5", "snapshots=3",
                              "--out", tmp_path], capsys)
    assert code == 1
    summary = json.loads(err.strip().splitlines()[-1])
    assert "finest_error" in summary["failed_checks"]
    assert (tmp_path / "refinement.csv").exists() and (tmp_path / "manifest.txt").exists()


def test_cli_static_oracle(tmp_path, capsys):
    code, out, _ = run_cli(["simulate", "oracle=static", "R=10", "pde_ppd=32", "--out", tmp_path],
                           capsys)
    assert code == 0 and "static_drift" in out
    assert (tmp_path / "trajectory" / "manifest.txt").exists()


def test_cli_profile(tmp_path, capsys):
    code, out, _ = run_cli(["profile", "A=1", "--out", tmp_path], capsys)
    assert code == 0
    text = (tmp_path / "manifest.txt").read_text()
    assert "config.A = 1.0  # cli" in text and "diagnostics_passed = True" in text
    assert (tmp_path / "profile.txt").exists()


def test_cli_sweep(tmp_path, capsys):
    code, _, _ = run_cli(["sweep", "gammas=2.6,2.75", "--workers", "2", "--out", tmp_path], capsys)
    assert code == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("gamma,A0") and len(rows) == 3
    assert float(rows[1].split(",")[1]) == pytest.approx(0.19090650780, rel=1e-8)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fdesingular.cli", "profile", "n=2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2

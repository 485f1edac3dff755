import csv
import json

import numpy as np
import pytest

from qmetro import __version__
from qmetro.cli import SWEEP_COLUMNS, main
from qmetro.config import ExperimentConfig, parse_config
from qmetro.errors import ConfigurationError


def test_defaults_are_valid():
    cfg = ExperimentConfig()
    assert cfg.precise
    assert parse_config(cfg.to_json()).to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "text,match",
    [
        ('{"g": 4}', "odd"),
        ('{"sweep": {"g": [1, 2]}}', "odd"),
        ('{"colour": 1}', "unknown"),
        ("{not json", "JSON"),
        ('{"tau": 0}', "tau"),
        ('{"model": "heisenberg"}', "model"),
        ("[1, 2]", "object"),
    ],
)
def test_bad_configs(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(text)


def test_low_precision_warns():
    cfg = parse_config('{"r": 2, "beta": 1.0}')
    assert not cfg.precise
    assert "r >= 3" in cfg.warnings[0]


def test_random_local_model():
    cfg = parse_config('{"model": "random_local", "n": 2, "locality": 1, "model_seed": 4}')
    assert cfg.eigensystem().dim == 4


def write(tmp_path, payload):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(payload))
    return str(p)


def test_cli_commands_write_versioned_outputs(tmp_path):
    cfg = write(tmp_path, {"r": 2, "g": 1, "beta": 0.5, "iterations": 5, "trajectories": 50})
    for cmd in ("model", "qpe-table", "channel-build", "gap", "evolve", "trajectory"):
        assert main([cmd, "--config", cfg, "--out", str(tmp_path)]) == 0, cmd
    for name in ("model", "qpe_table", "channel", "gap", "trajectory"):
        assert json.loads((tmp_path / "reports" / f"{name}.json").read_text())["version"] == __version__
    assert json.loads((tmp_path / "states" / "evolve.json").read_text())["version"] == __version__
    assert (tmp_path / "states" / "trajectory.csv").read_text().startswith(f"# qmetro {__version__}")
    with np.load(tmp_path / "states" / "channel.npz") as z:
        assert str(z["version"]) == __version__
        assert z["E_tau"].shape == (16, 16)


def test_cli_seed_override(tmp_path):
    cfg = write(tmp_path, {"r": 2, "g": 1, "beta": 0.5, "iterations": 20, "trajectories": 10})
    outs = []
    for seed, sub in ((1, "a"), (1, "b"), (2, "c")):
        main(["trajectory", "--config", cfg, "--out", str(tmp_path / sub), "--seed", str(seed)])
        outs.append((tmp_path / sub / "states" / "trajectory.csv").read_text())
    assert outs[0] == outs[1] != outs[2]


def test_cli_sweep(tmp_path):
    cfg = write(tmp_path, {"sweep": {"r": [2, 3], "g": [1], "tau": [0.1], "beta": [1.0]}})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--jobs", "2"]) == 0
    lines = (tmp_path / "sweeps" / "sweep.csv").read_text().splitlines()
    assert lines[0] == f"# qmetro {__version__}"
    rows = list(csv.DictReader(lines[1:]))
    assert list(rows[0]) == SWEEP_COLUMNS
    assert [int(r["r"]) for r in rows] == [2, 3]
    assert all(float(r["gap"]) > 0 for r in rows)


def test_cli_verify_passes_on_defaults(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "reports" / "verify.json").read_text())
    assert report["passed"] and report["version"] == __version__
    assert "PASS" in capsys.readouterr().out


def test_cli_verify_reports_failure(tmp_path):
    # Z jumps only on the classical chain: the uniqueness check must fail
    cfg = write(tmp_path, {"h": 0.0, "jumps": "z"})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["model", "--config", write(tmp_path, {"g": 2})]) == 2
    assert "odd" in capsys.readouterr().err
    assert main(["model", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["model", "--jobs", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2

"""
Tests for the command line interface and runtime settings.
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import json

import pytest

from gridfreq.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, exit_code_for, main
from gridfreq.config import Settings, get_settings
from gridfreq.exceptions import ConfigurationError, InfeasibleDispatchError, NumericalError, ValidationError
from gridfreq.scenarios import bundled_scenario_path
from tests.test_scenarios import MINIMAL

TUTORIAL = str(bundled_scenario_path("tutorial_4bus"))


@pytest.fixture
def minimal_file(tmp_path):
    path = tmp_path / "minimal.json"
    path.write_text(json.dumps(MINIMAL), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


def test_schema_command(capsys) -> None:
    """Test that the schema command prints a JSON schema."""
    assert main(["schema"]) == EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert "buses" in schema["properties"]


def test_invalid_scenario_exit_code(tmp_path, capsys) -> None:
    """Test exit code 2 with a pointer on stderr."""
    bad = dict(MINIMAL, lines=[{"from": "G1", "to": "L2", "susceptance": -1.0}])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad), encoding="utf-8")
    assert main(["oslc", str(path)]) == EXIT_INVALID
    assert "/lines/0/susceptance" in capsys.readouterr().err


def test_malformed_json_exit_code(tmp_path) -> None:
    """Test that a file that is not JSON is a validation failure."""
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    assert main(["oslc", str(path)]) == EXIT_INVALID


def test_oslc_command(capsys) -> None:
    """Test the dispatch of the tutorial scenario."""
    assert main(["oslc", TUTORIAL]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["bus_ids"] == ["G1", "L2", "L3", "L4"]
    assert out["solution"]["price"] == pytest.approx(1.0 / 2.25)


def test_equilibrium_command(capsys) -> None:
    """Test the equilibrium report of the tutorial scenario."""
    assert main(["equilibrium", TUTORIAL]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["report"]["ok"] is True
    assert out["pc"] == pytest.approx([1.0 / 2.25] * 4, abs=1e-6)


def test_check_command_on_scenario(capsys) -> None:
    """Test certificates for every tutorial bus without sweep samples."""
    assert main(["check", TUTORIAL]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert set(out["certificates"]) == {"G1", "L2", "L3", "L4"}
    assert all(c["feasible"] for c in out["certificates"].values())
    assert all(c["sweep"] == [] for c in out["certificates"].values())


def test_check_command_auto_mode(capsys) -> None:
    """Test that auto mode certifies the mixed scenario per bus."""
    assert main(["check", str(bundled_scenario_path("mixed_10bus")), "--mode", "auto"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert all(c["feasible"] for c in out["certificates"].values())
    assert out["certificates"]["G3"]["mode"] == "assumption_b"


def test_check_command_on_device_file(tmp_path, capsys) -> None:
    """Test a bare device binding checked as a one-bus network."""
    path = tmp_path / "turbine.json"
    path.write_text(json.dumps({
        "supply": {"type": "turbine2", "params": {"K": 1.0, "tau_a": 1.0, "tau_b": 1.0, "lambda": 1.0,
                                                  "lambda_pc": 1.0}},
    }), encoding="utf-8")
    assert main(["check", str(path), "--eps1", "0.01", "--eps2", "0.01"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["certificates"]["device"]["feasible"] is True
    assert out["supply_rate"]["eps1"] == pytest.approx(0.01)


def test_check_command_rejects_bad_rate(capsys) -> None:
    """Test that mode b with eps2 > 0 is a configuration error."""
    assert main(["check", TUTORIAL, "--mode", "b", "--eps2", "0.1"]) == EXIT_INVALID


def test_gen_network_to_file(tmp_path) -> None:
    """Test that a generated network is written and loads back."""
    out = tmp_path / "net.json"
    assert main(["gen-network", "--buses", "6", "--seed", "2", "--out", str(out)]) == EXIT_OK
    document = json.loads(out.read_text())
    assert len(document["buses"]) == 6
    assert main(["oslc", str(out)]) == EXIT_OK


def test_gen_network_is_deterministic(capsys) -> None:
    """Test the same output for the same seed."""
    main(["gen-network", "--buses", "8", "--seed", "5"])
    first = capsys.readouterr().out
    main(["gen-network", "--buses", "8", "--seed", "5"])
    assert capsys.readouterr().out == first


def test_simulate_command(minimal_file, tmp_path, capsys) -> None:
    """Test a short simulation and its result bundle."""
    out_dir = tmp_path / "run"
    assert main(["simulate", str(minimal_file), "--out", str(out_dir)]) == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["scenario"] == "minimal"
    assert summary["samples"] > 1
    assert summary["equilibrium_ok"] is True
    assert summary["certified"] is True
    for name in ("timeseries.csv", "reports.json", "plot.gp", "run_metadata.json", "scenario.json"):
        assert (out_dir / name).exists()


def test_passivity_command(minimal_file, capsys) -> None:
    """Test the Monte-Carlo check on one bus."""
    args = ["passivity", str(minimal_file), "--bus", "G1", "--trials", "3", "--horizon", "2", "--seed", "1"]
    assert main(args) == EXIT_OK
    assert "G1" in json.loads(capsys.readouterr().out)
    assert main(["passivity", str(minimal_file), "--bus", "nope"]) == EXIT_INVALID


def test_batch_reports_each_scenario(minimal_file, tmp_path, capsys) -> None:
    """Test that one failing scenario does not stop the others."""
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(MINIMAL, comm_links=[])), encoding="utf-8")
    code = main(["batch", str(minimal_file), str(bad), "--out", str(tmp_path / "batch")])
    summaries = json.loads(capsys.readouterr().out)
    assert code == EXIT_INVALID
    assert summaries[0]["scenario"] == "minimal"
    assert summaries[1]["exit_code"] == EXIT_INVALID
    assert (tmp_path / "batch" / "minimal" / "timeseries.csv").exists()


def test_exit_codes() -> None:
    """Test the mapping from errors to exit codes."""
    assert exit_code_for(NumericalError("x")) == EXIT_NUMERICAL
    assert exit_code_for(ValidationError("x")) == EXIT_INVALID
    assert exit_code_for(ConfigurationError("x")) == EXIT_INVALID
    assert exit_code_for(InfeasibleDispatchError(3.0, -1.0, 1.0)) == EXIT_INVALID


def test_settings_from_environment(monkeypatch) -> None:
    """Test that GRIDFREQ_* variables override the defaults."""
    monkeypatch.setenv("GRIDFREQ_THREADS", "4")
    monkeypatch.setenv("GRIDFREQ_EPSILON", "0.01")
    settings = get_settings()
    assert settings.threads == 4
    assert settings.epsilon == pytest.approx(0.01)
    assert Settings().threads == 1


def test_invalid_environment(monkeypatch) -> None:
    """Test that a bad value is a configuration error."""
    monkeypatch.setenv("GRIDFREQ_THREADS", "0")
    with pytest.raises(ConfigurationError):
        get_settings()


def test_unknown_log_level() -> None:
    """Test the log level check."""
    with pytest.raises(ConfigurationError):
        Settings(log_level="LOUD").configure_logging()

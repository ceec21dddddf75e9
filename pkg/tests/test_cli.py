"""
Unit tests for the command-line interface.

This module contains tests for the following functionalities:
- The run command, its artifacts and its exit statuses.
- The figure command.
- The warden command on saved traces.
- The selftest command.
"""

from pathlib import Path
from typing import List

import pytest
from click.testing import CliRunner, Result

from app.cli import EXIT_CONFIG_ERROR, EXIT_RUNTIME_ERROR, SELFTEST_CHECKS, cli

SCENARIO = """
name = "cli"
seed = 42
steganogram_bits = 4000

[network]
loss = 0.01

[duration]
seconds = 20.0

[controller]
mode = "constant"
rate_bps = 640.0

[warden]
passive_threshold = 0.02
"""


@pytest.fixture
def scenario(tmp_path: Path) -> Path:
    """Provides a 20 s constant-rate scenario file."""
    path = tmp_path / "cli.toml"
    path.write_text(SCENARIO, encoding="utf-8")
    return path


def _invoke(args: List[str]) -> Result:
    return CliRunner().invoke(cli, args)


def test_run_writes_identical_artifacts(tmp_path: Path, scenario: Path) -> None:
    """
    Test that two runs with the same seed write byte-identical tables.

    Args:
        tmp_path (Path): Temporary directory.
        scenario (Path): Scenario file.
    """
    for name in ("a", "b"):
        result = _invoke(
            ["run", "--scenario", str(scenario), "--out", str(tmp_path / name), "--seed", "1"]
            + ["--replications", "3", "--traces"]
        )
        assert result.exit_code == 0, result.output
        assert "3 calls, 1 sweep points" in result.output
    for name in ("calls.csv", "aggregate.csv", "warden.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(list((tmp_path / "a" / "traces").glob("*.csv"))) == 3


def test_run_exit_statuses(tmp_path: Path) -> None:
    """
    Test exit status 1 for configuration errors and 2 for infeasible scenarios.

    Args:
        tmp_path (Path): Temporary directory.
    """
    missing = _invoke(["run", "--scenario", str(tmp_path / "missing.toml")])
    assert missing.exit_code == EXIT_CONFIG_ERROR
    assert "scenario" in missing.output

    bad = tmp_path / "bad.toml"
    bad.write_text("seed = 1\n[controller]\nmode = 'fast'\n", encoding="utf-8")
    bad_run = _invoke(["run", "--scenario", str(bad), "--out", str(tmp_path / "bad")])
    assert bad_run.exit_code == EXIT_CONFIG_ERROR

    infeasible = tmp_path / "infeasible.toml"
    infeasible.write_text(
        SCENARIO.replace('name = "cli"', 'name = "cli"\nmax_lack_delay_ms = 10.0'),
        encoding="utf-8",
    )
    result = _invoke(["run", "--scenario", str(infeasible), "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_RUNTIME_ERROR


def test_figure_command(tmp_path: Path) -> None:
    """
    Test writing a figure dataset and refusing an unknown id.

    Args:
        tmp_path (Path): Temporary directory.
    """
    out = tmp_path / "fig" / "figure_2.csv"
    result = _invoke(["figure", "--figure-id", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert out.read_text(encoding="utf-8").startswith("p_network,")
    assert _invoke(["figure", "--figure-id", "99"]).exit_code == EXIT_CONFIG_ERROR


def test_warden_command(tmp_path: Path, scenario: Path) -> None:
    """
    Test both wardens on traces written by the run command.

    Args:
        tmp_path (Path): Temporary directory.
        scenario (Path): Scenario file.
    """
    out = tmp_path / "run"
    ran = _invoke(["run", "--scenario", str(scenario), "--out", str(out), "--traces"])
    assert ran.exit_code == 0, ran.output
    traces = sorted(str(path) for path in (out / "traces").glob("*.csv"))
    report = tmp_path / "warden.csv"
    result = _invoke(
        ["warden", *traces, "--threshold", "0.02", "--assumed-buffer", "100", "--out", str(report)]
    )
    assert result.exit_code == 0, result.output
    lines = report.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + 2 * len(traces)
    assert ",active_filter," in lines[-1]

    assert _invoke(["warden", *traces]).exit_code == EXIT_CONFIG_ERROR


def test_selftest_passes() -> None:
    """
    Test that every analytic anchor passes.
    """
    result = _invoke(["-v", "selftest"])
    assert result.exit_code == 0, result.output
    passed = [line for line in result.output.splitlines() if line.startswith("PASS")]
    assert len(passed) == len(SELFTEST_CHECKS)
    assert f"all {len(SELFTEST_CHECKS)} checks passed" in result.output


def test_unwritable_output_is_reported(tmp_path: Path, scenario: Path) -> None:
    """
    Test that output paths below a regular file exit with status 1 and a message.

    Args:
        tmp_path (Path): Temporary directory.
        scenario (Path): Scenario file.
    """
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")

    figure = _invoke(["figure", "--figure-id", "2", "--out", str(blocker / "figure_2.csv")])
    assert figure.exit_code == EXIT_CONFIG_ERROR
    assert "error:" in figure.output
    assert isinstance(figure.exception, SystemExit)

    run = _invoke(["run", "--scenario", str(scenario), "--out", str(blocker / "out")])
    assert run.exit_code == EXIT_CONFIG_ERROR
    assert isinstance(run.exception, SystemExit)

    out = tmp_path / "run"
    ran = _invoke(["run", "--scenario", str(scenario), "--out", str(out), "--traces"])
    assert ran.exit_code == 0, ran.output
    traces = [str(path) for path in (out / "traces").glob("*.csv")]
    warden = _invoke(["warden", *traces, "--threshold", "0.02", "--out", str(blocker / "w.csv")])
    assert warden.exit_code == EXIT_CONFIG_ERROR
    assert isinstance(warden.exception, SystemExit)

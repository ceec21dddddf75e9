"""
Unit tests for the experiment runner.

This module contains tests for the following functionalities:
- Writing the call, aggregate and warden tables.
- Reproducibility across reruns and worker counts.
- Shared call seeds across sweep points.
- Population thresholds, duration tests and trace files.
- Persisting a run in the results store.
"""

from pathlib import Path

import pytest
from sqlalchemy import func, select

from app import init_store
from app.experiment import (
    AGGREGATE_COLUMNS,
    CALL_COLUMNS,
    ExperimentConfig,
    point_label,
    run_experiment,
)
from app.models import CallRecord, ExperimentRun, WardenRecord
from utils.exceptions import ConfigError

TINY_SCENARIO = """
name = "tiny"
seed = 5
steganogram_bits = 4000

[network]
loss = 0.01

[duration]
seconds = 30.0

[controller]
mode = "constant"
rate_bps = 640.0

[sweep]
p_network = [0.0, 0.02]

[warden]
baseline_calls = 5
assumed_buffer_ms = 100.0
"""

SAMPLED_SCENARIO = """
name = "sampled"
seed = 8
steganogram_bits = 2000

[duration.model]
k = 1.0

[warden]
passive_threshold = 0.05
"""


@pytest.fixture
def tiny(tmp_path: Path) -> Path:
    """Provides a two-point sweep of 30 s constant-rate calls."""
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_SCENARIO, encoding="utf-8")
    return path


def test_tables_are_written(tmp_path: Path, tiny: Path) -> None:
    """
    Test the rows and files of a small experiment.

    Args:
        tmp_path (Path): Temporary directory.
        tiny (Path): Scenario file.
    """
    out = tmp_path / "out"
    result = run_experiment(ExperimentConfig(scenarios=(tiny,), out_dir=out, replications=4))
    assert len(result.calls) == 8
    assert [row["point"] for row in result.aggregates] == ["p_network=0.0", "p_network=0.02"]
    assert all(row["calls"] == 4 for row in result.aggregates)
    tests = [report.test for report in result.warden_reports]
    assert tests.count("passive_loss") == 8
    assert tests.count("active_filter") == 8
    assert "duration_ks" not in tests

    calls = (out / "calls.csv").read_text(encoding="utf-8").splitlines()
    assert calls[0] == ",".join(CALL_COLUMNS)
    assert len(calls) == 9
    aggregate = (out / "aggregate.csv").read_text(encoding="utf-8").splitlines()
    assert aggregate[0] == ",".join(AGGREGATE_COLUMNS)
    assert (out / "warden.csv").is_file()
    assert not (out / "traces").exists()


def test_lossless_point_matches_expected_loss(tmp_path: Path, tiny: Path) -> None:
    """
    Test the aggregate of the lossless sweep point.

    Args:
        tmp_path (Path): Temporary directory.
        tiny (Path): Scenario file.
    """
    result = run_experiment(ExperimentConfig(scenarios=(tiny,), out_dir=tmp_path, replications=4))
    lossless = result.aggregates[0]
    assert lossless["realized_network_loss"] == 0.0
    assert lossless["observed_loss_fraction"] == lossless["realized_lack_loss"]
    assert lossless["expected_total_loss"] == lossless["realized_lack_loss"]
    assert lossless["packets"] == 4 * 1500


def test_rerun_is_byte_identical(tmp_path: Path, tiny: Path) -> None:
    """
    Test that reruns and different worker counts write identical tables.

    Args:
        tmp_path (Path): Temporary directory.
        tiny (Path): Scenario file.
    """
    first = tmp_path / "first"
    second = tmp_path / "second"
    run_experiment(ExperimentConfig(scenarios=(tiny,), out_dir=first, replications=3))
    run_experiment(
        ExperimentConfig(scenarios=(tiny,), out_dir=second, replications=3, workers=3)
    )
    for name in ("calls.csv", "aggregate.csv", "warden.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_sweep_points_share_call_seeds(tmp_path: Path, tiny: Path) -> None:
    """
    Test that replication r uses the same seed at every sweep point, and --seed overrides.

    Args:
        tmp_path (Path): Temporary directory.
        tiny (Path): Scenario file.
    """
    result = run_experiment(ExperimentConfig(scenarios=(tiny,), out_dir=tmp_path, replications=3))
    by_point = {}
    for row in result.calls:
        by_point.setdefault(row["point"], []).append(row["seed"])
    assert by_point["p_network=0.0"] == by_point["p_network=0.02"]
    assert len(set(by_point["p_network=0.0"])) == 3

    other = run_experiment(
        ExperimentConfig(scenarios=(tiny,), out_dir=tmp_path / "o", replications=3, master_seed=6)
    )
    assert [row["seed"] for row in other.calls] != [row["seed"] for row in result.calls]


def test_duration_test_and_traces(tmp_path: Path) -> None:
    """
    Test the KS duration report of sampled calls and the per-call trace files.

    Args:
        tmp_path (Path): Temporary directory.
    """
    path = tmp_path / "sampled.toml"
    path.write_text(SAMPLED_SCENARIO, encoding="utf-8")
    out = tmp_path / "out"
    result = run_experiment(
        ExperimentConfig(scenarios=(path,), out_dir=out, replications=30, write_traces=True)
    )
    ks = [report for report in result.warden_reports if report.test == "duration_ks"]
    assert len(ks) == 1
    assert ks[0].subject == "sampled|base"
    assert len(list((out / "traces").glob("sampled_base_r*.csv"))) == 30
    assert all(report.threshold == 0.05 for report in result.warden_reports[:30])


def test_result_is_persisted(tmp_path: Path, tiny: Path) -> None:
    """
    Test that a run with a database URL is stored with its calls and reports.

    Args:
        tmp_path (Path): Temporary directory.
        tiny (Path): Scenario file.
    """
    url = f"sqlite:///{tmp_path / 'results.db'}"
    result = run_experiment(
        ExperimentConfig(scenarios=(tiny,), out_dir=tmp_path, replications=2, db_url=url)
    )
    assert result.run_id is not None
    with init_store(url)() as session:
        run = session.get(ExperimentRun, result.run_id)
        assert run is not None
        assert run.master_seed == -1
        assert session.scalar(select(func.count()).select_from(CallRecord)) == 4
        assert session.scalar(select(func.count()).select_from(WardenRecord)) == 8


def test_config_validation(tmp_path: Path, tiny: Path) -> None:
    """
    Test the key paths of invalid experiment settings.

    Args:
        tmp_path (Path): Temporary directory.
        tiny (Path): Scenario file.
    """
    with pytest.raises(ConfigError) as error:
        ExperimentConfig(scenarios=(tmp_path / "missing.toml",), out_dir=tmp_path)
    assert error.value.key_path == "scenario"
    with pytest.raises(ConfigError) as error:
        ExperimentConfig(scenarios=(tiny,), out_dir=tmp_path, replications=0)
    assert error.value.key_path == "replications"
    with pytest.raises(ConfigError) as error:
        ExperimentConfig(scenarios=(tiny,), out_dir=tmp_path, workers=0)
    assert error.value.key_path == "workers"
    with pytest.raises(ConfigError):
        ExperimentConfig(scenarios=(), out_dir=tmp_path)


def test_point_label() -> None:
    """
    Test sweep point labels.
    """
    assert point_label({}) == "base"
    assert point_label({"xi": 0.9, "k": 1.0}) == "k=1.0,xi=0.9"

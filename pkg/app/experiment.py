"""
Experiment runner

Runs every call of one or more scenario files, applies the wardens and writes
the CSV artifacts:

- calls.csv: one summary row per simulated call;
- aggregate.csv: pooled statistics per scenario file and sweep point;
- warden.csv: every warden verdict;
- traces/: per-packet traces, when requested.

Call seeds are derived from a master seed, so a rerun with the same inputs
produces byte-identical files regardless of the number of workers. Every
sweep point of a file reuses the same call seeds.

Usage:
    result = run_experiment(ExperimentConfig(scenarios=(Path("g711.toml"),), out_dir=Path("out")))
"""

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from app import init_store
from app.models import CallRecord, ExperimentRun, WardenRecord
from classes.sim.scenario import Scenario
from classes.sim.simulator import derive_call_seeds, run_call
from classes.sim.trace import SUMMARY_COLUMNS, CallTrace
from classes.warden.warden import (
    MIN_KS_SAMPLE,
    WardenReport,
    active_filter,
    duration_distribution_test,
    flag_rate,
    passive_loss_scan,
    population_threshold,
    write_reports_csv,
)
from config import ScenarioFile, load_scenario_file
from utils.csvio import write_csv
from utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

CALL_COLUMNS: List[str] = ["scenario_file", "point", "replication"] + SUMMARY_COLUMNS

AGGREGATE_COLUMNS: List[str] = [
    "scenario_file",
    "point",
    "calls",
    "mean_duration_s",
    "packets",
    "realized_network_loss",
    "realized_lack_loss",
    "lack_loss_stderr",
    "observed_loss_fraction",
    "expected_total_loss",
    "mean_delivered_bits",
    "completed_fraction",
    "passive_flag_rate",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """
    What to run and where to put the results.

    Attributes:
        scenarios (Tuple[Path, ...]): Scenario files.
        out_dir (Path): Output directory, created if missing.
        master_seed (Optional[int]): Overrides each file's own seed.
        replications (int): Calls per sweep point.
        workers (int): Simulation threads.
        db_url (Optional[str]): SQLAlchemy URL of the results store; None skips it.
        write_traces (bool): Also write one trace CSV per call.
    """

    scenarios: Tuple[Path, ...]
    out_dir: Path
    master_seed: Optional[int] = None
    replications: int = 1
    workers: int = 1
    db_url: Optional[str] = None
    write_traces: bool = False

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ConfigError("at least one scenario file is required", "scenario")
        for path in self.scenarios:
            if not Path(path).is_file():
                raise ConfigError(f"scenario file not found: {path}", "scenario")
        if self.replications < 1:
            raise ConfigError(
                f"replications must be at least 1, got {self.replications}", "replications"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}", "workers")


@dataclass
class ExperimentResult:
    """
    Everything an experiment produced.

    Attributes:
        calls (List[Dict[str, Any]]): calls.csv rows, keyed by CALL_COLUMNS.
        aggregates (List[Dict[str, Any]]): aggregate.csv rows.
        warden_reports (List[WardenReport]): warden.csv rows.
        messages (List[Optional[str]]): Recovered message of each call, aligned with calls.
        run_id (Optional[int]): Store id of the run, if persisted.
    """

    calls: List[Dict[str, Any]] = field(default_factory=list)
    aggregates: List[Dict[str, Any]] = field(default_factory=list)
    warden_reports: List[WardenReport] = field(default_factory=list)
    messages: List[Optional[str]] = field(default_factory=list)
    run_id: Optional[int] = None


def point_label(point: Dict[str, Any]) -> str:
    """Stable label of a sweep point, "base" when there is no sweep."""
    if not point:
        return "base"
    return ",".join(f"{axis}={point[axis]}" for axis in sorted(point))


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.=_-]+", "_", text)


def _run_calls(scenarios: Sequence[Scenario], workers: int) -> Iterator[CallTrace]:
    """Simulate calls, yielding traces in input order."""
    if workers <= 1:
        for scenario in scenarios:
            yield run_call(scenario)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(run_call, scenarios)


def _baseline_threshold(loaded: ScenarioFile, seeds: Sequence[int], workers: int) -> float:
    """Population loss threshold over calls of the base scenario without LACK."""
    base = loaded.scenario
    calls = [
        replace(
            base,
            seed=seed,
            steganogram_bits=0,
            message=None,
            name=f"{base.name}|baseline|r{i:04d}",
        )
        for i, seed in enumerate(seeds)
    ]
    losses = [trace.observed_loss_fraction for trace in _run_calls(calls, workers)]
    threshold = min(population_threshold(losses, loaded.warden.sigmas), 1.0)
    logger.info(
        "%s: passive threshold %.5f from %d baseline calls", base.name, threshold, len(calls)
    )
    return threshold


def _aggregate(
    file_label: str,
    label: str,
    rows: Sequence[Dict[str, Any]],
    flags: Sequence[WardenReport],
) -> Dict[str, Any]:
    packets = sum(row["packets"] for row in rows)
    network_lost = sum(row["network_lost"] for row in rows)
    steg = sum(row["steg_packets"] for row in rows)
    lost = sum(row["network_lost"] + row["late"] for row in rows)
    p_network = network_lost / packets if packets else 0.0
    p_lack = steg / packets if packets else 0.0
    completed = [row["delivered_bits"] >= row["steganogram_bits"] for row in rows]
    return {
        "scenario_file": file_label,
        "point": label,
        "calls": len(rows),
        "mean_duration_s": sum(row["duration_s"] for row in rows) / len(rows),
        "packets": packets,
        "realized_network_loss": p_network,
        "realized_lack_loss": p_lack,
        "lack_loss_stderr": math.sqrt(p_lack * (1.0 - p_lack) / packets) if packets else 0.0,
        "observed_loss_fraction": lost / packets if packets else 0.0,
        "expected_total_loss": p_network + (1.0 - p_network) * p_lack,
        "mean_delivered_bits": sum(row["delivered_bits"] for row in rows) / len(rows),
        "completed_fraction": sum(completed) / len(rows),
        "passive_flag_rate": flag_rate(flags),
    }


def _run_file(config: ExperimentConfig, path: Path, result: ExperimentResult) -> None:
    loaded = load_scenario_file(path)
    master = config.master_seed if config.master_seed is not None else loaded.scenario.seed
    warden = loaded.warden
    baseline_calls = warden.baseline_calls if warden.passive_threshold is None else 0
    seeds = derive_call_seeds(master, config.replications + baseline_calls)
    call_seeds = seeds[: config.replications]
    if warden.passive_threshold is None:
        threshold = _baseline_threshold(loaded, seeds[config.replications :], config.workers)
    else:
        threshold = warden.passive_threshold

    trace_dir = config.out_dir / "traces"
    if config.write_traces:
        trace_dir.mkdir(parents=True, exist_ok=True)

    for point, scenario in loaded.variants():
        label = point_label(point)
        calls = [
            replace(scenario, seed=seed, name=f"{scenario.name}|{label}|r{rep:04d}")
            for rep, seed in enumerate(call_seeds)
        ]
        rows: List[Dict[str, Any]] = []
        passive: List[WardenReport] = []
        active: List[WardenReport] = []
        for rep, trace in enumerate(_run_calls(calls, config.workers)):
            row = {"scenario_file": path.name, "point": label, "replication": rep}
            row.update(trace.summary())
            rows.append(row)
            result.messages.append(trace.recovered_message)
            passive.extend(passive_loss_scan([trace], threshold))
            if warden.assumed_buffer_ms is not None:
                _, report = active_filter(trace, warden.assumed_buffer_ms, scenario.mos)
                active.append(report)
            if config.write_traces:
                trace.to_csv(trace_dir / f"{_slug(path.stem)}_{_slug(label)}_r{rep:04d}.csv")

        result.calls.extend(rows)
        result.aggregates.append(_aggregate(path.name, label, rows, passive))
        result.warden_reports.extend(passive)
        result.warden_reports.extend(active)
        if scenario.duration.sampled and len(rows) >= MIN_KS_SAMPLE:
            result.warden_reports.append(
                duration_distribution_test(
                    [row["duration_s"] for row in rows],
                    scenario.duration.model,
                    warden.ks_alpha,
                    subject=f"{scenario.name}|{label}",
                )
            )
        logger.info(
            "%s [%s]: %d calls, lack loss %.5f, passive flag rate %.3f",
            path.name,
            label,
            len(rows),
            result.aggregates[-1]["realized_lack_loss"],
            result.aggregates[-1]["passive_flag_rate"],
        )


def persist_result(config: ExperimentConfig, result: ExperimentResult) -> int:
    """
    Store a finished experiment in the results database.

    Args:
        config (ExperimentConfig): The experiment's configuration; db_url must be set.
        result (ExperimentResult): What it produced.

    Returns:
        int: The ExperimentRun id.
    """
    session_factory = init_store(config.db_url)
    with session_factory() as session:
        run = ExperimentRun(
            master_seed=config.master_seed if config.master_seed is not None else -1,
            replications=config.replications,
            scenarios=",".join(str(path) for path in config.scenarios),
            out_dir=str(config.out_dir),
        )
        for row, message in zip(result.calls, result.messages):
            record = CallRecord(
                scenario=row["name"],
                point=row["point"],
                replication=row["replication"],
                seed=row["seed"],
                duration_s=row["duration_s"],
                packets=row["packets"],
                played=row["played"],
                late=row["late"],
                network_lost=row["network_lost"],
                steg_packets=row["steg_packets"],
                realized_lack_loss=row["realized_lack_loss"],
                observed_loss_fraction=row["observed_loss_fraction"],
                delivered_bits=row["delivered_bits"],
            )
            record.message = message
            run.calls.append(record)
        for report in result.warden_reports:
            collateral = report.collateral
            run.warden_reports.append(
                WardenRecord(
                    subject=report.subject,
                    test=report.test,
                    statistic=report.statistic,
                    threshold=report.threshold,
                    verdict=report.verdict.value,
                    steg_bits_destroyed=collateral.steg_bits_destroyed if collateral else None,
                    legit_dropped=collateral.legit_dropped if collateral else None,
                    mos_penalty=collateral.mos_penalty if collateral else None,
                )
            )
        session.add(run)
        session.commit()
        return run.id


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Run all scenario files of an experiment and write its artifacts.

    Args:
        config (ExperimentConfig): What to run.

    Returns:
        ExperimentResult: Rows and reports, also written to config.out_dir.

    Raises:
        ConfigError: If a scenario file is invalid.
        InfeasibleScenarioError: If a scenario cannot be simulated.
    """
    config.out_dir.mkdir(parents=True, exist_ok=True)
    result = ExperimentResult()
    for path in sorted((Path(p) for p in config.scenarios), key=str):
        logger.info("running %s with %d replications", path, config.replications)
        _run_file(config, path, result)

    write_csv(
        config.out_dir / "calls.csv",
        CALL_COLUMNS,
        ([row[column] for column in CALL_COLUMNS] for row in result.calls),
    )
    write_csv(
        config.out_dir / "aggregate.csv",
        AGGREGATE_COLUMNS,
        ([row[column] for column in AGGREGATE_COLUMNS] for row in result.aggregates),
    )
    write_reports_csv(result.warden_reports, config.out_dir / "warden.csv")

    if config.db_url:
        result.run_id = persist_result(config, result)
        logger.info("stored run %d in %s", result.run_id, config.db_url)
    return result

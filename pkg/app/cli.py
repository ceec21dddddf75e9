"""
Command-line interface

Commands:
    - run: Simulate the calls of one or more scenario files and write the CSV artifacts.
    - figure: Write the dataset behind one figure id.
    - warden: Apply the passive and active wardens to saved call traces.
    - selftest: Check the analytic anchors and print PASS/FAIL for each.

Exit status is 0 on success, 1 on a configuration error or an unreadable or
unwritable file, and 2 on any other LACK error.
"""

import logging
import math
import sys
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import click
import numpy as np

from app.experiment import ExperimentConfig, run_experiment
from app.figures import SUPPORTED_FIGURES, figure_dataset
from classes.budget.budget import admissible_lack_loss, loss_to_rate
from classes.control.comparison import compare_controllers
from classes.control.controller import ControllerState, run_controller
from classes.duration.weibull import (
    approx_conditional_mean,
    approx_horizon,
    calibrate_scale,
    conditional_mean_remaining,
    conditional_survival,
    quantile_horizon,
    table_one_models,
    weibull_stats,
)
from classes.quality.codec import G711
from classes.quality.mos import MosParams, delta_mos, irq_dynamic, mos_gain
from classes.sim.trace import read_trace_csv
from classes.warden.warden import active_filter, passive_loss_scan, write_reports_csv
from utils.constants import MEAN_CALL_DURATION, TABLE_ONE_CVS, TABLE_ONE_SCALES
from utils.exceptions import ConfigError, LackError

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR: int = 1
EXIT_RUNTIME_ERROR: int = 2

Check = Tuple[str, Callable[[], bool]]


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _fail(error: Union[LackError, OSError]) -> None:
    click.echo(f"error: {error}", err=True)
    if isinstance(error, LackError) and not isinstance(error, ConfigError):
        sys.exit(EXIT_RUNTIME_ERROR)
    sys.exit(EXIT_CONFIG_ERROR)


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
def cli(verbose: int) -> None:
    """LACK steganography analytics, call simulator and wardens."""
    _configure_logging(verbose)


@cli.command()
@click.option(
    "--scenario",
    "scenarios",
    multiple=True,
    required=True,
    type=click.Path(path_type=Path),
    help="Scenario TOML file; repeat for several.",
)
@click.option("--out", "out_dir", default="out", type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Master seed; defaults to each file's seed.")
@click.option("--replications", type=int, default=1, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--db", "db_url", default=None, help="SQLAlchemy URL of a results store.")
@click.option("--traces", is_flag=True, help="Also write one trace CSV per call.")
def run(
    scenarios: Tuple[Path, ...],
    out_dir: Path,
    seed: Optional[int],
    replications: int,
    workers: int,
    db_url: Optional[str],
    traces: bool,
) -> None:
    """Simulate the calls of the given scenario files."""
    try:
        config = ExperimentConfig(
            scenarios=tuple(scenarios),
            out_dir=out_dir,
            master_seed=seed,
            replications=replications,
            workers=workers,
            db_url=db_url,
            write_traces=traces,
        )
        result = run_experiment(config)
    except (LackError, OSError) as error:
        _fail(error)
        return
    click.echo(
        f"{len(result.calls)} calls, {len(result.aggregates)} sweep points, "
        f"{len(result.warden_reports)} warden reports written to {out_dir}"
    )


@cli.command()
@click.option(
    "--figure-id", "figure_id", required=True, help="One of: " + ", ".join(SUPPORTED_FIGURES)
)
@click.option("--out", "out_path", default=None, type=click.Path(path_type=Path))
def figure(figure_id: str, out_path: Optional[Path]) -> None:
    """Write the dataset of a figure as CSV."""
    try:
        dataset = figure_dataset(figure_id)
    except LackError as error:
        _fail(error)
        return
    path = out_path or Path(f"figure_{figure_id}.csv")
    try:
        if path.parent != Path("."):
            path.parent.mkdir(parents=True, exist_ok=True)
        dataset.to_csv(path)
    except OSError as error:
        _fail(error)
        return
    click.echo(f"figure {figure_id}: {len(dataset.rows)} rows written to {path}")


@cli.command()
@click.argument("traces", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--threshold", type=float, default=None, help="Passive loss threshold.")
@click.option("--assumed-buffer", "assumed_buffer_ms", type=float, default=None)
@click.option("--drop", is_flag=True, help="Active warden drops instead of erasing.")
@click.option("--out", "out_path", default="warden.csv", type=click.Path(path_type=Path))
def warden(
    traces: Tuple[Path, ...],
    threshold: Optional[float],
    assumed_buffer_ms: Optional[float],
    drop: bool,
    out_path: Path,
) -> None:
    """Apply the wardens to saved call traces."""
    if threshold is None and assumed_buffer_ms is None:
        _fail(ConfigError("give --threshold, --assumed-buffer or both", "warden"))
        return
    try:
        calls = [read_trace_csv(path) for path in traces]
        reports = []
        if threshold is not None:
            reports.extend(passive_loss_scan(calls, threshold))
        if assumed_buffer_ms is not None:
            reports.extend(active_filter(call, assumed_buffer_ms, drop=drop)[1] for call in calls)
    except (LackError, OSError) as error:
        _fail(error)
        return
    try:
        write_reports_csv(reports, out_path)
    except OSError as error:
        _fail(error)
        return
    flagged = sum(report.flagged for report in reports)
    click.echo(f"{flagged} of {len(reports)} reports flagged, written to {out_path}")


def _close(value: float, expected: float, rel: float = 0.0, abs_tol: float = 0.0) -> bool:
    return math.isclose(value, expected, rel_tol=rel, abs_tol=abs_tol)


def _table_one() -> bool:
    models = table_one_models(MEAN_CALL_DURATION)
    return all(
        _close(model.lam, lam, rel=5e-3) and abs(weibull_stats(model).cv - cv) <= 0.01
        for model, lam, cv in zip(models, TABLE_ONE_SCALES, TABLE_ONE_CVS)
    )


def _memoryless() -> bool:
    model = calibrate_scale(1.0, MEAN_CALL_DURATION)
    return all(
        abs(conditional_mean_remaining(model, t) - (t + model.mean)) / model.mean < 1e-6
        for t in range(0, 601, 30)
    )


def _quantile_round_trip() -> bool:
    return all(
        _close(conditional_survival(model, t, quantile_horizon(model, t, xi)), xi, abs_tol=1e-9)
        for model in table_one_models()
        for xi in (0.8, 0.9, 0.95)
        for t in range(0, 601, 60)
    )


def _exponential_decay() -> bool:
    model = calibrate_scale(1.0, MEAN_CALL_DURATION)
    state = ControllerState(s_total=1000)
    trajectory = run_controller(model, state, 3 * model.mean, 0.1)
    expected = (1000 / model.mean) * np.exp(-trajectory.times / model.mean)
    return bool(((abs(trajectory.ir_raw - expected) / expected) < 0.01).all())


def _crossing() -> bool:
    model = calibrate_scale(1.0, MEAN_CALL_DURATION)
    report = compare_controllers(model, 1000, 0.9, 120.0)
    c = -model.lam * math.log(0.9)
    exact = math.log(model.mean / c) / (1.0 / c - 1.0 / model.mean)
    crossing = report.first_crossing
    return (
        report.second[0] > report.first[0]
        and crossing is not None
        and abs(crossing - exact) <= 0.5
    )


def _conditional_mean_fit() -> bool:
    return _close(approx_conditional_mean(1.0, 1.0), 2.955, rel=0.02)


def _admissible_loss() -> bool:
    return _close(admissible_lack_loss(0.05, 0.02), 0.03 / 0.98, abs_tol=1e-12)


def _mos_gain_consistency() -> bool:
    params = MosParams()
    ir0 = 320.0
    gain = mos_gain(params, 0.01, ir0, ir0, G711)
    return _close(gain, delta_mos(params, 0.01, ir0 / G711.capacity_bps), abs_tol=1e-9)


def _dynamic_cap() -> bool:
    return _close(irq_dynamic(MosParams(), 4.0, 3.5, 0.01, G711), 60.9, abs_tol=0.1)


SELFTEST_CHECKS: List[Check] = [
    ("scale calibration reproduces the five reference shapes", _table_one),
    ("admissible LACK loss at 5% total and 2% network", _admissible_loss),
    ("G.711 at 0.5% LACK loss is 320 b/s", lambda: loss_to_rate(G711, 0.005) == 320.0),
    ("zero-loss MOS", lambda: _close(MosParams().zero_loss_mos, 4.1529, abs_tol=1e-9)),
    ("exponential durations are memoryless", _memoryless),
    ("quantile horizon round trip", _quantile_round_trip),
    ("residual-mean controller decays exponentially for k=1", _exponential_decay),
    ("quantile controller overtakes near 31.1 s", _crossing),
    ("conditional-mean fit at cv=1, t=1 min", _conditional_mean_fit),
    ("horizon fit at cv=1, t=1 min", lambda: _close(approx_horizon(1.0, 1.0), 1.436, rel=0.02)),
    ("MOS gain of the whole rate equals the MOS drop", _mos_gain_consistency),
    ("dynamic cap at MOS 4.0 and 1% network loss", _dynamic_cap),
]


@cli.command()
def selftest() -> None:
    """Check the analytic anchors."""
    failures = 0
    for name, check in SELFTEST_CHECKS:
        try:
            passed = bool(check())
        except LackError as error:
            logger.error("%s raised %s", name, error)
            passed = False
        failures += not passed
        click.echo(f"{'PASS' if passed else 'FAIL'}  {name}")
    if failures:
        click.echo(f"{failures} of {len(SELFTEST_CHECKS)} checks failed", err=True)
        sys.exit(EXIT_RUNTIME_ERROR)
    click.echo(f"all {len(SELFTEST_CHECKS)} checks passed")


def main() -> None:
    cli(prog_name="lack")

"""
Unit tests for the wardens.

This module contains tests for the following functionalities:
- Report verdicts and population thresholds.
- The passive loss scan and its flag rate on simulated calls.
- The Kolmogorov-Smirnov duration test.
- False-positive rates and monotone flag counts over a LACK loss grid.
- The active filter, its collateral damage and drop mode.
- Report export.
"""

from dataclasses import replace
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pytest

from classes.control.controller import ControllerMode
from classes.duration.weibull import WeibullModel, calibrate_scale
from classes.sim.network import NetworkModel
from classes.sim.receiver import Outcome
from classes.sim.scenario import ControllerConfig, DurationSpec, Scenario
from classes.sim.simulator import derive_call_seeds, run_call
from classes.sim.trace import CallTrace
from classes.warden.warden import (
    REPORT_COLUMNS,
    Verdict,
    WardenReport,
    active_filter,
    duration_distribution_test,
    flag_rate,
    passive_loss_scan,
    population_threshold,
    write_reports_csv,
)
from utils.constants import MEAN_CALL_DURATION
from utils.exceptions import InvalidParameterError


def _trace(name: str, outcomes: Sequence[int], total_delay_ms: Sequence[float]) -> CallTrace:
    """Hand-made voice-only trace with the given outcomes and delays."""
    n = len(outcomes)
    columns = {
        "seq": np.arange(n, dtype=np.int64),
        "send_ms": np.arange(n, dtype=np.int64) * 20,
        "carries_steg": np.zeros(n, dtype=bool),
        "steg_bits": np.zeros(n, dtype=np.int64),
        "delivered_bits": np.zeros(n, dtype=np.int64),
        "lack_delay_ms": np.zeros(n),
        "network_delay_ms": np.asarray(total_delay_ms, dtype=float) - 40.0,
        "total_delay_ms": np.asarray(total_delay_ms, dtype=float),
        "allowance_ms": np.full(n, 100.0),
        "outcome": np.asarray(outcomes, dtype=np.int8),
    }
    return CallTrace(name=name, seed=0, duration_s=n / 50.0, steganogram_bits=0, columns=columns)


def _lossy_trace(name: str, lost: int, n: int = 100) -> CallTrace:
    """Trace of n packets whose first `lost` packets were dropped by the network."""
    outcomes = [Outcome.NETWORK_LOST] * lost + [Outcome.PLAYED] * (n - lost)
    return _trace(name, outcomes, [70.0] * n)


def _random_call(name: str, uniforms: np.ndarray, p_network: float, p_lack: float) -> CallTrace:
    """Trace whose packets are network-lost below p_network and late up to p_network + p_lack."""
    outcomes = np.full(uniforms.size, Outcome.PLAYED, dtype=np.int8)
    outcomes[uniforms < p_network + p_lack] = Outcome.LATE
    outcomes[uniforms < p_network] = Outcome.NETWORK_LOST
    return _trace(name, outcomes, np.full(uniforms.size, 70.0))


@pytest.fixture(scope="module")
def lack_call() -> CallTrace:
    """Provides a 200 s lossless call sending at 320 b/s through a 100 ms buffer."""
    return run_call(
        Scenario(
            seed=31,
            name="lack",
            network=NetworkModel.constant(0.0),
            duration=DurationSpec(seconds=200.0),
            controller=ControllerConfig(mode=ControllerMode.CONSTANT, rate_bps=320.0),
            steganogram_bits=10**9,
        )
    )


@pytest.fixture
def exponential() -> WeibullModel:
    """Provides the k=1 model with the reference mean call duration."""
    return calibrate_scale(1.0, MEAN_CALL_DURATION)


def test_report_verdict_must_match() -> None:
    """
    Test that a report is flagged exactly when its statistic exceeds the threshold.
    """
    assert WardenReport.judge("a", "t", 0.5, 0.4).flagged
    assert not WardenReport.judge("a", "t", 0.4, 0.4).flagged
    with pytest.raises(InvalidParameterError):
        WardenReport("a", "t", 0.1, 0.4, Verdict.FLAGGED)


def test_population_threshold() -> None:
    """
    Test mean plus two sample standard deviations, from floats or traces.
    """
    assert population_threshold([0.01, 0.02, 0.03]) == pytest.approx(0.04)
    assert population_threshold([0.01, 0.02, 0.03], sigmas=0.0) == pytest.approx(0.02)
    assert population_threshold([0.02]) == 0.02
    traces = [_lossy_trace("a", 1), _lossy_trace("b", 3)]
    assert population_threshold(traces, sigmas=0.0) == pytest.approx(0.02)
    with pytest.raises(InvalidParameterError):
        population_threshold([])


def test_passive_scan_flags_loss_above_threshold() -> None:
    """
    Test that 5% observed loss is flagged at a 3% threshold and 2% is not.
    """
    reports = passive_loss_scan([_lossy_trace("loud", 5), _lossy_trace("quiet", 2)], 0.03)
    assert [report.subject for report in reports] == ["loud", "quiet"]
    assert [report.flagged for report in reports] == [True, False]
    assert reports[0].statistic == pytest.approx(0.05)
    assert flag_rate(reports) == 0.5
    assert flag_rate([]) == 0.0
    with pytest.raises(InvalidParameterError):
        passive_loss_scan([], 0.03)
    with pytest.raises(InvalidParameterError):
        passive_loss_scan([_lossy_trace("a", 1)], 1.5)


def test_passive_scan_flags_grow_with_lack_loss() -> None:
    """
    Test that, on the same packet draws, more LACK loss never means fewer flagged calls.
    """
    rng = np.random.default_rng(17)
    draws = [rng.random(5000) for _ in range(40)]
    baseline = [_random_call(f"b{i}", u, 0.01, 0.0) for i, u in enumerate(draws)]
    threshold = population_threshold(baseline)
    counts = []
    for p_lack in (0.0, 0.0025, 0.005, 0.01, 0.02, 0.04):
        calls = [_random_call(f"c{i}", u, 0.01, p_lack) for i, u in enumerate(draws)]
        counts.append(sum(report.flagged for report in passive_loss_scan(calls, threshold)))
    assert counts == sorted(counts)
    assert counts[0] < counts[-1] == len(draws)


def test_passive_scan_false_positives_within_budget() -> None:
    """
    Test that a mean + 2 sigma threshold flags few calls without LACK.
    """
    rng = np.random.default_rng(23)
    baseline = [_random_call(f"b{i}", rng.random(10000), 0.01, 0.0) for i in range(200)]
    threshold = population_threshold(baseline)
    clean = [_random_call(f"c{i}", rng.random(10000), 0.01, 0.0) for i in range(400)]
    # one-sided 2 sigma tail is about 0.023, binomial sigma about 0.008
    assert flag_rate(passive_loss_scan(clean, threshold)) <= 0.06


def test_passive_scan_notices_lack_calls() -> None:
    """
    Test that calls with 2% LACK loss are flagged more often than calls without LACK.
    """
    base = Scenario(
        seed=0,
        network=NetworkModel.constant(0.01),
        duration=DurationSpec(seconds=200.0),
        controller=ControllerConfig(mode=ControllerMode.CONSTANT, rate_bps=1280.0),
        steganogram_bits=10**9,
    )
    seeds = derive_call_seeds(99, 60)
    baseline = [run_call(replace(base, seed=s, steganogram_bits=0)) for s in seeds[:30]]
    threshold = population_threshold(baseline)
    clean: List[CallTrace] = [
        run_call(replace(base, seed=s, steganogram_bits=0)) for s in seeds[30:]
    ]
    lack = [run_call(replace(base, seed=s)) for s in seeds[30:]]
    clean_rate = flag_rate(passive_loss_scan(clean, threshold))
    lack_rate = flag_rate(passive_loss_scan(lack, threshold))
    assert lack_rate > clean_rate
    assert lack_rate == 1.0


def test_duration_test_accepts_model_samples(exponential: WeibullModel) -> None:
    """
    Test that durations drawn from the reference model pass the KS test.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    sample = exponential.sample(np.random.default_rng(2023), 1000)
    report = duration_distribution_test(sample, exponential, alpha_level=0.001)
    assert report.verdict is Verdict.CLEAR
    assert report.test == "duration_ks"
    assert report.threshold == pytest.approx(1.9495 / np.sqrt(1000), rel=1e-3)


def test_duration_test_false_positive_rate(exponential: WeibullModel) -> None:
    """
    Test that about alpha of 500 cohorts drawn from the model itself are flagged.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    rng = np.random.default_rng(505)
    reports = [
        duration_distribution_test(exponential.sample(rng, 200), exponential, alpha_level=0.05)
        for _ in range(500)
    ]
    # binomial sigma about 0.01 around 0.05
    assert 0.015 <= flag_rate(reports) <= 0.085


def test_duration_test_flags_stretched_calls(exponential: WeibullModel) -> None:
    """
    Test that calls lasting twice as long as the model expects are flagged.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    sample = 2.0 * exponential.sample(np.random.default_rng(2023), 1000)
    report = duration_distribution_test(sample, exponential, alpha_level=0.001)
    assert report.flagged
    assert report.statistic > 0.15


def test_duration_test_rejects_small_samples(exponential: WeibullModel) -> None:
    """
    Test the sample-size and significance checks of the KS test.

    Args:
        exponential (WeibullModel): The k=1 model.
    """
    with pytest.raises(InvalidParameterError):
        duration_distribution_test([], exponential)
    with pytest.raises(InvalidParameterError):
        duration_distribution_test([100.0] * 29, exponential)
    with pytest.raises(InvalidParameterError):
        duration_distribution_test([100.0] * 30, exponential, alpha_level=1.0)


def test_active_filter_at_true_buffer(lack_call: CallTrace) -> None:
    """
    Test that a warden assuming the real buffer destroys every steg bit and nothing else.

    Args:
        lack_call (CallTrace): Simulated LACK call.
    """
    filtered, report = active_filter(lack_call, 100.0)
    collateral = report.collateral
    assert collateral is not None
    assert report.flagged
    assert collateral.packets_erased == lack_call.steg_packets
    assert collateral.steg_bits_destroyed == lack_call.delivered_bits
    assert collateral.legit_dropped == 0
    assert collateral.mos_penalty == 0.0
    assert filtered.delivered_bits == 0
    assert filtered.observed_loss_fraction == lack_call.observed_loss_fraction
    assert lack_call.delivered_bits > 0


def test_active_filter_below_buffer_hurts_voice(lack_call: CallTrace) -> None:
    """
    Test that assuming a 60 ms buffer also discards playable voice and lowers MOS.

    Args:
        lack_call (CallTrace): Simulated LACK call.
    """
    filtered, report = active_filter(lack_call, 60.0)
    collateral = report.collateral
    assert collateral is not None
    assert collateral.steg_bits_destroyed == lack_call.delivered_bits
    assert collateral.legit_dropped > 0
    assert collateral.extra_loss == pytest.approx(collateral.legit_dropped / len(lack_call))
    assert collateral.mos_penalty > 0.0
    assert filtered.count(Outcome.PLAYED) == lack_call.count(Outcome.PLAYED) - (
        collateral.legit_dropped
    )


def test_active_filter_with_large_buffer(lack_call: CallTrace) -> None:
    """
    Test that a warden assuming a huge buffer leaves the stream alone.

    Args:
        lack_call (CallTrace): Simulated LACK call.
    """
    filtered, report = active_filter(lack_call, 1000.0)
    assert not report.flagged
    assert report.statistic == 0.0
    assert filtered.delivered_bits == lack_call.delivered_bits
    assert np.array_equal(filtered.outcomes, lack_call.outcomes)
    with pytest.raises(InvalidParameterError):
        active_filter(lack_call, -1.0)


def test_active_filter_drop_mode(lack_call: CallTrace) -> None:
    """
    Test that drop mode turns the touched packets into losses and leaves the input intact.

    Args:
        lack_call (CallTrace): Simulated LACK call.
    """
    before = lack_call.outcomes.copy()
    filtered, _ = active_filter(lack_call, 100.0, drop=True)
    assert filtered.count(Outcome.NETWORK_LOST) == lack_call.steg_packets
    assert filtered.count(Outcome.LATE) == 0
    assert np.array_equal(lack_call.outcomes, before)


def test_write_reports_csv(tmp_path: Path, lack_call: CallTrace) -> None:
    """
    Test the report file, with empty collateral cells for passive reports.

    Args:
        tmp_path (Path): Temporary directory.
        lack_call (CallTrace): Simulated LACK call.
    """
    reports = passive_loss_scan([lack_call], 0.5) + [active_filter(lack_call, 100.0)[1]]
    path = tmp_path / "warden.csv"
    write_reports_csv(reports, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert lines[1].startswith("lack,passive_loss,")
    assert lines[1].endswith("clear,,,")
    assert lines[2].split(",")[4] == "flagged"

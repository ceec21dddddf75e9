"""
Wardens against LACK

Three ways an observer can look for LACK:

- passive_loss_scan: flag calls whose observed loss is above a threshold;
- duration_distribution_test: Kolmogorov-Smirnov test of call durations
  against a reference duration model;
- active_filter: erase the payload of every packet that arrives later than an
  assumed jitter-buffer size, and account for the legitimate voice destroyed.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.stats import kstest, kstwobign

from classes.quality.mos import MosParams, mos_from_loss
from classes.sim.receiver import Outcome
from classes.sim.trace import CallTrace
from utils.csvio import write_csv
from utils.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

# below this sample size the asymptotic KS critical value is not trusted
MIN_KS_SAMPLE: int = 30

REPORT_COLUMNS: List[str] = [
    "subject",
    "test",
    "statistic",
    "threshold",
    "verdict",
    "steg_bits_destroyed",
    "legit_dropped",
    "mos_penalty",
]


class Verdict(str, Enum):
    FLAGGED = "flagged"
    CLEAR = "clear"


class DurationReference(Protocol):
    def cdf(self, t): ...


@dataclass(frozen=True)
class Collateral:
    """
    Damage done by an active warden.

    Attributes:
        packets_erased (int): Packets whose payload was erased.
        steg_bits_destroyed (int): Steganogram bits that no longer reach the receiver.
        legit_dropped (int): Voice packets that would have been played.
        extra_loss (float): legit_dropped as a fraction of all packets.
        mos_penalty (float): MOS lost to the extra loss.
    """

    packets_erased: int
    steg_bits_destroyed: int
    legit_dropped: int
    extra_loss: float
    mos_penalty: float


@dataclass(frozen=True)
class WardenReport:
    """
    Outcome of one warden test; flagged exactly when statistic > threshold.

    Attributes:
        subject (str): What was examined, e.g. a call name or "durations".
        test (str): Which warden produced the report.
        statistic (float): Test statistic.
        threshold (float): Decision threshold.
        verdict (Verdict): FLAGGED or CLEAR.
        collateral (Optional[Collateral]): Active warden damage, if any.
    """

    subject: str
    test: str
    statistic: float
    threshold: float
    verdict: Verdict
    collateral: Optional[Collateral] = None

    def __post_init__(self) -> None:
        if (self.statistic > self.threshold) != (self.verdict is Verdict.FLAGGED):
            raise InvalidParameterError("verdict disagrees with statistic and threshold")

    @classmethod
    def judge(
        cls,
        subject: str,
        test: str,
        statistic: float,
        threshold: float,
        collateral: Optional[Collateral] = None,
    ) -> "WardenReport":
        verdict = Verdict.FLAGGED if statistic > threshold else Verdict.CLEAR
        return cls(subject, test, float(statistic), float(threshold), verdict, collateral)

    @property
    def flagged(self) -> bool:
        return self.verdict is Verdict.FLAGGED


def population_threshold(
    baseline: Sequence[Union[CallTrace, float]], sigmas: float = 2.0
) -> float:
    """
    Mean plus `sigmas` sample standard deviations of baseline loss fractions.

    Args:
        baseline (Sequence[CallTrace | float]): Calls without LACK, or their loss fractions.
        sigmas (float): Margin in standard deviations.

    Raises:
        InvalidParameterError: If the baseline is empty.
    """
    if len(baseline) == 0:
        raise InvalidParameterError("population threshold needs at least one baseline call")
    losses = np.array(
        [b.observed_loss_fraction if isinstance(b, CallTrace) else float(b) for b in baseline]
    )
    spread = float(losses.std(ddof=1)) if len(losses) > 1 else 0.0
    return float(losses.mean()) + sigmas * spread


def passive_loss_scan(traces: Sequence[CallTrace], threshold: float) -> List[WardenReport]:
    """
    Flag every call whose observed loss fraction exceeds the threshold.

    Args:
        traces (Sequence[CallTrace]): Calls to examine.
        threshold (float): Absolute loss fraction, e.g. from population_threshold.

    Returns:
        List[WardenReport]: One report per call, in input order.

    Raises:
        InvalidParameterError: If no traces are given or the threshold is not in [0, 1].
    """
    if not traces:
        raise InvalidParameterError("passive scan needs at least one call")
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError(f"loss threshold must lie in [0, 1], got {threshold}")
    reports = [
        WardenReport.judge(trace.name, "passive_loss", trace.observed_loss_fraction, threshold)
        for trace in traces
    ]
    logger.debug(
        "passive scan flagged %d of %d calls at threshold %.4f",
        sum(r.flagged for r in reports),
        len(reports),
        threshold,
    )
    return reports


def flag_rate(reports: Sequence[WardenReport]) -> float:
    return sum(r.flagged for r in reports) / len(reports) if reports else 0.0


def duration_distribution_test(
    durations: Sequence[float],
    reference: DurationReference,
    alpha_level: float = 0.05,
    subject: str = "durations",
) -> WardenReport:
    """
    Two-sided Kolmogorov-Smirnov test of call durations against a reference model.

    Args:
        durations (Sequence[float]): Observed call durations in seconds.
        reference (WeibullModel | EmpiricalDensity): Anything with a cdf.
        alpha_level (float): Significance level.
        subject (str): Label for the report.

    Returns:
        WardenReport: statistic D_n against the asymptotic critical value
        K^-1(1 - alpha) / sqrt(n).

    Raises:
        InvalidParameterError: If fewer than MIN_KS_SAMPLE durations are given or
            alpha_level is outside (0, 1).
    """
    sample = np.asarray(durations, dtype=float)
    if sample.size == 0:
        raise InvalidParameterError("duration test needs at least one duration")
    if sample.size < MIN_KS_SAMPLE:
        raise InvalidParameterError(
            f"duration test needs at least {MIN_KS_SAMPLE} durations, got {sample.size}"
        )
    if not 0.0 < alpha_level < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha_level}")
    result = kstest(sample, reference.cdf)
    critical = float(kstwobign.ppf(1.0 - alpha_level)) / math.sqrt(sample.size)
    return WardenReport.judge(subject, "duration_ks", float(result.statistic), critical)


def active_filter(
    trace: CallTrace,
    assumed_buffer_ms: float,
    params: Optional[MosParams] = None,
    drop: bool = False,
) -> Tuple[CallTrace, WardenReport]:
    """
    Erase (or drop) every arriving packet that is later than the assumed buffer.

    Args:
        trace (CallTrace): Call as seen on the wire.
        assumed_buffer_ms (float): Delay above which the warden treats a packet as useless.
        params (Optional[MosParams]): MOS law for the quality penalty.
        drop (bool): Drop instead of erasing the payload; dropped packets become
            network losses, erased ones stay late arrivals.

    Returns:
        Tuple[CallTrace, WardenReport]: The stream after the warden and a report whose
        statistic is the number of packets touched, against a threshold of 0.
    """
    if assumed_buffer_ms < 0:
        raise InvalidParameterError(f"assumed buffer must be non-negative: {assumed_buffer_ms}")
    params = params or MosParams()
    columns = {name: values.copy() for name, values in trace.columns.items()}
    outcomes = columns["outcome"]
    touched = (columns["total_delay_ms"] > assumed_buffer_ms) & (outcomes != Outcome.NETWORK_LOST)
    legit = touched & (outcomes == Outcome.PLAYED)
    destroyed = int(columns["steg_bits"][touched].sum())

    columns["delivered_bits"][touched] = 0
    outcomes[touched] = Outcome.NETWORK_LOST if drop else Outcome.LATE
    filtered = CallTrace(
        name=trace.name,
        seed=trace.seed,
        duration_s=trace.duration_s,
        steganogram_bits=trace.steganogram_bits,
        columns=columns,
        reports=list(trace.reports),
        epochs=list(trace.epochs),
        recovered_message=trace.recovered_message if destroyed == 0 else None,
    )
    legit_dropped = int(legit.sum())
    penalty = mos_from_loss(params, trace.observed_loss_fraction) - mos_from_loss(
        params, filtered.observed_loss_fraction
    )
    collateral = Collateral(
        packets_erased=int(touched.sum()),
        steg_bits_destroyed=destroyed,
        legit_dropped=legit_dropped,
        extra_loss=legit_dropped / len(trace) if len(trace) else 0.0,
        mos_penalty=penalty,
    )
    if legit_dropped:
        logger.warning(
            "active warden at %.0f ms destroyed %d playable packets of %s (MOS -%.3f)",
            assumed_buffer_ms,
            legit_dropped,
            trace.name,
            penalty,
        )
    report = WardenReport.judge(
        trace.name, "active_filter", collateral.packets_erased, 0.0, collateral
    )
    return filtered, report


def write_reports_csv(reports: Sequence[WardenReport], path: Union[str, Path]) -> None:
    """Write warden reports, one row each, with empty collateral cells for passive tests."""
    rows = []
    for report in reports:
        collateral = report.collateral
        rows.append(
            [
                report.subject,
                report.test,
                float(report.statistic),
                float(report.threshold),
                report.verdict.value,
                collateral.steg_bits_destroyed if collateral else None,
                collateral.legit_dropped if collateral else None,
                float(collateral.mos_penalty) if collateral else None,
            ]
        )
    write_csv(path, REPORT_COLUMNS, rows)

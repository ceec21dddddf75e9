"""
Side-by-side comparison of two insertion-rate controllers.

Both controllers run uncapped on the same time grid; the report lists where
their curves cross and which one inserts faster on every interval between
crossings.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from classes.control.controller import (
    ControllerMode,
    ControllerState,
    DenominatorMode,
    run_controller,
)
from classes.duration.weibull import WeibullModel
from utils.constants import FINE_STEP_S

TIE: str = "tie"


@dataclass(frozen=True)
class DominanceInterval:
    start: float
    end: float
    label: str


@dataclass
class ComparisonReport:
    """
    Result of compare_controllers.

    Attributes:
        times (np.ndarray): Shared time grid in seconds.
        first (np.ndarray): IR(t) of the first controller.
        second (np.ndarray): IR(t) of the second controller.
        first_label (str): Name of the first controller.
        second_label (str): Name of the second controller.
        crossings (List[float]): Times where the curves cross, linearly interpolated.
        intervals (List[DominanceInterval]): Which controller is faster, per interval.
    """

    times: np.ndarray
    first: np.ndarray
    second: np.ndarray
    first_label: str
    second_label: str
    crossings: List[float]
    intervals: List[DominanceInterval]

    @property
    def first_crossing(self) -> Optional[float]:
        return self.crossings[0] if self.crossings else None


def _label(mode: ControllerMode, xi: float) -> str:
    return f"quantile(xi={xi:g})" if mode is ControllerMode.QUANTILE else mode.value


def compare_curves(
    times: np.ndarray,
    first: np.ndarray,
    second: np.ndarray,
    first_label: str,
    second_label: str,
    rel_tol: float = 1e-9,
) -> ComparisonReport:
    """
    Find crossings and dominance intervals of two sampled curves.
    """
    diff = first - second
    scale = np.maximum(np.maximum(np.abs(first), np.abs(second)), np.finfo(float).tiny)
    sign = np.where(np.abs(diff) <= rel_tol * scale, 0, np.sign(diff)).astype(int)

    crossings: List[float] = []
    last_index: Optional[int] = None
    for i, s in enumerate(sign):
        if s == 0:
            continue
        if last_index is not None and sign[last_index] != s:
            t0, t1 = times[last_index], times[i]
            d0, d1 = diff[last_index], diff[i]
            crossings.append(float(t0 + (t1 - t0) * d0 / (d0 - d1)))
        last_index = i

    names = {1: first_label, -1: second_label, 0: TIE}
    intervals: List[DominanceInterval] = []
    start = 0
    for i in range(1, len(sign) + 1):
        if i == len(sign) or sign[i] != sign[start]:
            intervals.append(
                DominanceInterval(float(times[start]), float(times[i - 1]), names[sign[start]])
            )
            start = i
    return ComparisonReport(times, first, second, first_label, second_label, crossings, intervals)


def compare_controllers(
    model: WeibullModel,
    s: int,
    xi: float,
    horizon: float,
    dt: float = FINE_STEP_S,
    first: ControllerMode = ControllerMode.RESIDUAL_MEAN,
    second: ControllerMode = ControllerMode.QUANTILE,
    denominator_mode: DenominatorMode = DenominatorMode.MEAN_RESIDUAL,
) -> ComparisonReport:
    """
    Run two controllers without quality cap and compare their IR(t) curves.

    By default the residual-mean controller is compared with the quantile
    controller at survival probability xi.

    Args:
        model (WeibullModel): Call-duration model shared by both controllers.
        s (int): Steganogram size in bits.
        xi (float): Survival probability used by any quantile controller.
        horizon (float): Length of the comparison in seconds.
        dt (float): Controller step in seconds.
        first (ControllerMode): First controller.
        second (ControllerMode): Second controller.
        denominator_mode (DenominatorMode): Divisor for residual-mean controllers.
    """
    curves = []
    for mode in (first, second):
        state = ControllerState(
            s_total=s,
            mode=mode,
            xi=xi,
            denominator_mode=denominator_mode,
            rate=s / model.mean if mode is ControllerMode.CONSTANT else None,
        )
        curves.append(run_controller(model, state, horizon, dt))
    return compare_curves(
        curves[0].times,
        curves[0].ir_raw,
        curves[1].ir_raw,
        _label(first, xi),
        _label(second, xi),
    )

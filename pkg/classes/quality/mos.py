"""
Voice quality model

MOS as an exponential function of packet loss, MOS = alpha*exp(beta*p) + gamma,
and the quality-derived caps IR_Q on the hidden-data insertion rate: a static
cap derived from a network's MOS histogram and a dynamic cap driven by the
current quality estimate.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from classes.quality.codec import CodecProfile
from utils.constants import MOS_ALPHA, MOS_BETA, MOS_GAMMA, MOS_MAX, MOS_MIN
from utils.exceptions import EtaUnreachableError, InvalidParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MosParams:
    """
    Parameters of MOS = alpha * exp(beta * p) + gamma.

    Defaults are the values fitted for Skype telephony.

    Attributes:
        alpha (float): Amplitude in MOS units, positive.
        beta (float): Loss sensitivity, negative.
        gamma (float): MOS floor reached at total loss.
    """

    alpha: float = MOS_ALPHA
    beta: float = MOS_BETA
    gamma: float = MOS_GAMMA

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha}")
        if not self.beta < 0:
            raise InvalidParameterError(f"beta must be negative, got {self.beta}")

    @property
    def zero_loss_mos(self) -> float:
        return self.alpha + self.gamma


@dataclass(frozen=True)
class LossBudget:
    """
    Extra loss probability LACK may add before quality falls to a target.

    Attributes:
        p_loss (float): Admissible LACK loss, clamped to [0, 1].
        has_budget (bool): False when the target is already violated and p_loss was clamped.
    """

    p_loss: float
    has_budget: bool


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")


def mos_from_loss(params: MosParams, p_total: float) -> float:
    """
    MOS for a total packet loss probability.

    With LACK active, pass p_N + p_L as the total.
    """
    _check_probability("p_total", p_total)
    return params.alpha * math.exp(params.beta * p_total) + params.gamma


def delta_mos(params: MosParams, p_network: float, p_lack: float) -> float:
    """Quality drop caused by LACK: alpha * exp(beta p_N) * (1 - exp(beta p_L))."""
    _check_probability("p_network", p_network)
    _check_probability("p_lack", p_lack)
    return params.alpha * math.exp(params.beta * p_network) * -math.expm1(params.beta * p_lack)


def loss_budget_for_mos(params: MosParams, mos_target: float, p_network: float) -> LossBudget:
    """
    Largest LACK loss keeping MOS at or above a target.

    p_L = ln((MOS* - gamma)/alpha)/beta - p_N, clamped to [0, 1].

    Args:
        params (MosParams): Quality model.
        mos_target (float): Minimum acceptable MOS*.
        p_network (float): Current network loss p_N.

    Returns:
        LossBudget: The budget and whether any budget remains.

    Raises:
        InvalidParameterError: If mos_target <= gamma (outside the logarithm's domain).
    """
    _check_probability("p_network", p_network)
    if mos_target <= params.gamma:
        raise InvalidParameterError(
            f"MOS target {mos_target} is not above the model floor gamma={params.gamma}"
        )
    p_lack = math.log((mos_target - params.gamma) / params.alpha) / params.beta - p_network
    if p_lack < 0.0:
        return LossBudget(p_loss=0.0, has_budget=False)
    return LossBudget(p_loss=min(p_lack, 1.0), has_budget=True)


@dataclass(frozen=True)
class MosHistogram:
    """
    Binned probability distribution of per-call MOS in a network.

    Attributes:
        bins (Tuple[float, ...]): MOS bin points, ascending, within [1, 5].
        probabilities (Tuple[float, ...]): Probability of each bin, summing to one.
    """

    bins: Tuple[float, ...]
    probabilities: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.bins:
            raise InvalidParameterError("MOS histogram is empty")
        if len(self.bins) != len(self.probabilities):
            raise InvalidParameterError("bins and probabilities differ in length")
        if any(b < MOS_MIN or b > MOS_MAX for b in self.bins):
            raise InvalidParameterError("MOS bins must lie within [1, 5]")
        if any(p < 0 for p in self.probabilities):
            raise InvalidParameterError("bin probabilities must be non-negative")
        if not math.isclose(math.fsum(self.probabilities), 1.0, abs_tol=1e-9):
            raise InvalidParameterError("bin probabilities must sum to 1")
        if list(self.bins) != sorted(self.bins):
            raise InvalidParameterError("MOS bins must be ascending")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[float, float]]) -> "MosHistogram":
        ordered = sorted((float(m), float(p)) for m, p in pairs)
        return cls(tuple(m for m, _ in ordered), tuple(p for _, p in ordered))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "MosHistogram":
        """
        Load a two-column (mos_bin, probability) CSV; a header row is optional.
        """
        pairs: List[Tuple[float, float]] = []
        with open(path, newline="", encoding="utf-8") as handle:
            for row in csv.reader(handle):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    pairs.append((float(row[0]), float(row[1])))
                except ValueError:
                    if pairs:
                        raise InvalidParameterError(f"malformed histogram row {row} in {path}")
        return cls.from_pairs(pairs)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["mos_bin", "probability"])
            writer.writerows(zip(self.bins, self.probabilities))

    def tail_probability(self, mos: float) -> float:
        """P(MOS > mos), strict inequality."""
        return math.fsum(p for b, p in zip(self.bins, self.probabilities) if b > mos)

    def select_mos_target(self, eta: float) -> float:
        """
        Strictest bin point MOS* with P(MOS > MOS*) > eta.

        Raises:
            InvalidParameterError: If eta is outside (0, 1).
            EtaUnreachableError: If no bin point satisfies the condition.
        """
        if not 0.0 < eta < 1.0:
            raise InvalidParameterError(f"eta must lie in (0, 1), got {eta}")
        for point in reversed(self.bins):
            if self.tail_probability(point) > eta:
                return point
        raise EtaUnreachableError(f"no MOS bin has tail probability above eta={eta}")


def irq_static(
    histogram: MosHistogram,
    eta: float,
    params: MosParams,
    p_network: float,
    codec: CodecProfile,
) -> float:
    """
    Quality cap on the insertion rate from historical MOS data, in bits/s.

    MOS* is chosen from the histogram, turned into a loss budget and scaled by
    the codec capacity N_p * P_p. The codec's own loss tolerance is not applied
    here.
    """
    target = histogram.select_mos_target(eta)
    budget = loss_budget_for_mos(params, target, p_network)
    if not budget.has_budget:
        logger.warning("MOS target %.3f already violated at p_N=%.4f", target, p_network)
    return budget.p_loss * codec.capacity_bps


def irq_dynamic(
    params: MosParams,
    mos_estimate: float,
    mos_floor: float,
    p_network: float,
    codec: CodecProfile,
) -> float:
    """
    Quality cap on the insertion rate from the current MOS estimate, in bits/s.

    Zero whenever the estimate is below the floor; otherwise
    N_p * P_p * (ln((MOS_E - gamma)/alpha)/beta - p_N), clamped at zero.
    """
    if mos_estimate < mos_floor or mos_estimate <= params.gamma:
        return 0.0
    budget = loss_budget_for_mos(params, mos_estimate, p_network)
    return budget.p_loss * codec.capacity_bps


def mos_gain(
    params: MosParams,
    p_network: float,
    ir_initial: float,
    x: float,
    codec: CodecProfile,
) -> float:
    """
    MOS improvement obtained by lowering the insertion rate from IR(0) by x bits/s.

    Args:
        params (MosParams): Quality model.
        p_network (float): Network loss p_N.
        ir_initial (float): Initial insertion rate IR(0) in bits/s.
        x (float): Rate decrease X(t) = IR(0) - IR(t), 0 <= x <= IR(0).
        codec (CodecProfile): Provides N_p * P_p for the rate-to-loss map.

    Raises:
        InvalidParameterError: If x is negative or exceeds ir_initial.
    """
    if x < 0 or x > ir_initial:
        raise InvalidParameterError(f"rate decrease {x} must lie in [0, {ir_initial}]")
    capacity = codec.capacity_bps
    base = params.alpha * math.exp(params.beta * (p_network + ir_initial / capacity))
    return base * math.expm1(-params.beta * x / capacity)


def mos_curve(
    params: MosParams, p_network: Sequence[float], p_lack: float
) -> np.ndarray:
    """MOS over a grid of network losses at a fixed LACK loss."""
    totals = np.clip(np.asarray(p_network, dtype=float) + p_lack, 0.0, 1.0)
    return params.alpha * np.exp(params.beta * totals) + params.gamma

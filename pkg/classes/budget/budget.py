"""
LACK loss and delay budgets

How much extra packet loss LACK may introduce given the network loss and an
acceptable total, how long a LACK packet must be held so the receiver's
jitter buffer discards it, and the conversion between insertion rate and
LACK loss probability.
"""

from dataclasses import dataclass
from typing import Optional

from classes.quality.codec import CodecProfile
from utils.constants import (
    CODING_DELAY_MS,
    DSP_DELAY_MS,
    ENCAPSULATION_DELAY_MS,
    JITTER_BUFFER_MS,
    TICK_MS,
)
from utils.exceptions import InvalidParameterError


@dataclass(frozen=True)
class DelayBudget:
    """
    Delay components on the path of one RTP packet, all in milliseconds.

    Attributes:
        dsp (float): d_D, DSP delay (typically 2-20 ms).
        coding (float): d_K, voice coding delay (typically under 10 ms).
        encapsulation (float): d_E, encapsulation delay (typically 20-30 ms).
        jitter_buffer (float): t_B, receiver jitter buffer size (typically 60-120 ms).
        network (float): d_N, network delay.
        lack (float): d_L, intentional LACK delay.
    """

    dsp: float = DSP_DELAY_MS
    coding: float = CODING_DELAY_MS
    encapsulation: float = ENCAPSULATION_DELAY_MS
    jitter_buffer: float = JITTER_BUFFER_MS
    network: float = 0.0
    lack: float = 0.0

    def __post_init__(self) -> None:
        for name in ("dsp", "coding", "encapsulation", "jitter_buffer", "network", "lack"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"delay component {name} must be non-negative")

    @property
    def processing_delay(self) -> float:
        return self.dsp + self.coding + self.encapsulation

    @property
    def transmitter_delay(self) -> float:
        """d_T = d_D + d_K + d_E + d_L."""
        return self.processing_delay + self.lack


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InvalidParameterError(f"{name} must lie in [0, 1], got {value}")


def total_loss(p_network: float, p_lack: float) -> float:
    """Total loss with independent network and LACK losses: 1 - (1-p_N)(1-p_L)."""
    _check_probability("p_network", p_network)
    _check_probability("p_lack", p_lack)
    return 1.0 - (1.0 - p_network) * (1.0 - p_lack)


def admissible_lack_loss(p_total: float, p_network: float) -> float:
    """
    Largest LACK loss keeping total loss within p_T: (p_T - p_N)/(1 - p_N), floored at 0.

    Raises:
        InvalidParameterError: If a probability is out of range or p_N = 1.
    """
    _check_probability("p_total", p_total)
    _check_probability("p_network", p_network)
    if p_network == 1.0:
        raise InvalidParameterError("network loss of 1 leaves no packets to use")
    return max(0.0, (p_total - p_network) / (1.0 - p_network))


def min_lack_delay(budget: DelayBudget, adaptive: bool, granularity: float = TICK_MS) -> float:
    """
    Smallest intentional delay that makes the receiver discard a packet, in ms.

    Fixed buffer (network delay ignored): t_B - d_D - d_K - d_E.
    Adaptive buffer: t_B - d_N - d_D - d_K - d_E plus one granularity step, because
    d_T + d_N must strictly exceed t_B. Both are floored at zero; in the adaptive
    case a negative shortfall already satisfies the strict inequality.
    """
    if not adaptive:
        return max(0.0, budget.jitter_buffer - budget.processing_delay)
    shortfall = budget.jitter_buffer - budget.network - budget.processing_delay
    if shortfall < 0:
        return 0.0
    return shortfall + granularity


def rate_to_loss(codec: CodecProfile, ir: float) -> float:
    """
    LACK loss probability p_L = IR / (N_p * P_p).

    Raises:
        InvalidParameterError: If ir is negative or above the codec capacity.
    """
    if ir < 0:
        raise InvalidParameterError(f"insertion rate must be non-negative, got {ir}")
    if ir > codec.capacity_bps:
        raise InvalidParameterError(
            f"insertion rate {ir} b/s exceeds the {codec.name} capacity of {codec.capacity_bps} b/s"
        )
    return ir / codec.capacity_bps


def loss_to_rate(codec: CodecProfile, p_lack: float) -> float:
    """Insertion rate IR = p_L * N_p * P_p in bits/s."""
    _check_probability("p_lack", p_lack)
    return p_lack * codec.capacity_bps


def rate_loss_conversion(
    codec: CodecProfile, ir: Optional[float] = None, p_lack: Optional[float] = None
) -> float:
    """
    Convert an insertion rate to LACK loss or back; exactly one argument is given.
    """
    if (ir is None) == (p_lack is None):
        raise InvalidParameterError("give exactly one of ir or p_lack")
    if ir is not None:
        return rate_to_loss(codec, ir)
    return loss_to_rate(codec, p_lack)  # type: ignore[arg-type]


def effective_loss_cap(codec: CodecProfile, p_network: float, p_total_quality: float) -> float:
    """
    LACK loss allowed by both the codec tolerance and a quality-derived total.

    min(admissible(codec tolerance, p_N), admissible(p_T_quality, p_N)).
    """
    return min(
        admissible_lack_loss(codec.max_loss_tolerance, p_network),
        admissible_lack_loss(p_total_quality, p_network),
    )

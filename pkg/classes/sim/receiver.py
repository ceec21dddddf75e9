"""
Receiving side of a simulated call

Classifies arriving RTP packets against the jitter buffer, keeps the adaptive
buffer's allowance up to date and produces RTCP receiver reports from windows
of classified packets.
"""

import logging
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from classes.quality.mos import MosParams, mos_from_loss
from classes.sim.scenario import JitterBufferConfig
from utils.constants import RTCP_JITTER_GAIN

logger = logging.getLogger(__name__)


class Outcome(IntEnum):
    PLAYED = 0
    LATE = 1
    NETWORK_LOST = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Outcome":
        return cls[label.upper()]


def classify_arrival(
    total_delay_ms: float, allowance_ms: float, network_lost: bool = False
) -> Outcome:
    """
    Fate of one packet at the receiver.

    Args:
        total_delay_ms (float): d_T + d_N, processing plus LACK plus network delay.
        allowance_ms (float): Delay the jitter buffer still accepts.
        network_lost (bool): Whether the network dropped the packet.

    Returns:
        Outcome: NETWORK_LOST for dropped packets, otherwise PLAYED when the delay
        fits the allowance and LATE when it does not.
    """
    if network_lost:
        return Outcome.NETWORK_LOST
    return Outcome.PLAYED if total_delay_ms <= allowance_ms else Outcome.LATE


def classify_arrivals(
    total_delay_ms: np.ndarray, allowance_ms: np.ndarray, network_lost: np.ndarray
) -> np.ndarray:
    """Vectorized classify_arrival; returns Outcome codes as int8."""
    late = np.asarray(total_delay_ms) > np.asarray(allowance_ms)
    codes = np.where(late, Outcome.LATE, Outcome.PLAYED)
    return np.where(network_lost, Outcome.NETWORK_LOST, codes).astype(np.int8)


class JitterBuffer:
    """
    Playout buffer of the receiver.

    A fixed buffer always accepts config.size_ms. An adaptive buffer tracks the
    largest delay among the last config.window voice packets and accepts that
    plus config.headroom_ms; LACK packets are left out of the estimate.

    Attributes:
        config (JitterBufferConfig): Buffer settings.
        allowance_ms (float): Delay currently accepted.
        recent (np.ndarray): Delays of the most recent voice packets.
    """

    def __init__(self, config: JitterBufferConfig) -> None:
        self.config: JitterBufferConfig = config
        self.allowance_ms: float = config.size_ms
        self.recent: np.ndarray = np.empty(0)

    def observe(self, voice_delays_ms: np.ndarray) -> None:
        if not self.config.adaptive or len(voice_delays_ms) == 0:
            return
        self.recent = np.concatenate([self.recent, voice_delays_ms])[-self.config.window :]
        self.allowance_ms = float(self.recent.max()) + self.config.headroom_ms
        logger.debug("adaptive jitter buffer now accepts %.1f ms", self.allowance_ms)


@dataclass(frozen=True)
class RtcpWindow:
    """
    Packets covered by one receiver report.

    Attributes:
        time_s (float): Report instant.
        outcomes (np.ndarray): Outcome codes in sequence order.
        transit_ms (np.ndarray): One-way delay of each packet; ignored for lost ones.
    """

    time_s: float
    outcomes: np.ndarray
    transit_ms: np.ndarray


@dataclass(frozen=True)
class RtcpReport:
    """
    RTCP receiver report as seen by the LACK transmitter.

    Attributes:
        time_s (float): Report instant.
        packets (int): Packets expected in the window.
        network_lost (int): Packets the network dropped.
        late (int): Packets that arrived after their playout deadline.
        loss_fraction (float): (network_lost + late) / packets, the loss the listener hears.
        network_loss_fraction (float): network_lost / packets.
        late_fraction (float): late / packets.
        cumulative_lost (int): Lost plus late packets since the call started.
        mean_delay_ms (float): Mean transit of arriving packets.
        jitter_ms (float): Interarrival jitter, J += (|D| - J) / 16.
        last_transit_ms (Optional[float]): Transit of the last arriving packet.
        mos (float): MOS of the window's loss fraction.
    """

    time_s: float
    packets: int
    network_lost: int
    late: int
    loss_fraction: float
    network_loss_fraction: float
    late_fraction: float
    cumulative_lost: int
    mean_delay_ms: float
    jitter_ms: float
    last_transit_ms: Optional[float]
    mos: float


def _interarrival_jitter(
    transit_ms: np.ndarray, previous_jitter: float, previous_transit: Optional[float]
) -> float:
    if previous_transit is not None:
        transit_ms = np.concatenate([[previous_transit], transit_ms])
    differences = np.abs(np.diff(transit_ms))
    if len(differences) == 0:
        return previous_jitter
    gain = RTCP_JITTER_GAIN
    initial = [(1.0 - gain) * previous_jitter]
    filtered, _ = lfilter([gain], [1.0, gain - 1.0], differences, zi=initial)
    return float(filtered[-1])


def rtcp_feedback(
    window: RtcpWindow, params: MosParams, previous: Optional[RtcpReport] = None
) -> RtcpReport:
    """
    Receiver report for one window of classified packets.

    Args:
        window (RtcpWindow): Packets sent since the previous report.
        params (MosParams): MOS law used for the report's quality estimate.
        previous (Optional[RtcpReport]): Last report, for cumulative counters and jitter.

    Returns:
        RtcpReport: Window statistics. An empty window repeats the previous
        report's values at the new instant.
    """
    packets = len(window.outcomes)
    if packets == 0:
        if previous is not None:
            return replace(previous, time_s=window.time_s)
        return RtcpReport(
            window.time_s, 0, 0, 0, 0.0, 0.0, 0.0, 0, 0.0, 0.0, None, params.zero_loss_mos
        )

    outcomes = np.asarray(window.outcomes)
    network_lost = int(np.count_nonzero(outcomes == Outcome.NETWORK_LOST))
    late = int(np.count_nonzero(outcomes == Outcome.LATE))
    arrived = np.asarray(window.transit_ms, dtype=float)[outcomes != Outcome.NETWORK_LOST]

    prior_jitter = previous.jitter_ms if previous else 0.0
    prior_transit = previous.last_transit_ms if previous else None
    if len(arrived):
        mean_delay = float(arrived.mean())
        last_transit: Optional[float] = float(arrived[-1])
    else:
        mean_delay = previous.mean_delay_ms if previous else 0.0
        last_transit = prior_transit
    loss_fraction = (network_lost + late) / packets
    report = RtcpReport(
        time_s=window.time_s,
        packets=packets,
        network_lost=network_lost,
        late=late,
        loss_fraction=loss_fraction,
        network_loss_fraction=network_lost / packets,
        late_fraction=late / packets,
        cumulative_lost=(previous.cumulative_lost if previous else 0) + network_lost + late,
        mean_delay_ms=mean_delay,
        jitter_ms=_interarrival_jitter(arrived, prior_jitter, prior_transit),
        last_transit_ms=last_transit,
        mos=mos_from_loss(params, loss_fraction),
    )
    logger.debug(
        "RTCP at %.1f s: loss %.4f (network %.4f), jitter %.2f ms",
        report.time_s,
        report.loss_fraction,
        report.network_loss_fraction,
        report.jitter_ms,
    )
    return report

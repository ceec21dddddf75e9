"""
Call scenario description

Everything one simulated call depends on: codec, network, jitter buffer,
processing delays, call duration, controller, quality cap and the hidden
message. Scenarios are immutable; sweeps derive variants with
dataclasses.replace.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from classes.budget.budget import DelayBudget
from classes.control.controller import ControllerMode, DenominatorMode
from classes.duration.weibull import WeibullModel, calibrate_scale
from classes.quality.codec import G711, CodecProfile
from classes.quality.mos import MosHistogram, MosParams
from classes.sim.network import NetworkModel
from utils.constants import (
    ADAPTIVE_HEADROOM_MS,
    ADAPTIVE_WINDOW,
    JITTER_BUFFER_MS,
    MAX_LACK_DELAY_MS,
    MEAN_CALL_DURATION,
    RTCP_INTERVAL_S,
)
from utils.exceptions import InvalidParameterError


class BufferMode(str, Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class JitterBufferConfig:
    """
    Receiver playout buffer.

    Attributes:
        mode (BufferMode): Fixed allowance or sliding-window adaptive allowance.
        size_ms (float): Fixed allowance t_B, also the adaptive buffer's starting value.
        window (int): Number of recent voice packets the adaptive estimator looks at.
        headroom_ms (float): Margin the adaptive buffer adds over the worst recent delay.
    """

    mode: BufferMode = BufferMode.FIXED
    size_ms: float = JITTER_BUFFER_MS
    window: int = ADAPTIVE_WINDOW
    headroom_ms: float = ADAPTIVE_HEADROOM_MS

    def __post_init__(self) -> None:
        if not self.size_ms > 0:
            raise InvalidParameterError(f"jitter buffer must be positive, got {self.size_ms}")
        if self.window < 1 or self.headroom_ms < 0:
            raise InvalidParameterError("adaptive window must be >= 1 and headroom >= 0")

    @property
    def adaptive(self) -> bool:
        return self.mode is BufferMode.ADAPTIVE


@dataclass(frozen=True)
class DurationSpec:
    """
    How long the simulated call lasts.

    Attributes:
        seconds (Optional[float]): Fixed duration; None means sampled from the model.
        model (WeibullModel): Duration distribution, also the transmitter's belief.
    """

    seconds: Optional[float] = None
    model: WeibullModel = field(default_factory=lambda: calibrate_scale(1.0, MEAN_CALL_DURATION))

    def __post_init__(self) -> None:
        if self.seconds is not None and not self.seconds > 0:
            raise InvalidParameterError(f"call duration must be positive, got {self.seconds}")

    @property
    def sampled(self) -> bool:
        return self.seconds is None

    @property
    def planned(self) -> float:
        """Duration a constant-rate transmitter plans for."""
        return self.seconds if self.seconds is not None else self.model.mean

    def draw(self, rng: np.random.Generator) -> float:
        if self.seconds is not None:
            return float(self.seconds)
        return float(self.model.sample(rng, 1)[0])


@dataclass(frozen=True)
class ControllerConfig:
    """
    Attributes:
        mode (ControllerMode): Constant, residual-mean or quantile rate.
        xi (float): Survival probability of the quantile controller.
        denominator (DenominatorMode): Divisor of the residual-mean controller.
        rate_bps (Optional[float]): Fixed rate of the constant controller; None plans S/T.
        update_interval (Optional[float]): Seconds between rate updates; None follows RTCP.
    """

    mode: ControllerMode = ControllerMode.RESIDUAL_MEAN
    xi: float = 0.9
    denominator: DenominatorMode = DenominatorMode.MEAN_RESIDUAL
    rate_bps: Optional[float] = None
    update_interval: Optional[float] = None

    def __post_init__(self) -> None:
        if self.mode is ControllerMode.QUANTILE and not 0.0 < self.xi < 1.0:
            raise InvalidParameterError(f"xi must lie strictly inside (0, 1), got {self.xi}")
        if self.rate_bps is not None and self.rate_bps < 0:
            raise InvalidParameterError(f"rate must be non-negative, got {self.rate_bps}")
        if self.update_interval is not None and not self.update_interval > 0:
            raise InvalidParameterError("update interval must be positive")


class CapPolicy(str, Enum):
    NONE = "none"
    CODEC = "codec"
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class CapConfig:
    """
    Quality cap IR_Q applied to the controller.

    Attributes:
        policy (CapPolicy): Which cap, if any.
        total_loss (float): Quality-derived total loss for the codec policy.
        mos_floor (float): Lowest acceptable MOS for the dynamic policy.
        eta (float): Required P(MOS > MOS*) for the static policy.
        histogram (Optional[MosHistogram]): Historical MOS data for the static policy.
    """

    policy: CapPolicy = CapPolicy.NONE
    total_loss: float = 0.05
    mos_floor: float = 3.5
    eta: float = 0.8
    histogram: Optional[MosHistogram] = None

    def __post_init__(self) -> None:
        if self.policy is CapPolicy.STATIC and self.histogram is None:
            raise InvalidParameterError("static cap needs a MOS histogram")
        if not 0.0 <= self.total_loss <= 1.0:
            raise InvalidParameterError(f"total loss must lie in [0, 1], got {self.total_loss}")
        if not 0.0 < self.eta < 1.0:
            raise InvalidParameterError(f"eta must lie in (0, 1), got {self.eta}")


@dataclass(frozen=True, kw_only=True)
class Scenario:
    """
    One simulated call.

    Attributes:
        seed (int): Seed of the call's random generator; mandatory.
        name (str): Label carried into traces and summaries.
        codec (CodecProfile): Voice codec framing.
        network (NetworkModel): Loss and delay of the path.
        jitter_buffer (JitterBufferConfig): Receiver playout buffer.
        processing (DelayBudget): DSP, coding and encapsulation delays; its own
            jitter_buffer and network fields are ignored.
        duration (DurationSpec): Call length.
        controller (ControllerConfig): Insertion-rate controller.
        cap (CapConfig): Quality cap.
        mos (MosParams): MOS-vs-loss law.
        steganogram_bits (int): S when no message is given.
        message (Optional[str]): Text sealed into the steganogram; overrides steganogram_bits.
        receiver_aware (bool): Whether the receiver extracts LACK payloads.
        rtcp_interval (float): Seconds between RTCP receiver reports.
        max_lack_delay_ms (float): Longest intentional delay the transmitter will apply.
    """

    seed: int
    name: str = "scenario"
    codec: CodecProfile = G711
    network: NetworkModel = field(default_factory=NetworkModel)
    jitter_buffer: JitterBufferConfig = field(default_factory=JitterBufferConfig)
    processing: DelayBudget = field(default_factory=DelayBudget)
    duration: DurationSpec = field(default_factory=DurationSpec)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    cap: CapConfig = field(default_factory=CapConfig)
    mos: MosParams = field(default_factory=MosParams)
    steganogram_bits: int = 0
    message: Optional[str] = None
    receiver_aware: bool = True
    rtcp_interval: float = RTCP_INTERVAL_S
    max_lack_delay_ms: float = MAX_LACK_DELAY_MS

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise InvalidParameterError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.steganogram_bits < 0:
            raise InvalidParameterError("steganogram size must be non-negative")
        if not (self.rtcp_interval > 0 and math.isfinite(self.rtcp_interval)):
            raise InvalidParameterError(f"rtcp interval must be positive, got {self.rtcp_interval}")
        if self.message is not None and int(self.codec.payload_bits) % 8:
            raise InvalidParameterError("sealed messages need a byte-aligned voice payload")

    @property
    def update_interval(self) -> float:
        return self.controller.update_interval or self.rtcp_interval

"""
Network impairment model

Piecewise-constant packet loss p_N(t) and a one-way delay of a constant base
plus bounded jitter (uniform or truncated normal). Delays are rounded to whole
milliseconds, the simulator's tick.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from scipy.stats import truncnorm

from utils.constants import NETWORK_DELAY_MS, NETWORK_JITTER_MS
from utils.exceptions import InvalidParameterError

# truncated-normal jitter is cut at +/- 2 standard deviations
_TRUNCATION_SIGMAS: float = 2.0


class JitterModel(str, Enum):
    UNIFORM = "uniform"
    TRUNCNORM = "truncnorm"


@dataclass(frozen=True)
class NetworkModel:
    """
    Loss and delay of the path between the LACK endpoints.

    Attributes:
        loss_schedule (Tuple[Tuple[float, float], ...]): (start second, p_N) segments,
            the first starting at 0.
        delay_ms (float): Base one-way delay.
        jitter_ms (float): Half-width of the delay variation.
        jitter_model (JitterModel): Shape of the delay variation.
    """

    loss_schedule: Tuple[Tuple[float, float], ...] = ((0.0, 0.0),)
    delay_ms: float = NETWORK_DELAY_MS
    jitter_ms: float = NETWORK_JITTER_MS
    jitter_model: JitterModel = JitterModel.UNIFORM

    def __post_init__(self) -> None:
        if not self.loss_schedule or self.loss_schedule[0][0] != 0.0:
            raise InvalidParameterError("loss schedule must start at t = 0")
        starts = [start for start, _ in self.loss_schedule]
        if starts != sorted(starts):
            raise InvalidParameterError("loss schedule must be ordered by start time")
        if any(not 0.0 <= p < 1.0 for _, p in self.loss_schedule):
            raise InvalidParameterError("network loss must lie in [0, 1)")
        if self.jitter_ms < 0 or self.delay_ms - self.jitter_ms < 0:
            raise InvalidParameterError("delay minus jitter must be non-negative")

    @classmethod
    def constant(cls, p_network: float, **kwargs) -> "NetworkModel":
        return cls(loss_schedule=((0.0, p_network),), **kwargs)

    @property
    def nominal_loss(self) -> float:
        """Loss at call set-up, the transmitter's prior before any RTCP report."""
        return self.loss_schedule[0][1]

    @property
    def min_delay_ms(self) -> float:
        return self.delay_ms - self.jitter_ms

    @property
    def max_delay_ms(self) -> float:
        return self.delay_ms + self.jitter_ms

    def loss_at(self, times_s: np.ndarray) -> np.ndarray:
        starts = np.array([start for start, _ in self.loss_schedule])
        losses = np.array([p for _, p in self.loss_schedule])
        return losses[np.searchsorted(starts, np.asarray(times_s, dtype=float), side="right") - 1]

    def sample_delays(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Integer one-way delays in milliseconds, within [min_delay_ms, max_delay_ms]."""
        if self.jitter_ms == 0:
            jitter = np.zeros(size)
        elif self.jitter_model is JitterModel.UNIFORM:
            jitter = rng.uniform(-self.jitter_ms, self.jitter_ms, size)
        else:
            scale = self.jitter_ms / _TRUNCATION_SIGMAS
            jitter = truncnorm.rvs(
                -_TRUNCATION_SIGMAS, _TRUNCATION_SIGMAS, scale=scale, size=size, random_state=rng
            )
        delays = np.rint(self.delay_ms + jitter)
        return np.clip(delays, np.ceil(self.min_delay_ms), np.floor(self.max_delay_ms))

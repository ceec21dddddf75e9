"""
Hidden-data insertion-rate controllers

Three ways of choosing the insertion rate IR(t) of a LACK transmitter:

- constant: IR = S/T for a planned duration T, or a fixed IR;
- residual mean: IR(t) = S_R(t) / (expected remaining duration);
- quantile: IR(t) = S_R(t) / (T_xi(t) - t), where the call reaches T_xi(t)
  with probability xi.

Every controller is capped by the quality-derived IR_Q. Bits that the cap
prevented from being sent ("arrears") are repaid after the cap releases at
rate arrears(t') / E(D|D>t'), never exceeding IR_Q.

A step covers [t, t + dt] and sends at IR = S_R(t) / denominator(t), at most
S_R(t) / dt.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from classes.duration.weibull import (
    WeibullModel,
    conditional_mean_remaining,
    quantile_horizon,
)
from classes.quality.codec import CodecProfile
from classes.quality.mos import MosParams, mos_gain
from utils.exceptions import InvalidParameterError, SaturationError

logger = logging.getLogger(__name__)


class ControllerMode(str, Enum):
    CONSTANT = "constant"
    RESIDUAL_MEAN = "residual_mean"
    QUANTILE = "quantile"


class DenominatorMode(str, Enum):
    """
    What the residual-mean controller divides S_R(t) by.

    FULL_CONDITIONAL uses E(D|D>t) itself; MEAN_RESIDUAL uses E(D|D>t) - t.
    The two agree at t = 0.
    """

    FULL_CONDITIONAL = "full_conditional"
    MEAN_RESIDUAL = "mean_residual"


@dataclass
class ControllerState:
    """
    Mutable state of one call's insertion-rate controller.

    Attributes:
        s_total (int): Steganogram size S in bits.
        mode (ControllerMode): Which controller drives the rate.
        xi (Optional[float]): Survival probability for the quantile controller.
        denominator_mode (DenominatorMode): Divisor of the residual-mean controller.
        rate (Optional[float]): Fixed rate of the constant controller in bits/s.
        delivered (int): Whole bits already sent.
        carry (float): Fraction of a bit sent but not yet counted, in [0, 1).
        arrears (float): Bits held back by the quality cap and not yet repaid.
        arrears_anchor (Optional[Tuple[float, float]]): (t', arrears at t') once the cap released.
        elapsed (float): Call time covered by the steps so far, in seconds.
    """

    s_total: int
    mode: ControllerMode = ControllerMode.RESIDUAL_MEAN
    xi: Optional[float] = None
    denominator_mode: DenominatorMode = DenominatorMode.MEAN_RESIDUAL
    rate: Optional[float] = None
    delivered: int = 0
    carry: float = 0.0
    arrears: float = 0.0
    arrears_anchor: Optional[Tuple[float, float]] = None
    elapsed: float = 0.0

    def __post_init__(self) -> None:
        if self.s_total < 0:
            raise InvalidParameterError(f"steganogram size must be non-negative: {self.s_total}")
        if self.mode is ControllerMode.QUANTILE:
            _check_xi(self.xi)
        if self.mode is ControllerMode.CONSTANT and (self.rate is None or self.rate < 0):
            raise InvalidParameterError("constant controller needs a non-negative rate")

    @property
    def s_remaining(self) -> int:
        """Whole bits still to send; delivered + s_remaining == s_total."""
        return self.s_total - self.delivered

    @property
    def remaining_real(self) -> float:
        """S_R(t) including the fractional carry."""
        return max(self.s_remaining - self.carry, 0.0)

    @property
    def exhausted(self) -> bool:
        return self.s_remaining <= 0


@dataclass(frozen=True)
class RateDecision:
    """
    Rate chosen for one controller step.

    Attributes:
        ir_raw (float): Uncapped rate, base plus arrears repayment, in bits/s.
        ir_capped (float): min(ir_raw, irq).
        cap_active (bool): Whether the quality cap bound the rate.
        irq (float): Quality cap IR_Q in bits/s (inf when uncapped).
        base_rate (float): Controller rate before arrears repayment.
        arrears_rate (float): Repayment added on top of the base rate.
        anchor (Optional[Tuple[float, float]]): Repayment anchor (t', arrears) in force.
    """

    ir_raw: float
    ir_capped: float
    cap_active: bool
    irq: float
    base_rate: float = 0.0
    arrears_rate: float = 0.0
    anchor: Optional[Tuple[float, float]] = None


def _check_xi(xi: Optional[float]) -> None:
    if xi is None or not 0.0 < xi < 1.0:
        raise InvalidParameterError(
            f"xi must lie strictly inside (0, 1) for the quantile controller, got {xi}"
        )


def constant_rate(s: float, horizon: float) -> float:
    """IR = S/T for a call planned to last horizon seconds."""
    if not horizon > 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    return s / horizon


def required_duration(s: float, ir: float) -> float:
    """T = S/IR: how long a call must last to send S bits at a fixed rate."""
    if not ir > 0:
        raise InvalidParameterError(f"insertion rate must be positive, got {ir}")
    return s / ir


def arrears_rate(arrears: float, model: WeibullModel, t_prime: float) -> float:
    """Repayment rate arrears / E(D|D>t') added after the cap releases at t'."""
    if arrears < 0:
        raise InvalidParameterError(f"arrears must be non-negative, got {arrears}")
    if arrears == 0:
        return 0.0
    return arrears / conditional_mean_remaining(model, t_prime)


def rate_denominator(state: ControllerState, model: WeibullModel, t: float) -> float:
    """Divisor of S_R(t): T_xi(t) - t, E(D|D>t) - t or E(D|D>t), by controller mode."""
    if state.mode is ControllerMode.QUANTILE:
        return quantile_horizon(model, t, state.xi) - t  # type: ignore[arg-type]
    expected = conditional_mean_remaining(model, t)
    if state.denominator_mode is DenominatorMode.MEAN_RESIDUAL:
        return expected - t
    return expected


def decide(
    state: ControllerState, model: WeibullModel, t: float, dt: float, irq: float = math.inf
) -> RateDecision:
    """
    Choose the rate for the step [t, t + dt] without changing the state.

    Args:
        state (ControllerState): Current controller state.
        model (WeibullModel): Call-duration belief of the transmitter.
        t (float): Step start, seconds into the call.
        dt (float): Step length in seconds.
        irq (float): Quality cap IR_Q in bits/s.

    Returns:
        RateDecision: The rates for this step.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    irq = max(irq, 0.0)
    remaining = state.remaining_real
    if remaining <= 0.0:
        return RateDecision(0.0, 0.0, False, irq, anchor=state.arrears_anchor)

    if state.mode is ControllerMode.CONSTANT:
        base = float(state.rate)  # type: ignore[arg-type]
    else:
        try:
            denominator = rate_denominator(state, model, t)
        except SaturationError:
            logger.warning("call at t=%.1f s outlived the duration model, draining", t)
            denominator = 0.0
        base = remaining / denominator if denominator > 0.0 else math.inf
    base = min(base, remaining / dt)

    anchor = state.arrears_anchor
    extra = 0.0
    if base > irq:
        anchor = None
    elif state.arrears > 0.0:
        if anchor is None:
            anchor = (t, state.arrears)
        extra = min(arrears_rate(anchor[1], model, anchor[0]), state.arrears / dt)
    raw = min(base + extra, remaining / dt)
    capped = min(raw, irq)
    return RateDecision(
        ir_raw=raw,
        ir_capped=capped,
        cap_active=raw > irq,
        irq=irq,
        base_rate=base,
        arrears_rate=extra,
        anchor=anchor,
    )


def advance(
    state: ControllerState, decision: RateDecision, dt: float, delivered_bits: Optional[int] = None
) -> None:
    """
    Apply a decision to the state.

    Without delivered_bits the step sends ir_capped * dt bits, whole bits being
    counted and the remainder carried. The simulator passes the bits the packets
    actually carried instead.
    """
    if decision.base_rate > decision.irq:
        state.arrears += (decision.base_rate - decision.irq) * dt
        state.arrears_anchor = None
    else:
        state.arrears_anchor = decision.anchor
        repaid = max(decision.ir_capped - decision.base_rate, 0.0) * dt
        state.arrears = max(state.arrears - repaid, 0.0)
        if state.arrears == 0.0:
            state.arrears_anchor = None

    if delivered_bits is None:
        amount = decision.ir_capped * dt + state.carry
        whole = min(int(math.floor(amount)), state.s_remaining)
        state.delivered += whole
        state.carry = 0.0 if state.exhausted else amount - whole
    else:
        state.delivered += min(delivered_bits, state.s_remaining)
        if state.exhausted:
            state.carry = 0.0
    state.elapsed += dt


def residual_mean_step(
    state: ControllerState, model: WeibullModel, t: float, dt: float, irq: float = math.inf
) -> RateDecision:
    """One step of the residual-mean controller: decide, then advance the state."""
    if state.mode is not ControllerMode.RESIDUAL_MEAN:
        raise InvalidParameterError(f"state drives a {state.mode.value} controller")
    decision = decide(state, model, t, dt, irq)
    advance(state, decision, dt)
    return decision


def quantile_step(
    state: ControllerState,
    model: WeibullModel,
    t: float,
    dt: float,
    xi: float,
    irq: float = math.inf,
) -> RateDecision:
    """
    One step of the quantile controller with survival probability xi.

    Raises:
        InvalidParameterError: If xi is not strictly inside (0, 1); xi = 1 gives a
            zero horizon and no defined rate.
    """
    _check_xi(xi)
    if state.mode is not ControllerMode.QUANTILE:
        raise InvalidParameterError(f"state drives a {state.mode.value} controller")
    state.xi = xi
    decision = decide(state, model, t, dt, irq)
    advance(state, decision, dt)
    return decision


class Controller:
    """
    A controller state bound to the transmitter's duration model.

    The simulator holds one per call and calls decide() at every update epoch,
    then advance() with the bits the epoch's packets actually carried.

    Attributes:
        model (WeibullModel): Call-duration belief of the transmitter.
        state (ControllerState): Mutable controller state.

    Methods:
        decide(t, dt, irq): Rate for the step [t, t + dt]; the state is untouched.
        advance(decision, dt, delivered_bits): Apply a decision.
        step(t, dt, irq): decide() then advance() with the nominal bit count.
    """

    def __init__(self, model: WeibullModel, state: ControllerState) -> None:
        self.model: WeibullModel = model
        self.state: ControllerState = state

    def __repr__(self) -> str:
        return f"Controller({self.state.mode.value}, S={self.state.s_total}, {self.model})"

    @classmethod
    def create(
        cls,
        model: WeibullModel,
        s_total: int,
        mode: ControllerMode = ControllerMode.RESIDUAL_MEAN,
        xi: Optional[float] = None,
        denominator_mode: DenominatorMode = DenominatorMode.MEAN_RESIDUAL,
        rate: Optional[float] = None,
    ) -> "Controller":
        state = ControllerState(
            s_total=s_total, mode=mode, xi=xi, denominator_mode=denominator_mode, rate=rate
        )
        return cls(model, state)

    def decide(self, t: float, dt: float, irq: float = math.inf) -> RateDecision:
        return decide(self.state, self.model, t, dt, irq)

    def advance(
        self, decision: RateDecision, dt: float, delivered_bits: Optional[int] = None
    ) -> None:
        advance(self.state, decision, dt, delivered_bits)

    def step(self, t: float, dt: float, irq: float = math.inf) -> RateDecision:
        decision = self.decide(t, dt, irq)
        self.advance(decision, dt)
        return decision


@dataclass
class RateTrajectory:
    """
    Controller output sampled at the start of every step.

    Attributes:
        times (np.ndarray): Step start times in seconds.
        ir_raw (np.ndarray): Uncapped rates in bits/s.
        ir_capped (np.ndarray): Applied rates in bits/s.
        s_remaining (np.ndarray): S_R at each step start, in bits.
        arrears (np.ndarray): Arrears at each step start, in bits.
    """

    times: np.ndarray
    ir_raw: np.ndarray
    ir_capped: np.ndarray
    s_remaining: np.ndarray
    arrears: np.ndarray
    decisions: List[RateDecision] = field(default_factory=list, repr=False)


CapSchedule = Union[float, Callable[[float], float]]


def run_controller(
    model: WeibullModel,
    state: ControllerState,
    horizon: float,
    dt: float,
    irq: CapSchedule = math.inf,
) -> RateTrajectory:
    """
    Step a controller from t = 0 to t = horizon.

    Args:
        model (WeibullModel): Call-duration belief.
        state (ControllerState): Fresh controller state; it is advanced in place.
        horizon (float): Last sampled time in seconds.
        dt (float): Step length in seconds.
        irq (float | Callable[[float], float]): Constant cap or cap as a function of t.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    steps = int(round(horizon / dt))
    cap: Callable[[float], float]
    if callable(irq):
        cap = irq
    else:
        constant_cap = float(irq)
        cap = lambda _t: constant_cap  # noqa: E731
    times = np.arange(steps + 1) * dt
    raw = np.zeros(steps + 1)
    capped = np.zeros(steps + 1)
    remaining = np.zeros(steps + 1)
    arrears = np.zeros(steps + 1)
    decisions: List[RateDecision] = []
    for i, t in enumerate(times):
        remaining[i] = state.remaining_real
        arrears[i] = state.arrears
        decision = decide(state, model, float(t), dt, cap(float(t)))
        raw[i] = decision.ir_raw
        capped[i] = decision.ir_capped
        decisions.append(decision)
        advance(state, decision, dt)
    return RateTrajectory(times, raw, capped, remaining, arrears, decisions)


def gain_metrics(
    times: Sequence[float], rates: Sequence[float], ir_initial: Optional[float] = None
) -> Tuple[np.ndarray, float]:
    """
    Rate decrease X(t) = IR(0) - IR(t) along a trajectory, and its integral Z.

    Args:
        times (Sequence[float]): Sample times in seconds, starting at t = 0.
        rates (Sequence[float]): IR at each sample time.
        ir_initial (Optional[float]): IR(0); defaults to the first rate.

    Returns:
        Tuple[np.ndarray, float]: X per sample and Z by the trapezoidal rule.
    """
    series = np.asarray(rates, dtype=float)
    if series.size == 0:
        raise InvalidParameterError("gain metrics need at least one rate")
    start = float(series[0]) if ir_initial is None else ir_initial
    x_series = start - series
    return x_series, float(trapezoid(x_series, np.asarray(times, dtype=float)))


def mos_gain_series(
    params: MosParams,
    p_network: float,
    ir_initial: float,
    x_series: Sequence[float],
    codec: CodecProfile,
) -> np.ndarray:
    """MOS gain along a trajectory; negative decreases are treated as no gain."""
    clipped = np.clip(np.asarray(x_series, dtype=float), 0.0, ir_initial)
    return np.array([mos_gain(params, p_network, ir_initial, x, codec) for x in clipped])

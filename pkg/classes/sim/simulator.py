"""
LACK call simulator

Simulates one VoIP call on a 1 ms tick: the RTP stream, network loss and
delay, the LACK transmitter replacing voice payloads with steganogram bits and
delaying those packets past the receiver's jitter buffer, the receiver's
classification and the RTCP reports that drive the insertion-rate controller.

Randomness comes from one numpy Generator seeded by the scenario, drawn in a
fixed order (duration, network delays, network losses, LACK selection), so a
scenario always yields the same trace.

Usage:
    trace = run_call(Scenario(seed=7, steganogram_bits=64000))
"""

import logging
import math
from dataclasses import replace
from typing import List, Optional, Union

import numpy as np

from classes.budget.budget import effective_loss_cap, min_lack_delay
from classes.control.controller import Controller, ControllerMode, constant_rate
from classes.quality.mos import irq_dynamic, irq_static, mos_from_loss
from classes.sim.receiver import (
    JitterBuffer,
    Outcome,
    RtcpReport,
    RtcpWindow,
    classify_arrivals,
    rtcp_feedback,
)
from classes.sim.scenario import CapPolicy, Scenario
from classes.sim.trace import CallTrace, EpochRecord
from classes.stego.steganogram import Reassembler, Steganogram
from utils.constants import TICK_MS
from utils.exceptions import InfeasibleScenarioError

logger = logging.getLogger(__name__)


def derive_call_seeds(master_seed: int, n: int) -> List[int]:
    """
    Independent per-call seeds from one master seed.

    The i-th seed depends only on master_seed and i, so calls can run in any
    order or in parallel.
    """
    children = np.random.SeedSequence(master_seed).spawn(n)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


class CallSimulator:
    """
    Event loop of one simulated call.

    Packets are handled epoch by epoch; an epoch spans one controller update
    interval, during which the insertion rate, the LACK delay and the
    jitter-buffer allowance are constant.

    Attributes:
        scenario (Scenario): The call to simulate.
        rng (np.random.Generator): Source of all randomness of the call.
        buffer (JitterBuffer): Receiver playout buffer.
        reports (List[RtcpReport]): Receiver reports produced so far.
        steganogram (Optional[Steganogram]): Sealed message, when the scenario has one.
        reassembler (Optional[Reassembler]): Receiver-side message reassembly.

    Methods:
        run(): Simulate the call and return its trace.
        lack_delay(allowance_ms): Intentional delay that forces a packet late.
        quality_cap(): IR_Q from the latest receiver report.
    """

    def __init__(self, scenario: Scenario, key: Optional[Union[str, bytes]] = None) -> None:
        self.scenario: Scenario = scenario
        self.key: Optional[Union[str, bytes]] = key
        self.rng: np.random.Generator = np.random.default_rng(scenario.seed)
        self.buffer: JitterBuffer = JitterBuffer(scenario.jitter_buffer)
        self.reports: List[RtcpReport] = []
        self.steganogram: Optional[Steganogram] = None
        self.reassembler: Optional[Reassembler] = None
        if scenario.message is not None:
            self.steganogram = Steganogram.from_text(scenario.message, key)
            self.reassembler = Reassembler(self.steganogram.size_bits)

    @property
    def steganogram_bits(self) -> int:
        if self.steganogram is not None:
            return self.steganogram.size_bits
        return self.scenario.steganogram_bits

    def _controller(self) -> Controller:
        config = self.scenario.controller
        rate = None
        if config.mode is ControllerMode.CONSTANT:
            rate = config.rate_bps
            if rate is None:
                rate = constant_rate(self.steganogram_bits, self.scenario.duration.planned)
        return Controller.create(
            self.scenario.duration.model,
            self.steganogram_bits,
            mode=config.mode,
            xi=config.xi if config.mode is ControllerMode.QUANTILE else None,
            denominator_mode=config.denominator,
            rate=rate,
        )

    def lack_delay(self, allowance_ms: float) -> float:
        """
        Smallest d_L that keeps every LACK packet out of the jitter buffer.

        Raises:
            InfeasibleScenarioError: If that delay exceeds the scenario's maximum.
        """
        scenario = self.scenario
        budget = replace(
            scenario.processing,
            jitter_buffer=allowance_ms,
            network=scenario.network.min_delay_ms,
        )
        if scenario.jitter_buffer.adaptive:
            delay = min_lack_delay(budget, adaptive=True, granularity=TICK_MS)
        else:
            delay = min_lack_delay(budget, adaptive=False) + TICK_MS
        if delay > scenario.max_lack_delay_ms:
            raise InfeasibleScenarioError(
                f"LACK delay of {delay:.0f} ms exceeds the "
                f"{scenario.max_lack_delay_ms:.0f} ms limit"
            )
        return delay

    def _network_estimate(self) -> float:
        if self.reports:
            return self.reports[-1].network_loss_fraction
        return self.scenario.network.nominal_loss

    def _mos_estimate(self) -> float:
        if self.reports:
            return self.reports[-1].mos
        return mos_from_loss(self.scenario.mos, self.scenario.network.nominal_loss)

    def quality_cap(self) -> float:
        """
        IR_Q in bits/s, never above the codec capacity.

        The dynamic policy holds the rate at zero while the reported MOS is below
        the floor, and otherwise allows the rate that would bring MOS down to the floor.
        """
        scenario = self.scenario
        cap = scenario.cap
        codec = scenario.codec
        p_network = self._network_estimate()
        if cap.policy is CapPolicy.NONE:
            irq = math.inf
        elif cap.policy is CapPolicy.CODEC:
            irq = effective_loss_cap(codec, p_network, cap.total_loss) * codec.capacity_bps
        elif cap.policy is CapPolicy.STATIC:
            irq = irq_static(cap.histogram, cap.eta, scenario.mos, p_network, codec)  # type: ignore
        elif self._mos_estimate() < cap.mos_floor:
            irq = 0.0
        else:
            # the reported MOS already counts the late LACK packets, so it only gates
            # the cap; the cap itself is the LACK loss that takes MOS down to the floor
            irq = irq_dynamic(scenario.mos, cap.mos_floor, cap.mos_floor, p_network, codec)
        return min(irq, codec.capacity_bps)

    def _assign_bits(
        self, selected: np.ndarray, network_lost: np.ndarray, s_remaining: int
    ) -> np.ndarray:
        # payload bits per packet; lost steg packets carry bits that are sent again later
        payload = int(self.scenario.codec.payload_bits)
        bits = np.zeros(len(selected), dtype=np.int64)
        arriving = selected & ~network_lost
        bits[arriving] = payload
        cumulative = np.cumsum(bits)
        if s_remaining <= 0:
            selected[:] = False
            return np.zeros(len(selected), dtype=np.int64)
        if cumulative.size and cumulative[-1] >= s_remaining:
            last = int(np.searchsorted(cumulative, s_remaining))
            bits[last] = s_remaining - (cumulative[last] - payload)
            bits[last + 1 :] = 0
            selected[last + 1 :] = False
        return bits

    def _emit_report(self, time_ms: int, lo: int, hi: int, columns: dict) -> None:
        window = RtcpWindow(
            time_s=time_ms / 1000.0,
            outcomes=columns["outcome"][lo:hi],
            transit_ms=columns["total_delay_ms"][lo:hi],
        )
        previous = self.reports[-1] if self.reports else None
        self.reports.append(rtcp_feedback(window, self.scenario.mos, previous))

    def run(self) -> CallTrace:
        """
        Simulate the call.

        Returns:
            CallTrace: Packet columns, RTCP reports and controller epochs.

        Raises:
            InfeasibleScenarioError: If LACK packets cannot be forced late.
        """
        scenario = self.scenario
        codec = scenario.codec
        capacity = codec.capacity_bps
        processing_ms = scenario.processing.processing_delay

        duration_s = scenario.duration.draw(self.rng)
        duration_ms = max(int(round(duration_s * 1000.0)), TICK_MS)
        interval_ms = codec.packet_interval_ms
        n_packets = int(math.ceil(duration_ms / interval_ms))
        send_ms = np.rint(np.arange(n_packets) * interval_ms).astype(np.int64)
        network_delay = scenario.network.sample_delays(self.rng, n_packets)
        network_lost = self.rng.random(n_packets) < scenario.network.loss_at(send_ms / 1000.0)
        selection = self.rng.random(n_packets)

        columns = {
            "seq": np.arange(n_packets, dtype=np.int64),
            "send_ms": send_ms,
            "carries_steg": np.zeros(n_packets, dtype=bool),
            "steg_bits": np.zeros(n_packets, dtype=np.int64),
            "delivered_bits": np.zeros(n_packets, dtype=np.int64),
            "lack_delay_ms": np.zeros(n_packets),
            "network_delay_ms": network_delay.astype(float),
            "total_delay_ms": np.zeros(n_packets),
            "allowance_ms": np.zeros(n_packets),
            "outcome": np.zeros(n_packets, dtype=np.int8),
        }
        controller = self._controller()
        epochs: List[EpochRecord] = []
        epoch_ms = max(int(round(scenario.update_interval * 1000.0)), TICK_MS)
        rtcp_ms = max(int(round(scenario.rtcp_interval * 1000.0)), TICK_MS)
        next_report_ms = rtcp_ms
        report_lo = 0

        for start in range(0, duration_ms, epoch_ms):
            stop = min(start + epoch_ms, duration_ms)
            lo, hi = np.searchsorted(send_ms, [start, stop])
            dt = (stop - start) / 1000.0
            allowance = self.buffer.allowance_ms
            lack_delay = self.lack_delay(allowance)
            decision = controller.decide(start / 1000.0, dt, self.quality_cap())
            p_lack = decision.ir_capped / capacity

            selected = selection[lo:hi] < p_lack
            bits = self._assign_bits(selected, network_lost[lo:hi], controller.state.s_remaining)
            columns["carries_steg"][lo:hi] = selected
            columns["steg_bits"][lo:hi] = bits
            columns["lack_delay_ms"][lo:hi] = np.where(selected, lack_delay, 0.0)
            columns["allowance_ms"][lo:hi] = allowance
            total = processing_ms + columns["lack_delay_ms"][lo:hi] + network_delay[lo:hi]
            columns["total_delay_ms"][lo:hi] = total
            outcome = classify_arrivals(total, np.full(hi - lo, allowance), network_lost[lo:hi])
            columns["outcome"][lo:hi] = outcome

            offset = controller.state.delivered
            if scenario.receiver_aware:
                columns["delivered_bits"][lo:hi] = bits
                if self.reassembler is not None and self.steganogram is not None:
                    for index in np.flatnonzero(bits):
                        self.reassembler.add(
                            offset, self.steganogram.chunk(offset, int(bits[index]))
                        )
                        offset += int(bits[index])
            controller.advance(decision, dt, delivered_bits=int(bits.sum()))

            voice = ~selected & (outcome != Outcome.NETWORK_LOST)
            self.buffer.observe(total[voice])
            epochs.append(
                EpochRecord(
                    t_s=start / 1000.0,
                    irq=decision.irq,
                    ir_raw=decision.ir_raw,
                    ir_capped=decision.ir_capped,
                    p_lack=p_lack,
                    allowance_ms=allowance,
                    lack_delay_ms=lack_delay,
                    s_remaining=controller.state.s_remaining,
                )
            )
            logger.debug(
                "epoch %.1f s: IR %.2f b/s (cap %.2f), %d steg packets, S_R %d",
                start / 1000.0,
                decision.ir_capped,
                decision.irq,
                int(selected.sum()),
                controller.state.s_remaining,
            )

            while next_report_ms <= stop:
                report_hi = int(np.searchsorted(send_ms, next_report_ms))
                self._emit_report(next_report_ms, report_lo, report_hi, columns)
                report_lo = report_hi
                next_report_ms += rtcp_ms

        if controller.state.s_remaining > 0:
            logger.info(
                "call %s ended with %d of %d steganogram bits unsent",
                scenario.name,
                controller.state.s_remaining,
                self.steganogram_bits,
            )
        recovered = None
        if self.reassembler is not None and scenario.receiver_aware:
            recovered = self.reassembler.open(self.key)
        trace = CallTrace(
            name=scenario.name,
            seed=scenario.seed,
            duration_s=duration_s,
            steganogram_bits=self.steganogram_bits,
            columns=columns,
            reports=self.reports,
            epochs=epochs,
            recovered_message=recovered,
        )
        logger.info(
            "call %s (seed %d): %.1f s, %d packets, %d steg, %d bits delivered",
            scenario.name,
            scenario.seed,
            duration_s,
            len(trace),
            trace.steg_packets,
            trace.delivered_bits,
        )
        return trace


def run_call(scenario: Scenario, key: Optional[Union[str, bytes]] = None) -> CallTrace:
    """
    Simulate one call.

    Args:
        scenario (Scenario): Call description, including its seed.
        key (Optional[str | bytes]): Fernet key for sealed messages.

    Returns:
        CallTrace: The call's packets, reports and controller epochs.
    """
    return CallSimulator(scenario, key).run()

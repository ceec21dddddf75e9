"""
Per-call simulation output

CallTrace keeps one entry per generated RTP packet as parallel numpy columns,
plus the RTCP reports and controller epochs of the call. Traces are written as
CSV, one row per packet, behind a single '#' metadata line.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union
from urllib.parse import quote, unquote

import numpy as np

from classes.sim.receiver import Outcome, RtcpReport

TRACE_COLUMNS: List[str] = [
    "seq",
    "send_ms",
    "carries_steg",
    "steg_bits",
    "delivered_bits",
    "lack_delay_ms",
    "network_delay_ms",
    "total_delay_ms",
    "allowance_ms",
    "outcome",
]

SUMMARY_COLUMNS: List[str] = [
    "name",
    "seed",
    "duration_s",
    "packets",
    "played",
    "late",
    "network_lost",
    "steg_packets",
    "realized_network_loss",
    "realized_lack_loss",
    "observed_loss_fraction",
    "steganogram_bits",
    "delivered_bits",
    "message_recovered",
]


@dataclass(frozen=True)
class PacketEvent:
    """
    One RTP packet of a simulated call.

    Attributes:
        seq (int): Sequence number.
        send_ms (int): Generation instant in ms.
        carries_steg (bool): Whether the voice payload was replaced by steganogram bits.
        steg_bits (int): Steganogram bits the packet carried.
        delivered_bits (int): Bits the receiver extracted from it.
        lack_delay_ms (float): Intentional delay d_L, 0 for voice packets.
        network_delay_ms (float): d_N.
        total_delay_ms (float): Processing + d_L + d_N.
        allowance_ms (float): Jitter-buffer allowance when the packet arrived.
        outcome (Outcome): Played, Late or NetworkLost.
    """

    seq: int
    send_ms: int
    carries_steg: bool
    steg_bits: int
    delivered_bits: int
    lack_delay_ms: float
    network_delay_ms: float
    total_delay_ms: float
    allowance_ms: float
    outcome: Outcome


@dataclass(frozen=True)
class EpochRecord:
    """Controller decision applied between two updates."""

    t_s: float
    irq: float
    ir_raw: float
    ir_capped: float
    p_lack: float
    allowance_ms: float
    lack_delay_ms: float
    s_remaining: int


@dataclass
class CallTrace:
    """
    Everything observed during one simulated call.

    Attributes:
        name (str): Scenario name.
        seed (int): Seed the call was run with.
        duration_s (float): Call duration.
        steganogram_bits (int): S.
        columns (Dict[str, np.ndarray]): Packet columns keyed by TRACE_COLUMNS.
        reports (List[RtcpReport]): RTCP receiver reports in time order.
        epochs (List[EpochRecord]): Controller epochs in time order.
        recovered_message (Optional[str]): Message unsealed by an aware receiver.
    """

    name: str
    seed: int
    duration_s: float
    steganogram_bits: int
    columns: Dict[str, np.ndarray]
    reports: List[RtcpReport] = field(default_factory=list)
    epochs: List[EpochRecord] = field(default_factory=list)
    recovered_message: Optional[str] = None

    def __len__(self) -> int:
        return len(self.columns["seq"])

    @property
    def outcomes(self) -> np.ndarray:
        return self.columns["outcome"]

    def count(self, outcome: Outcome) -> int:
        return int(np.count_nonzero(self.outcomes == outcome))

    @property
    def steg_packets(self) -> int:
        return int(np.count_nonzero(self.columns["carries_steg"]))

    @property
    def realized_network_loss(self) -> float:
        return self.count(Outcome.NETWORK_LOST) / len(self) if len(self) else 0.0

    @property
    def realized_lack_loss(self) -> float:
        return self.steg_packets / len(self) if len(self) else 0.0

    @property
    def observed_loss_fraction(self) -> float:
        """Share of packets the listener never hears: network losses plus late arrivals."""
        if not len(self):
            return 0.0
        return (self.count(Outcome.NETWORK_LOST) + self.count(Outcome.LATE)) / len(self)

    @property
    def delivered_bits(self) -> int:
        return int(self.columns["delivered_bits"].sum())

    @property
    def mos_series(self) -> np.ndarray:
        """(time, MOS) rows from the RTCP reports."""
        return np.array([(r.time_s, r.mos) for r in self.reports]).reshape(-1, 2)

    @property
    def events(self) -> List[PacketEvent]:
        cols = self.columns
        return [
            PacketEvent(
                seq=int(cols["seq"][i]),
                send_ms=int(cols["send_ms"][i]),
                carries_steg=bool(cols["carries_steg"][i]),
                steg_bits=int(cols["steg_bits"][i]),
                delivered_bits=int(cols["delivered_bits"][i]),
                lack_delay_ms=float(cols["lack_delay_ms"][i]),
                network_delay_ms=float(cols["network_delay_ms"][i]),
                total_delay_ms=float(cols["total_delay_ms"][i]),
                allowance_ms=float(cols["allowance_ms"][i]),
                outcome=Outcome(int(cols["outcome"][i])),
            )
            for i in range(len(self))
        ]

    def summary(self) -> Dict[str, Union[str, int, float]]:
        return {
            "name": self.name,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "packets": len(self),
            "played": self.count(Outcome.PLAYED),
            "late": self.count(Outcome.LATE),
            "network_lost": self.count(Outcome.NETWORK_LOST),
            "steg_packets": self.steg_packets,
            "realized_network_loss": self.realized_network_loss,
            "realized_lack_loss": self.realized_lack_loss,
            "observed_loss_fraction": self.observed_loss_fraction,
            "steganogram_bits": self.steganogram_bits,
            "delivered_bits": self.delivered_bits,
            "message_recovered": int(self.recovered_message is not None),
        }

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write one row per packet behind a metadata line; the name is percent-encoded."""
        with open(path, "w", newline="", encoding="utf-8") as handle:
            handle.write(
                f"# name={quote(self.name, safe='')};seed={self.seed};"
                f"duration_s={self.duration_s!r};"
                f"steganogram_bits={self.steganogram_bits}\n"
            )
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for event in self.events:
                writer.writerow(
                    [
                        event.seq,
                        event.send_ms,
                        int(event.carries_steg),
                        event.steg_bits,
                        event.delivered_bits,
                        repr(event.lack_delay_ms),
                        repr(event.network_delay_ms),
                        repr(event.total_delay_ms),
                        repr(event.allowance_ms),
                        event.outcome.label,
                    ]
                )


def read_trace_csv(path: Union[str, Path]) -> CallTrace:
    """
    Load a trace written by CallTrace.to_csv.

    RTCP reports and controller epochs are not part of the file and come back empty.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        meta_line = handle.readline().lstrip("#").strip()
        pairs = (item.split("=", 1) for item in meta_line.split(";") if item)
        meta = {key: unquote(value) for key, value in pairs}
        rows = list(csv.DictReader(handle))

    def column(name: str, dtype: type) -> np.ndarray:
        return np.array([dtype(row[name]) for row in rows], dtype=dtype)

    columns = {
        "seq": column("seq", int),
        "send_ms": column("send_ms", int),
        "carries_steg": np.array([row["carries_steg"] == "1" for row in rows], dtype=bool),
        "steg_bits": column("steg_bits", int),
        "delivered_bits": column("delivered_bits", int),
        "lack_delay_ms": column("lack_delay_ms", float),
        "network_delay_ms": column("network_delay_ms", float),
        "total_delay_ms": column("total_delay_ms", float),
        "allowance_ms": column("allowance_ms", float),
        "outcome": np.array([Outcome.from_label(row["outcome"]) for row in rows], dtype=np.int8),
    }
    return CallTrace(
        name=meta.get("name", Path(path).stem),
        seed=int(meta.get("seed", 0)),
        duration_s=float(meta.get("duration_s", 0.0)),
        steganogram_bits=int(meta.get("steganogram_bits", 0)),
        columns=columns,
    )

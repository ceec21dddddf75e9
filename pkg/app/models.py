"""
Results store models

SQLAlchemy ORM models for experiment runs, their simulated calls and the
warden reports produced for them. Recovered steganogram messages are stored
Fernet-encrypted with the same key the simulator seals them with.

Classes:
    - ExperimentRun: One invocation of the experiment runner.
    - CallRecord: Summary of one simulated call.
    - WardenRecord: One warden verdict.

Usage:
    Session = init_store("sqlite:///results.db")
    with Session() as session:
        session.add(ExperimentRun(master_seed=7, replications=100, scenarios="a.toml"))
"""

from datetime import datetime
from typing import List, Optional

from cryptography.fernet import Fernet
from sqlalchemy import DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column, relationship
from sqlalchemy.sql import func

from classes.stego.steganogram import load_key


class Base(DeclarativeBase):
    pass


class ExperimentRun(Base):
    """
    One experiment run.

    Attributes:
        id (int): Primary key.
        master_seed (int): Seed all call seeds were derived from.
        replications (int): Calls per sweep point.
        scenarios (str): Scenario files, comma separated.
        out_dir (str): Directory the CSV artifacts were written to.
        created_at (datetime): Insertion time.
        calls (relationship): The run's calls.
        warden_reports (relationship): The run's warden verdicts.
    """

    __tablename__ = "experiment_runs"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    master_seed: Mapped[int] = mapped_column(Integer, nullable=False)
    replications: Mapped[int] = mapped_column(Integer, nullable=False)
    scenarios: Mapped[str] = mapped_column(String(1024), nullable=False)
    out_dir: Mapped[str] = mapped_column(String(1024), default="")
    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), server_default=func.now(), nullable=False
    )

    calls: Mapped[List["CallRecord"]] = relationship(back_populates="run")
    warden_reports: Mapped[List["WardenRecord"]] = relationship(back_populates="run")

    def __repr__(self) -> str:
        return f"ExperimentRun(id={self.id}, master_seed={self.master_seed})"


class CallRecord(Base):
    """
    Summary of one simulated call.

    Attributes:
        scenario (str): Scenario name.
        point (str): Sweep point label.
        replication (int): Index of the call within its sweep point.
        seed (int): Call seed.
        duration_s (float): Call duration.
        packets, played, late, network_lost, steg_packets (int): Packet tallies.
        realized_lack_loss, observed_loss_fraction (float): Realized loss ratios.
        delivered_bits (int): Steganogram bits extracted by the receiver.
        message (Optional[str]): Recovered message, stored encrypted.
    """

    __tablename__ = "calls"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey("experiment_runs.id"), nullable=False)
    scenario: Mapped[str] = mapped_column(String(256), nullable=False)
    point: Mapped[str] = mapped_column(String(256), default="")
    replication: Mapped[int] = mapped_column(Integer, nullable=False)
    seed: Mapped[int] = mapped_column(Integer, nullable=False)
    duration_s: Mapped[float] = mapped_column(Float, nullable=False)
    packets: Mapped[int] = mapped_column(Integer, nullable=False)
    played: Mapped[int] = mapped_column(Integer, nullable=False)
    late: Mapped[int] = mapped_column(Integer, nullable=False)
    network_lost: Mapped[int] = mapped_column(Integer, nullable=False)
    steg_packets: Mapped[int] = mapped_column(Integer, nullable=False)
    realized_lack_loss: Mapped[float] = mapped_column(Float, nullable=False)
    observed_loss_fraction: Mapped[float] = mapped_column(Float, nullable=False)
    delivered_bits: Mapped[int] = mapped_column(Integer, nullable=False)
    _message: Mapped[Optional[str]] = mapped_column("message", String(4096), nullable=True)

    run: Mapped[ExperimentRun] = relationship(back_populates="calls")

    @property
    def message(self) -> Optional[str]:
        if self._message is None:
            return None
        return Fernet(load_key()).decrypt(self._message.encode()).decode("utf-8")

    @message.setter
    def message(self, value: Optional[str]) -> None:
        if value is None:
            self._message = None
        else:
            self._message = Fernet(load_key()).encrypt(value.encode("utf-8")).decode()

    def __repr__(self) -> str:
        return f"CallRecord({self.scenario} {self.point} #{self.replication}, seed={self.seed})"


class WardenRecord(Base):
    """
    One warden verdict.

    Attributes:
        subject (str): Examined call or cohort.
        test (str): Warden that produced it.
        statistic, threshold (float): Decision inputs.
        verdict (str): "flagged" or "clear".
        steg_bits_destroyed, legit_dropped (Optional[int]): Active warden damage.
        mos_penalty (Optional[float]): Active warden quality cost.
    """

    __tablename__ = "warden_reports"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    run_id: Mapped[int] = mapped_column(ForeignKey("experiment_runs.id"), nullable=False)
    subject: Mapped[str] = mapped_column(String(256), nullable=False)
    test: Mapped[str] = mapped_column(String(32), nullable=False)
    statistic: Mapped[float] = mapped_column(Float, nullable=False)
    threshold: Mapped[float] = mapped_column(Float, nullable=False)
    verdict: Mapped[str] = mapped_column(String(16), nullable=False)
    steg_bits_destroyed: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    legit_dropped: Mapped[Optional[int]] = mapped_column(Integer, nullable=True)
    mos_penalty: Mapped[Optional[float]] = mapped_column(Float, nullable=True)

    run: Mapped[ExperimentRun] = relationship(back_populates="warden_reports")

    def __repr__(self) -> str:
        return f"WardenRecord({self.test} {self.subject}: {self.verdict})"

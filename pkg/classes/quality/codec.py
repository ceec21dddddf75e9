"""
Voice codec framing and loss tolerance.
"""

from dataclasses import dataclass, replace
from typing import Optional

from utils.constants import CODEC_DEFAULTS, CODEC_TOLERANCES
from utils.exceptions import ConfigError, InvalidParameterError


@dataclass(frozen=True)
class CodecProfile:
    """
    RTP framing of a voice codec.

    Attributes:
        name (str): Codec name, e.g. "G.711".
        packets_per_second (float): N_p, RTP packets generated per second.
        payload_bits (float): P_p, length of the RTP payload in bits.
        max_loss_tolerance (float): Largest total loss probability the codec tolerates.
        plc_enabled (bool): Whether packet loss concealment raised the tolerance.
    """

    name: str
    packets_per_second: float
    payload_bits: float
    max_loss_tolerance: float
    plc_enabled: bool = False

    def __post_init__(self) -> None:
        if not self.packets_per_second > 0:
            raise InvalidParameterError("packets_per_second must be positive")
        if not self.payload_bits > 0:
            raise InvalidParameterError("payload_bits must be positive")
        if not 0.0 < self.max_loss_tolerance < 1.0:
            raise InvalidParameterError("max_loss_tolerance must lie in (0, 1)")

    @property
    def capacity_bps(self) -> float:
        """N_p * P_p: hidden bits per second if every packet carried steganogram."""
        return self.packets_per_second * self.payload_bits

    @property
    def packet_interval_ms(self) -> float:
        return 1000.0 / self.packets_per_second

    def with_plc(self, tolerance: Optional[float] = None) -> "CodecProfile":
        if tolerance is None:
            defaults = CODEC_DEFAULTS.get(self.name)
            if defaults is None:
                raise InvalidParameterError(f"no published PLC tolerance for {self.name}")
            tolerance = defaults[3]
        return replace(self, max_loss_tolerance=tolerance, plc_enabled=True)


def codec_profile(
    name: str,
    plc: bool = False,
    packets_per_second: Optional[float] = None,
    payload_bits: Optional[float] = None,
    max_loss_tolerance: Optional[float] = None,
) -> CodecProfile:
    """
    Build a codec profile from its name plus any overrides.

    G.711 has complete defaults (50 packets/s, 1280-bit payload, 3% tolerance,
    5% with PLC). G.729A and G.723.1 only have published tolerances; their
    framing has to be supplied.

    Raises:
        ConfigError: If the framing of a codec without defaults is missing.
    """
    defaults = CODEC_DEFAULTS.get(name)
    if defaults is not None:
        pps, bits, tolerance, plc_tolerance = defaults
        packets_per_second = packets_per_second or pps
        payload_bits = payload_bits or bits
        if max_loss_tolerance is None:
            max_loss_tolerance = plc_tolerance if plc else tolerance
    else:
        if packets_per_second is None:
            raise ConfigError(f"codec {name} needs an explicit value", "codec.packets_per_second")
        if payload_bits is None:
            raise ConfigError(f"codec {name} needs an explicit value", "codec.payload_bits")
        if max_loss_tolerance is None:
            max_loss_tolerance = CODEC_TOLERANCES.get(name)
        if max_loss_tolerance is None:
            raise ConfigError(f"codec {name} needs an explicit value", "codec.max_loss_tolerance")
    return CodecProfile(
        name=name,
        packets_per_second=float(packets_per_second),
        payload_bits=float(payload_bits),
        max_loss_tolerance=float(max_loss_tolerance),
        plc_enabled=plc,
    )


G711: CodecProfile = codec_profile("G.711")

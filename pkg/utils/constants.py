"""
Shared constants for the LACK analytics and simulator.

Values marked as published come from the LACK performance study and the
references it cites; everything else is a simulator default that scenario
files may override.
"""

from typing import Dict, List, Tuple

# MOS-vs-loss law, Skype telephony fit
MOS_ALPHA: float = 3.0829
MOS_BETA: float = -4.6446
MOS_GAMMA: float = 1.07
MOS_MIN: float = 1.0
MOS_MAX: float = 5.0

# Call duration statistics of the FastWeb traces
MEAN_CALL_DURATION: float = 117.31
CALL_DURATION_STD: float = 278.74

# Shape parameters analysed against the mean above (table 1)
TABLE_ONE_SHAPES: List[float] = [3.4, 2.0, 1.2, 1.0, 0.5]
TABLE_ONE_SCALES: List[float] = [130.57, 132.37, 124.71, 117.31, 58.65]
TABLE_ONE_CVS: List[float] = [0.32, 0.52, 0.84, 1.0, 2.23]

# Piecewise empirical density support, seconds
EMPIRICAL_SUPPORT: Tuple[float, float] = (0.0, 455.0)
EMPIRICAL_BREAKS: Tuple[float, float] = (27.5, 66.5)

# Numerics
TAIL_ABS_TOLERANCE: float = 1e-10
TAIL_TRUNCATION: float = 1e-15
LOG_SURVIVAL_FLOOR: float = -700.0

# Codec name -> (packets/s, payload bits, loss tolerance, loss tolerance with PLC)
CODEC_DEFAULTS: Dict[str, Tuple[float, float, float, float]] = {
    "G.711": (50.0, 1280.0, 0.03, 0.05),
}
# Only the tolerance is published for these; framing must come from config
CODEC_TOLERANCES: Dict[str, float] = {
    "G.711": 0.03,
    "G.729A": 0.02,
    "G.723.1": 0.01,
}

# Simulator defaults, milliseconds unless stated
TICK_MS: int = 1
DSP_DELAY_MS: float = 10.0
CODING_DELAY_MS: float = 5.0
ENCAPSULATION_DELAY_MS: float = 25.0
JITTER_BUFFER_MS: float = 100.0
NETWORK_DELAY_MS: float = 30.0
NETWORK_JITTER_MS: float = 10.0
ADAPTIVE_WINDOW: int = 50
ADAPTIVE_HEADROOM_MS: float = 10.0
MAX_LACK_DELAY_MS: float = 1000.0
RTCP_INTERVAL_S: float = 5.0
FINE_STEP_S: float = 0.1
RTCP_JITTER_GAIN: float = 1.0 / 16.0

# Figure datasets
FIGURE_HORIZON_S: float = 600.0
FIGURE_STEP_S: float = 1.0
FIGURE_STEGANOGRAM_BITS: int = 1000

STEGO_KEY_ENV: str = "LACK_STEGO_KEY"

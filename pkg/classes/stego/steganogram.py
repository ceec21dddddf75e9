"""
Steganogram payloads

A steganogram is the covert message that LACK packets carry in place of voice
payload. Text messages are sealed with Fernet before embedding so the bits on
the wire look random; the receiver reassembles the chunks of the Late packets
it extracted and unseals them.

Imports:
    - cryptography.fernet: Fernet sealing of the message bytes

Classes:
    - Steganogram: The sealed payload, addressed by bit offset.
    - Reassembler: Receiver-side collection of extracted chunks.
"""

import logging
import os
from typing import Dict, Optional, Union

from cryptography.fernet import Fernet, InvalidToken

from utils.constants import STEGO_KEY_ENV
from utils.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)


_PROCESS_KEY: str = Fernet.generate_key().decode()


def load_key() -> bytes:
    """Key shared by the LACK endpoints; a per-process key when the environment has none."""
    return os.environ.get(STEGO_KEY_ENV, _PROCESS_KEY).encode()


class Steganogram:
    """
    Sealed covert message.

    Attributes:
        payload (bytes): Bytes that travel inside LACK packets.
        size_bits (int): Steganogram size S in bits.
    """

    def __init__(self, payload: bytes) -> None:
        self.payload: bytes = payload
        self.size_bits: int = len(payload) * 8

    def __repr__(self) -> str:
        return f"Steganogram(size_bits={self.size_bits})"

    @classmethod
    def from_text(cls, text: str, key: Optional[Union[str, bytes]] = None) -> "Steganogram":
        """
        Seal a text message with Fernet.

        Args:
            text (str): The covert message.
            key (Optional[str | bytes]): Fernet key; defaults to the shared key.
        """
        fernet = Fernet(_as_bytes(key) if key is not None else load_key())
        return cls(fernet.encrypt(text.encode("utf-8")))

    def chunk(self, offset_bits: int, n_bits: int) -> bytes:
        """
        Bytes for bits [offset_bits, offset_bits + n_bits).

        Raises:
            InvalidParameterError: If the range is not byte aligned or out of bounds.
        """
        if offset_bits % 8 or (n_bits % 8 and offset_bits + n_bits != self.size_bits):
            raise InvalidParameterError("steganogram chunks must be byte aligned")
        if offset_bits < 0 or offset_bits + n_bits > self.size_bits:
            raise InvalidParameterError("chunk lies outside the steganogram")
        start = offset_bits // 8
        return self.payload[start : start + (n_bits + 7) // 8]


class Reassembler:
    """
    Collects steganogram chunks extracted from Late packets.

    Attributes:
        size_bits (int): Expected steganogram size.
        chunks (Dict[int, bytes]): Extracted chunks keyed by bit offset.
    """

    def __init__(self, size_bits: int) -> None:
        self.size_bits: int = size_bits
        self.chunks: Dict[int, bytes] = {}

    def add(self, offset_bits: int, chunk: bytes) -> None:
        self.chunks[offset_bits] = chunk

    @property
    def payload(self) -> bytes:
        return b"".join(self.chunks[offset] for offset in sorted(self.chunks))

    @property
    def complete(self) -> bool:
        return len(self.payload) * 8 >= self.size_bits

    def open(self, key: Optional[Union[str, bytes]] = None) -> Optional[str]:
        """
        Unseal the message once every chunk arrived.

        Returns:
            Optional[str]: The plaintext, or None if chunks are missing or the key is wrong.
        """
        if not self.complete:
            return None
        fernet = Fernet(_as_bytes(key) if key is not None else load_key())
        try:
            return fernet.decrypt(self.payload).decode("utf-8")
        except InvalidToken:
            logger.warning("steganogram could not be unsealed with the given key")
            return None


def _as_bytes(key: Union[str, bytes]) -> bytes:
    return key.encode() if isinstance(key, str) else key

"""
Unit tests for steganogram sealing and reassembly.

This module contains tests for the following functionalities:
- Sealing a text message with Fernet and addressing it by bit offset.
- Reassembling chunks out of order at the receiver.
- Missing chunks and wrong keys.
- The shared key taken from the environment.
"""

import pytest
from cryptography.fernet import Fernet
from pytest_mock import MockerFixture

from classes.stego.steganogram import Reassembler, Steganogram, load_key
from utils.constants import STEGO_KEY_ENV
from utils.exceptions import InvalidParameterError


@pytest.fixture
def key() -> bytes:
    """Provides a fresh Fernet key."""
    return Fernet.generate_key()


@pytest.fixture
def steganogram(key: bytes) -> Steganogram:
    """Provides a sealed covert message."""
    return Steganogram.from_text("the eagle has landed", key)


def test_sealed_size_is_whole_bytes(steganogram: Steganogram) -> None:
    """
    Test that the steganogram size counts the sealed bytes.

    Args:
        steganogram (Steganogram): Sealed message.
    """
    assert steganogram.size_bits == 8 * len(steganogram.payload)
    assert b"eagle" not in steganogram.payload
    assert repr(steganogram) == f"Steganogram(size_bits={steganogram.size_bits})"


def test_chunks_reassemble_out_of_order(key: bytes, steganogram: Steganogram) -> None:
    """
    Test that chunks added in any order unseal to the original text.

    Args:
        key (bytes): Fernet key.
        steganogram (Steganogram): Sealed message.
    """
    reassembler = Reassembler(steganogram.size_bits)
    offsets = list(range(0, steganogram.size_bits, 1280))
    for offset in reversed(offsets):
        n_bits = min(1280, steganogram.size_bits - offset)
        reassembler.add(offset, steganogram.chunk(offset, n_bits))
    assert reassembler.complete
    assert reassembler.payload == steganogram.payload
    assert reassembler.open(key) == "the eagle has landed"


def test_incomplete_or_wrong_key(key: bytes, steganogram: Steganogram) -> None:
    """
    Test that missing chunks or another key give no message.

    Args:
        key (bytes): Fernet key.
        steganogram (Steganogram): Sealed message.
    """
    partial = Reassembler(steganogram.size_bits)
    partial.add(0, steganogram.chunk(0, 64))
    assert not partial.complete
    assert partial.open(key) is None

    whole = Reassembler(steganogram.size_bits)
    whole.add(0, steganogram.chunk(0, steganogram.size_bits))
    assert whole.open(Fernet.generate_key()) is None


def test_chunk_bounds(steganogram: Steganogram) -> None:
    """
    Test that chunks must be byte aligned and inside the steganogram.

    Args:
        steganogram (Steganogram): Sealed message.
    """
    assert steganogram.chunk(8, 16) == steganogram.payload[1:3]
    with pytest.raises(InvalidParameterError):
        steganogram.chunk(4, 8)
    with pytest.raises(InvalidParameterError):
        steganogram.chunk(0, 12)
    with pytest.raises(InvalidParameterError):
        steganogram.chunk(steganogram.size_bits, 8)


def test_shared_key_from_environment(mocker: MockerFixture, key: bytes) -> None:
    """
    Test that the shared key comes from the environment when it is set.

    Args:
        mocker (MockerFixture): pytest-mock fixture.
        key (bytes): Fernet key.
    """
    mocker.patch.dict("os.environ", {STEGO_KEY_ENV: key.decode()})
    assert load_key() == key
    sealed = Steganogram.from_text("hello")
    reassembler = Reassembler(sealed.size_bits)
    reassembler.add(0, sealed.payload)
    assert reassembler.open(key) == "hello"
    assert reassembler.open() == "hello"

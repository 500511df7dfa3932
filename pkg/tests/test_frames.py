from __future__ import annotations

import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zwavesim.frames import (
    Ack,
    BatteryReport,
    BeamFrame,
    ChecksumMismatch,
    ConfigurationGet,
    EncryptedPayload,
    FrameError,
    FrameTooLong,
    Generic,
    InvalidBeamLength,
    LengthMismatch,
    MacFrame,
    NonceGet,
    NonceReport,
    TruncatedFrame,
    UnknownMarker,
    WakeupNotification,
    capture_bytes,
    checksum_of,
    decode,
    encode,
    encode_beam,
    home_id_hash,
    invert,
    read_capture,
    requires_encryption,
    write_capture,
)

HOME = 0xC0FFEE01


def xor_oracle(data: bytes) -> int:
    # independent of the codec implementation
    out = 0xFF
    for i in range(len(data)):
        out = out ^ data[i]
    return out & 0xFF


# worked out by hand
FROZEN_CHECKSUMS = {
    b"": 0xFF,
    b"\xff": 0x00,
    b"\x01\x02\x03": 0xFF,
    b"\x00\x0e": 0xF1,
    b"\xc0\xff\xee\x01": 0x2F,
}


@pytest.mark.parametrize("data,expected", sorted(FROZEN_CHECKSUMS.items()))
def test_checksum_frozen_values(data, expected):
    assert checksum_of(data) == expected


def test_checksum_matches_oracle_on_random_inputs():
    rng = random.Random(1234)
    for _ in range(1000):
        data = rng.randbytes(rng.randrange(0, 300))
        assert checksum_of(data) == xor_oracle(data)


def test_ack_frame_bytes_are_bit_exact():
    f = MacFrame(HOME, 0x01, 0x05, Ack())
    # body: home id, src, frame control, length 0x0A, dst; then checksum; all inverted
    body = bytes.fromhex("C0FFEE01" "01" "4101" "0A" "05")
    csum = xor_oracle(b"\x00\x0e" + body)
    expected = b"\x00\x0e" + bytes(b ^ 0xFF for b in body + bytes([csum]))
    assert encode(f) == expected


@pytest.mark.parametrize(
    "payload,length",
    [(Ack(), 0x0A), (Generic(), 0x0B), (NonceGet(), 0x0C), (BatteryReport(50), 0x0D),
     (NonceReport(bytes(range(8))), 0x14)],
)
def test_length_field_is_payload_plus_ten(payload, length):
    f = MacFrame(HOME, 0x01, 0x05, payload)
    assert f.length == length
    assert invert(encode(f)[2:])[7] == length


def test_payload_prefixes():
    assert NonceGet().encode() == b"\x98\x40"
    assert NonceReport(b"\x11" * 8).encode() == b"\x98\x80" + b"\x11" * 8
    assert ConfigurationGet().encode() == b"\x70\x05"
    assert WakeupNotification().encode() == b"\x84\x07"
    assert BatteryReport(7).encode() == b"\x80\x03\x07"
    assert EncryptedPayload(b"ab").encode() == b"\x98\x81ab"


def test_only_encrypted_payload_requires_encryption():
    kinds = [NonceGet(), NonceReport(), Ack(), ConfigurationGet(), WakeupNotification(),
             BatteryReport(), EncryptedPayload(b"x"), Generic(b"x")]
    assert [requires_encryption(k) for k in kinds] == [False] * 6 + [True, False]


def test_frame_too_long():
    with pytest.raises(FrameTooLong):
        encode(MacFrame(HOME, 1, 5, Generic(bytes(247))))  # 248 payload bytes
    encode(MacFrame(HOME, 1, 5, Generic(bytes(244))))  # 245 + 10 = 255 fits


def test_field_ranges_validated():
    with pytest.raises(ValueError):
        MacFrame(1 << 32, 1, 5)
    with pytest.raises(ValueError):
        MacFrame(HOME, 256, 5)
    with pytest.raises(ValueError):
        NonceReport(b"short")


def test_flipped_last_byte_is_checksum_mismatch():
    data = bytearray(encode(MacFrame(HOME, 1, 5, NonceGet())))
    data[-1] ^= 0x01
    with pytest.raises(ChecksumMismatch):
        decode(bytes(data))


def test_decode_errors():
    good = encode(MacFrame(HOME, 1, 5, NonceGet()))
    with pytest.raises(TruncatedFrame):
        decode(b"")
    with pytest.raises(TruncatedFrame):
        decode(good[:8])
    with pytest.raises(UnknownMarker):
        decode(b"\x7e" + good[1:])
    with pytest.raises(UnknownMarker):
        decode(b"\x00\x0f" + good[2:])
    with pytest.raises(TruncatedFrame):
        decode(good[:-1])
    with pytest.raises(LengthMismatch):
        decode(good + b"\xff")


@pytest.mark.parametrize("length", [8, 20])
def test_beam_lengths(length):
    beam = BeamFrame(node_id=0x05, home_id_hash=0xAB, total_length=length)
    raw = encode_beam(beam)
    assert len(raw) == length
    assert decode(raw) == beam


def test_beam_invalid_length():
    with pytest.raises(InvalidBeamLength):
        encode_beam(BeamFrame(0x05, 0xAB, total_length=9))
    with pytest.raises(InvalidBeamLength):
        decode(encode_beam(BeamFrame(0x05, 0xAB, 20)) + b"\x55")


def test_beam_and_mac_markers_are_disjoint():
    assert isinstance(decode(encode_beam(BeamFrame(5, 1))), BeamFrame)
    assert isinstance(decode(encode(MacFrame(HOME, 1, 5))), MacFrame)


def test_home_id_hash_is_checksum_of_home_id():
    assert home_id_hash(HOME) == 0x2F


# -- properties ---------------------------------------------------------------

kinds = st.one_of(
    st.just(NonceGet()),
    st.just(Ack()),
    st.just(ConfigurationGet()),
    st.just(WakeupNotification()),
    st.builds(NonceReport, st.binary(min_size=8, max_size=8)),
    st.builds(BatteryReport, st.integers(0, 255)),
    st.builds(EncryptedPayload, st.binary(max_size=200)),
    st.builds(Generic, st.binary(max_size=200)),
)
mac_frames = st.builds(MacFrame, st.integers(0, 0xFFFFFFFF), st.integers(0, 255),
                       st.integers(0, 255), kinds)


@settings(max_examples=10_000, deadline=None)
@given(mac_frames)
def test_round_trip(frame):
    assert decode(encode(frame)) == frame


@given(st.binary(max_size=300))
def test_invert_is_an_involution(data):
    assert invert(invert(data)) == data


@settings(max_examples=300, deadline=None)
@given(mac_frames, st.integers(0, 2**16))
def test_length_byte_disagreement_rejected(frame, seed):
    raw = bytearray(encode(frame))
    body = bytearray(invert(bytes(raw[2:])))
    wrong = (body[7] + 1 + seed % 254) % 256
    body[7] = wrong
    with pytest.raises(FrameError):
        decode(bytes(raw[:2]) + invert(bytes(body)))


def _corpus(n: int = 100) -> list[MacFrame]:
    rng = random.Random(99)
    makers = [
        lambda: NonceGet(),
        lambda: Ack(),
        lambda: NonceReport(rng.randbytes(8)),
        lambda: BatteryReport(rng.randrange(256)),
        lambda: EncryptedPayload(rng.randbytes(rng.randrange(0, 30))),
        lambda: Generic(rng.randbytes(rng.randrange(0, 30))),
    ]
    return [MacFrame(rng.getrandbits(32), rng.randrange(256), rng.randrange(256),
                     rng.choice(makers)()) for _ in range(n)]


def test_every_single_byte_corruption_is_detected():
    checked = 0
    for frame in _corpus():
        raw = encode(frame)
        for i in range(len(raw)):
            for v in range(256):
                if v == raw[i]:
                    continue
                bad = raw[:i] + bytes([v]) + raw[i + 1:]
                with pytest.raises(FrameError):
                    decode(bad)
                checked += 1
    assert checked > 100 * 12 * 255


def test_capture_round_trip(tmp_path):
    frames = [encode(f) for f in _corpus(10)] + [encode_beam(BeamFrame(5, 7, 20))]
    path = tmp_path / "cap.bin"
    with open(path, "wb") as fh:
        assert write_capture(fh, frames) == len(frames)
    with open(path, "rb") as fh:
        assert list(read_capture(fh)) == frames
    blob = capture_bytes(frames[:1])
    assert blob[:2] == len(frames[0]).to_bytes(2, "little")
    assert list(read_capture(io.BytesIO(blob))) == frames[:1]

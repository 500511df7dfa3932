"""Z-Wave singlecast MAC frames and beam frames.

On-air layout of a MAC frame::

    00 0E | ~( home_id(4) src fc(2)=41 01 length dst payload checksum )

The two leading bytes are the preamble/start-of-frame marker and are sent
as-is; everything after them is bitwise inverted.  ``length`` counts the
whole body (payload + 10).  The checksum is an 8-bit XOR fold seeded with
0xFF over the marker bytes and the un-inverted body.

Beam frames are preamble-only wake signals::

    F0 | tag | node_id | home_hash | 55 55 ...   (8 or 20 bytes in total)

Their leading byte differs from the MAC marker, so the two never decode as
each other.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Union

SOF = b"\x00\x0e"
FRAME_CONTROL = b"\x41\x01"
HEADER_OVERHEAD = 10  # home_id + src + frame_control + length + dst + checksum
MAX_FRAME_LENGTH = 255

BEAM_MARKER = 0xF0
BEAM_TAG = 0xB1
BEAM_FILL = 0x55
BEAM_LENGTHS = (8, 20)


class FrameError(ValueError):
    """Base class for codec failures."""


class FrameTooLong(FrameError):
    pass


class ChecksumMismatch(FrameError):
    pass


class TruncatedFrame(FrameError):
    pass


class UnknownMarker(FrameError):
    pass


class InvalidBeamLength(FrameError):
    pass


class LengthMismatch(FrameError):
    pass


class MalformedPayload(FrameError):
    pass


# -- payload kinds ---------------------------------------------------------


@dataclass(frozen=True)
class NonceGet:
    PREFIX = b"\x98\x40"

    def encode(self) -> bytes:
        return self.PREFIX


@dataclass(frozen=True)
class NonceReport:
    PREFIX = b"\x98\x80"
    nonce: bytes = bytes(8)

    def __post_init__(self) -> None:
        if len(self.nonce) != 8:
            raise ValueError(f"nonce must be 8 bytes, got {len(self.nonce)}")

    def encode(self) -> bytes:
        return self.PREFIX + bytes(self.nonce)


@dataclass(frozen=True)
class Ack:
    PREFIX = b""

    def encode(self) -> bytes:
        return b""


@dataclass(frozen=True)
class ConfigurationGet:
    PREFIX = b"\x70\x05"

    def encode(self) -> bytes:
        return self.PREFIX


@dataclass(frozen=True)
class WakeupNotification:
    PREFIX = b"\x84\x07"

    def encode(self) -> bytes:
        return self.PREFIX


@dataclass(frozen=True)
class BatteryReport:
    PREFIX = b"\x80\x03"
    level: int = 100

    def __post_init__(self) -> None:
        if not 0 <= self.level <= 0xFF:
            raise ValueError("battery level must fit in one byte")

    def encode(self) -> bytes:
        return self.PREFIX + bytes([self.level])


@dataclass(frozen=True)
class EncryptedPayload:
    """Opaque ciphertext; the only kind that requires encryption."""

    PREFIX = b"\x98\x81"
    data: bytes = b""

    def encode(self) -> bytes:
        return self.PREFIX + bytes(self.data)


@dataclass(frozen=True)
class Generic:
    PREFIX = b"\x00"
    data: bytes = b""

    def encode(self) -> bytes:
        return self.PREFIX + bytes(self.data)


FrameKind = Union[
    NonceGet, NonceReport, Ack, ConfigurationGet, WakeupNotification,
    BatteryReport, EncryptedPayload, Generic,
]


def requires_encryption(kind: FrameKind) -> bool:
    return isinstance(kind, EncryptedPayload)


def _decode_payload(raw: bytes) -> FrameKind:
    if not raw:
        return Ack()
    if raw[0] == 0x00:
        return Generic(raw[1:])
    head, rest = raw[:2], raw[2:]
    if head == NonceGet.PREFIX and not rest:
        return NonceGet()
    if head == NonceReport.PREFIX and len(rest) == 8:
        return NonceReport(rest)
    if head == EncryptedPayload.PREFIX:
        return EncryptedPayload(rest)
    if head == ConfigurationGet.PREFIX and not rest:
        return ConfigurationGet()
    if head == WakeupNotification.PREFIX and not rest:
        return WakeupNotification()
    if head == BatteryReport.PREFIX and len(rest) == 1:
        return BatteryReport(rest[0])
    raise MalformedPayload(f"unrecognised payload {raw[:4].hex()}")


# -- frames ----------------------------------------------------------------


def checksum_of(data: Iterable[int]) -> int:
    """XOR fold of ``data`` seeded with 0xFF."""
    acc = 0xFF
    for b in data:
        acc ^= b
    return acc


def invert(data: bytes) -> bytes:
    return bytes(b ^ 0xFF for b in data)


@dataclass(frozen=True)
class MacFrame:
    home_id: int
    source_id: int
    dest_id: int
    payload: FrameKind = field(default_factory=Ack)

    def __post_init__(self) -> None:
        if not 0 <= self.home_id <= 0xFFFFFFFF:
            raise ValueError("home_id must be a 32-bit unsigned value")
        for name in ("source_id", "dest_id"):
            v = getattr(self, name)
            if not 0 <= v <= 0xFF:
                raise ValueError(f"{name} must be an 8-bit value, got {v}")

    @property
    def frame_control(self) -> bytes:
        return FRAME_CONTROL

    @property
    def length(self) -> int:
        return len(self.payload.encode()) + HEADER_OVERHEAD

    def body(self) -> bytes:
        """Un-inverted body up to, but excluding, the checksum."""
        length = self.length
        if length > MAX_FRAME_LENGTH:
            raise FrameTooLong(f"frame length {length} exceeds {MAX_FRAME_LENGTH}")
        return (
            struct.pack(">I", self.home_id)
            + bytes([self.source_id])
            + FRAME_CONTROL
            + bytes([length, self.dest_id])
            + self.payload.encode()
        )

    @property
    def checksum(self) -> int:
        return checksum_of(SOF + self.body())


@dataclass(frozen=True)
class BeamFrame:
    node_id: int
    home_id_hash: int
    total_length: int = 8
    beam_tag: int = BEAM_TAG

    def __post_init__(self) -> None:
        for name in ("node_id", "home_id_hash", "beam_tag"):
            v = getattr(self, name)
            if not 0 <= v <= 0xFF:
                raise ValueError(f"{name} must be an 8-bit value, got {v}")


def home_id_hash(home_id: int) -> int:
    """One-byte digest of a home id carried in beams."""
    return checksum_of(struct.pack(">I", home_id))


def encode(frame: MacFrame) -> bytes:
    body = frame.body()
    return SOF + invert(body + bytes([checksum_of(SOF + body)]))


def encode_beam(beam: BeamFrame) -> bytes:
    if beam.total_length not in BEAM_LENGTHS:
        raise InvalidBeamLength(f"beam length must be 8 or 20, got {beam.total_length}")
    head = bytes([BEAM_MARKER, beam.beam_tag, beam.node_id, beam.home_id_hash])
    return head + bytes([BEAM_FILL]) * (beam.total_length - len(head))


def decode(data: bytes) -> MacFrame | BeamFrame:
    data = bytes(data)
    if not data:
        raise TruncatedFrame("empty input")
    if data[0] == BEAM_MARKER:
        return _decode_beam(data)
    if data[:1] != SOF[:1]:
        raise UnknownMarker(f"unknown start byte 0x{data[0]:02x}")
    if len(data) < 2:
        raise TruncatedFrame("missing start-of-frame byte")
    if data[1] != SOF[1]:
        raise UnknownMarker(f"bad start-of-frame 0x{data[1]:02x}")
    body = invert(data[2:])
    if len(body) < HEADER_OVERHEAD:
        raise TruncatedFrame(f"{len(body)} body bytes, need at least {HEADER_OVERHEAD}")
    if body[4 + 1 : 4 + 3] != FRAME_CONTROL:
        raise MalformedPayload(f"unexpected frame control {body[5:7].hex()}")
    length = body[7]
    if length > len(body):
        raise TruncatedFrame(f"length field {length} but only {len(body)} bytes")
    if length != len(body):
        raise LengthMismatch(f"length field {length} but {len(body)} bytes present")
    if checksum_of(SOF + body[:-1]) != body[-1]:
        raise ChecksumMismatch(f"checksum 0x{body[-1]:02x} does not verify")
    (home_id,) = struct.unpack(">I", body[:4])
    return MacFrame(
        home_id=home_id,
        source_id=body[4],
        dest_id=body[8],
        payload=_decode_payload(body[9:-1]),
    )


def _decode_beam(data: bytes) -> BeamFrame:
    if len(data) not in BEAM_LENGTHS:
        if len(data) < BEAM_LENGTHS[0]:
            raise TruncatedFrame(f"beam of {len(data)} bytes")
        raise InvalidBeamLength(f"beam length must be 8 or 20, got {len(data)}")
    if any(b != BEAM_FILL for b in data[4:]):
        raise MalformedPayload("beam padding corrupted")
    return BeamFrame(node_id=data[2], home_id_hash=data[3], total_length=len(data), beam_tag=data[1])


# -- capture files -----------------------------------------------------------


def write_capture(stream: BinaryIO, records: Iterable[bytes]) -> int:
    """Write length-prefixed records; return the number written."""
    n = 0
    for rec in records:
        if len(rec) > 0xFFFF:
            raise FrameTooLong("capture record exceeds 65535 bytes")
        stream.write(struct.pack("<H", len(rec)))
        stream.write(rec)
        n += 1
    return n


def read_capture(stream: BinaryIO) -> Iterator[bytes]:
    while True:
        head = stream.read(2)
        if not head:
            return
        if len(head) < 2:
            raise TruncatedFrame("partial capture length prefix")
        (n,) = struct.unpack("<H", head)
        rec = stream.read(n)
        if len(rec) < n:
            raise TruncatedFrame(f"capture record truncated ({len(rec)}/{n} bytes)")
        yield rec


def capture_bytes(records: Iterable[bytes]) -> bytes:
    buf = io.BytesIO()
    write_capture(buf, records)
    return buf.getvalue()

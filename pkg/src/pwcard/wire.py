"""Frame format shared by every protocol.

    version (1) | protocol_id (1) | msg_type (1) | length (4, big-endian) | payload

Payloads are sequences of fields, each behind a 2-byte big-endian length.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .errors import (
    BadVersion,
    LengthMismatch,
    MalformedFrame,
    Rejected,
    Truncated,
    UnexpectedMessage,
    UnknownProtocol,
)

VERSION = 0x01
HEADER_LEN = 7
MAX_PAYLOAD = 1 << 24


class ProtocolId(IntEnum):
    SSCA = 0x01
    PSCAB = 0x02
    PSCABV = 0x03
    PSCAV = 0x04


class MsgType(IntEnum):
    MSG1 = 0x01
    MSG2 = 0x02
    MSG3 = 0x03
    MSG4 = 0x04
    VARIANT2 = 0x12
    REJECT = 0xFF


@dataclass(frozen=True)
class Frame:
    protocol_id: int
    msg_type: int
    payload: bytes = b""


def reject_frame(protocol_id: int) -> Frame:
    return Frame(protocol_id, MsgType.REJECT)


def encode_frame(frame: Frame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise LengthMismatch("payload too large")
    return (
        bytes([VERSION, frame.protocol_id, frame.msg_type])
        + len(frame.payload).to_bytes(4, "big")
        + frame.payload
    )


def parse_header(header: bytes) -> tuple[int, int, int]:
    """Validate a 7-byte header and return ``(protocol_id, msg_type, length)``."""
    if len(header) < HEADER_LEN:
        raise Truncated("short frame header")
    if header[0] != VERSION:
        raise BadVersion(f"unsupported frame version {header[0]:#04x}")
    if header[1] not in ProtocolId._value2member_map_:
        raise UnknownProtocol(f"unknown protocol id {header[1]:#04x}")
    length = int.from_bytes(header[3:7], "big")
    if length > MAX_PAYLOAD:
        raise LengthMismatch("declared payload too large")
    return header[1], header[2], length


def decode_frame(data: bytes) -> Frame:
    pid, mtype, length = parse_header(data[:HEADER_LEN])
    body = data[HEADER_LEN:]
    if len(body) < length:
        raise Truncated(f"payload has {len(body)} of {length} bytes")
    if len(body) > length:
        raise LengthMismatch("trailing bytes after payload")
    return Frame(pid, mtype, bytes(body))


def read_frame(stream) -> Frame | None:
    """Read one frame from a binary file-like object; ``None`` on clean EOF."""
    header = stream.read(HEADER_LEN)
    if not header:
        return None
    pid, mtype, length = parse_header(header)
    payload = stream.read(length) if length else b""
    if len(payload) != length:
        raise Truncated("connection closed inside a frame")
    return Frame(pid, mtype, payload)


def pack_fields(*fields: bytes) -> bytes:
    out = bytearray()
    for f in fields:
        if len(f) > 0xFFFF:
            raise ValueError("field too long")
        out += len(f).to_bytes(2, "big") + f
    return bytes(out)


def unpack_fields(payload: bytes, count: int) -> list[bytes]:
    fields = []
    pos = 0
    for _ in range(count):
        if pos + 2 > len(payload):
            raise MalformedFrame("truncated field length")
        n = int.from_bytes(payload[pos:pos + 2], "big")
        pos += 2
        if pos + n > len(payload):
            raise MalformedFrame("truncated field")
        fields.append(payload[pos:pos + n])
        pos += n
    if pos != len(payload):
        raise MalformedFrame("trailing bytes in payload")
    return fields


def expect(frame: Frame, protocol_id: int, msg_type: int) -> Frame:
    if frame.msg_type == MsgType.REJECT:
        raise Rejected("peer rejected the session")
    if frame.protocol_id != protocol_id or frame.msg_type != msg_type:
        raise UnexpectedMessage(
            f"expected protocol {protocol_id:#04x} msg {msg_type:#04x}, "
            f"got {frame.protocol_id:#04x} msg {frame.msg_type:#04x}"
        )
    return frame

"""
Wire format between edge and cloud nodes.

Every message is a 14 byte header followed by ``payload_len`` bytes, all
integers big-endian::

    magic        2 bytes  0x4E 0x43
    version      u8       1
    msg_type     u8       0 HELLO, 1 FEATURE, 2 LOGITS, 3 EXIT, 4 ERROR
    session_id   u32
    timestep     u8       1-based, 0 only on HELLO and ERROR
    flags        u8       bit 0: feature is a bottleneck code
    payload_len  u32

Payloads:

    HELLO    32 byte SHA-256 deployment digest (may be empty)
    FEATURE  4 x u16 extents (C, H, W, 0), then packed spike bits; flat
             activations are sent as (N, 1, 1)
    LOGITS   u16 K, then K x float32 cumulative decision logits
    EXIT     u8 t_exit
    ERROR    u16 error code, then a UTF-8 message
"""
from dataclasses import dataclass
from enum import IntEnum
from typing import Tuple, ClassVar
import struct
import numpy as np

from spikesplit.model.spike import Shape, SpikeTensor

MAGIC = b"\x4e\x43"
VERSION = 1
HEADER_SIZE = 14
MAX_PAYLOAD = 2 ** 32 - 1
DIGEST_SIZE = 32
FLAG_COMPRESSED = 0x01


class ProtocolError(Exception):
    """
    Raised on messages violating the wire format or the session state
    machine, and when the peer reports an ERROR.

    Attributes:
        code: :class:`ErrorCode` sent or received, if any.
    """

    def __init__(self, message: str, code: int = None):
        super().__init__(message)
        self.code = code


class HeaderError(ProtocolError):
    """
    Raised when a header can not be decoded. On a byte stream the
    following bytes can not be framed any more, the connection must be
    dropped.
    """

    pass


class FramingError(Exception):
    """
    Raised when a message is incomplete, more bytes may still arrive.
    Not a :class:`ProtocolError`.
    """

    pass


class MessageType(IntEnum):
    HELLO = 0
    FEATURE = 1
    LOGITS = 2
    EXIT = 3
    ERROR = 4


class ErrorCode(IntEnum):
    DIGEST_MISMATCH = 1
    OUT_OF_ORDER = 2
    BAD_FEATURE = 3
    UNEXPECTED_MESSAGE = 4
    INTERNAL = 5


@dataclass(frozen=True)
class MessageHeader:
    msg_type: MessageType
    session_id: int
    timestep: int = 0
    flags: int = 0
    payload_len: int = 0

    layout: ClassVar[struct.Struct] = struct.Struct(">2sBBIBBI")

    def pack(self) -> bytes:
        return self.layout.pack(
            MAGIC,
            VERSION,
            int(self.msg_type),
            self.session_id,
            self.timestep,
            self.flags,
            self.payload_len,
        )

    @property
    def compressed(self) -> bool:
        return bool(self.flags & FLAG_COMPRESSED)


def _check_header_fields(msg_type, session_id, timestep, flags):
    if not 0 <= session_id <= 0xFFFFFFFF:
        raise ProtocolError(f"Session id {session_id} does not fit 32 bits")
    if not 0 <= timestep <= 0xFF or not 0 <= flags <= 0xFF:
        raise ProtocolError(f"Timestep {timestep} or flags {flags} do not fit a byte")
    if timestep == 0 and msg_type not in (MessageType.HELLO, MessageType.ERROR):
        raise ProtocolError(f"{MessageType(msg_type).name} needs a timestep >= 1")


def encode_message(header: MessageHeader, payload: bytes = b"") -> bytes:
    """
    Returns:
        ``14 + len(payload)`` bytes, the ``payload_len`` field of
        ``header`` is replaced by the actual payload length.

    Raises:
        ``ProtocolError`` if the payload is larger than ``2^32 - 1`` bytes
        or a header field is out of range.
    """
    if len(payload) > MAX_PAYLOAD:
        raise ProtocolError(f"Payload of {len(payload)} bytes is too large")
    _check_header_fields(
        header.msg_type, header.session_id, header.timestep, header.flags
    )
    header = MessageHeader(
        MessageType(header.msg_type),
        header.session_id,
        header.timestep,
        header.flags,
        len(payload),
    )
    return header.pack() + bytes(payload)


def decode_header(data: bytes) -> MessageHeader:
    """
    Decode and validate the first 14 bytes of ``data``.

    Raises:
        ``FramingError`` if fewer than 14 bytes are given, ``HeaderError``
        on bad magic, unknown version or unknown message type.
    """
    if len(data) < HEADER_SIZE:
        raise FramingError(f"Need {HEADER_SIZE} header bytes, got {len(data)}")
    magic, version, msg_type, session_id, timestep, flags, length = (
        MessageHeader.layout.unpack(bytes(data[:HEADER_SIZE]))
    )
    if magic != MAGIC:
        raise HeaderError(f"Bad magic {magic.hex()}", ErrorCode.UNEXPECTED_MESSAGE)
    if version != VERSION:
        raise HeaderError(
            f"Unsupported protocol version {version}", ErrorCode.UNEXPECTED_MESSAGE
        )
    if msg_type not in MessageType.__members__.values():
        raise HeaderError(f"Unknown message type {msg_type}", ErrorCode.UNEXPECTED_MESSAGE)
    msg_type = MessageType(msg_type)
    _check_header_fields(msg_type, session_id, timestep, flags)
    return MessageHeader(msg_type, session_id, timestep, flags, length)


def decode_message(data: bytes) -> Tuple[MessageHeader, bytes]:
    """
    Inverse of :func:`encode_message`.

    Raises:
        ``FramingError`` on a truncated message, ``ProtocolError`` on an
        invalid header or bytes past the declared payload.
    """
    header = decode_header(data)
    end = HEADER_SIZE + header.payload_len
    if len(data) < end:
        raise FramingError(
            f"Payload declares {header.payload_len} bytes, "
            f"only {len(data) - HEADER_SIZE} available"
        )
    if len(data) > end:
        raise ProtocolError(f"{len(data) - end} trailing bytes after message")
    return header, bytes(data[HEADER_SIZE:end])


def wire_shape(shape: Shape) -> Shape:
    """
    Extents a feature of ``shape`` travels with: 1-D and 2-D activations
    are padded with trailing 1s to ``(C, H, W)``, element order is kept.

    Raises:
        ``ProtocolError`` for more than 3 extents or an extent over 65535.
    """
    dims = tuple(shape) + (1,) * (3 - len(shape))
    if len(dims) != 3 or max(dims) > 0xFFFF:
        raise ProtocolError(
            f"Feature shape {list(shape)} can not be sent, "
            f"at most 3 extents of at most 65535 are required"
        )
    return Shape(dims)


@dataclass(frozen=True)
class FeaturePayload:
    shape: Shape
    bits: bytes

    layout: ClassVar[struct.Struct] = struct.Struct(">4H")

    @classmethod
    def from_spikes(cls, spikes: SpikeTensor) -> "FeaturePayload":
        return cls(wire_shape(spikes.shape), spikes.bits)

    def encode(self) -> bytes:
        c, h, w = self.shape
        return self.layout.pack(c, h, w, 0) + self.bits

    @classmethod
    def decode(cls, payload: bytes) -> "FeaturePayload":
        if len(payload) < cls.layout.size:
            raise ProtocolError(f"Feature payload of {len(payload)} bytes is too short")
        c, h, w, reserved = cls.layout.unpack(payload[: cls.layout.size])
        if reserved != 0 or min(c, h, w) < 1:
            raise ProtocolError(f"Invalid feature extents {[c, h, w, reserved]}")
        shape = Shape(c, h, w)
        bits = payload[cls.layout.size :]
        if len(bits) != (shape.numel + 7) // 8:
            raise ProtocolError(
                f"Feature {list(shape)} needs {(shape.numel + 7) // 8} bytes, "
                f"got {len(bits)}"
            )
        return cls(shape, bytes(bits))

    def to_spikes(self, shape: Shape = None) -> SpikeTensor:
        """
        Args:
            shape: Shape to restore, e.g. ``(32,)`` for a flat activation
                sent as ``(32, 1, 1)``. Must have the same element count.

        Raises:
            ``BitFormatError`` if a padding bit is set.
        """
        spikes = SpikeTensor.from_bits(self.shape, self.bits)
        return spikes if shape is None else spikes.reshape(shape)


@dataclass(frozen=True)
class LogitsPayload:
    values: np.ndarray

    def encode(self) -> bytes:
        values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if values.shape[0] > 0xFFFF:
            raise ProtocolError(f"Too many logits: {values.shape[0]}")
        return struct.pack(">H", values.shape[0]) + values.astype(">f4").tobytes()

    @classmethod
    def decode(cls, payload: bytes) -> "LogitsPayload":
        if len(payload) < 2:
            raise ProtocolError("Logits payload is too short")
        (count,) = struct.unpack(">H", payload[:2])
        if len(payload) != 2 + 4 * count:
            raise ProtocolError(
                f"Logits payload declares {count} values, has {len(payload) - 2} bytes"
            )
        values = np.frombuffer(payload[2:], dtype=">f4").astype(np.float32)
        if not np.all(np.isfinite(values)):
            raise ProtocolError("Logits payload contains nan or inf")
        return cls(values)


def encode_exit(t_exit: int) -> bytes:
    return struct.pack(">B", t_exit)


def decode_exit(payload: bytes) -> int:
    if len(payload) != 1:
        raise ProtocolError(f"Exit payload must be 1 byte, got {len(payload)}")
    return payload[0]


def encode_error(code: int, message: str) -> bytes:
    return struct.pack(">H", int(code)) + message.encode("utf-8")


def decode_error(payload: bytes) -> Tuple[int, str]:
    if len(payload) < 2:
        raise ProtocolError("Error payload is too short")
    (code,) = struct.unpack(">H", payload[:2])
    return code, payload[2:].decode("utf-8", errors="replace")


def encode_hello(digest: bytes) -> bytes:
    if len(digest) not in (0, DIGEST_SIZE):
        raise ProtocolError(f"Hello digest must be {DIGEST_SIZE} bytes")
    return bytes(digest)


def decode_hello(payload: bytes) -> bytes:
    if len(payload) not in (0, DIGEST_SIZE):
        raise ProtocolError(
            f"Hello payload must be empty or {DIGEST_SIZE} bytes, got {len(payload)}"
        )
    return bytes(payload)


def build_message(
    msg_type: MessageType,
    session_id: int,
    timestep: int = 0,
    payload: bytes = b"",
    flags: int = 0,
) -> bytes:
    return encode_message(
        MessageHeader(msg_type, session_id, timestep, flags), payload
    )

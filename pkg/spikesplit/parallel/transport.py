"""
Message transports between edge and cloud. Both backends deliver whole
messages, reliably and in order:

* :class:`SimulatedTransport`, an in-memory pair driven by a
  :class:`.VirtualClock` and a :class:`.ChannelModel`;
* :class:`StreamTransport`, a TCP socket framed by the message header.

Each end logs every message with the transmission time the channel model
assigns to it, so latency accounting is the same for both backends.
"""
from dataclasses import dataclass
from queue import Queue, Empty
from threading import Lock
from typing import List, Optional, Tuple
import socket
import time

from spikesplit.frame.protocol import HEADER_SIZE, decode_header
from .channel import ChannelModel, VirtualClock, transmission_time


class TransportError(Exception):
    """
    Raised when a transport fails, never for malformed messages.
    """

    pass


class TransportClosed(TransportError):
    pass


SEND = "send"
RECV = "recv"


@dataclass(frozen=True)
class LogEntry:
    direction: str
    msg_type: int
    nbytes: int
    sent_at: float
    delivered_at: float
    modeled_s: float


def _msg_type(data: bytes) -> int:
    return data[3] if len(data) > 3 else -1


class Transport:
    """
    Common counters and log of both backends.
    """

    def __init__(self, channel: ChannelModel, rng_offset: int = 0):
        self.channel = channel
        self.bytes_sent = 0
        self.bytes_received = 0
        self.messages_sent = 0
        self.messages_received = 0
        self.log = []  # type: List[LogEntry]
        self._rng = channel.create_rng(rng_offset)
        self._closed = False

    @property
    def closed(self) -> bool:
        return self._closed

    def _model(self, nbytes: int, channel: ChannelModel = None) -> float:
        channel = channel or self.channel
        return transmission_time(channel.message_bits(nbytes), channel, self._rng)

    def _log_send(self, data: bytes, sent_at, delivered_at, modeled_s):
        self.bytes_sent += len(data)
        self.messages_sent += 1
        self.log.append(
            LogEntry(SEND, _msg_type(data), len(data), sent_at, delivered_at, modeled_s)
        )

    def _log_recv(self, data: bytes, sent_at, delivered_at, modeled_s):
        self.bytes_received += len(data)
        self.messages_received += 1
        self.log.append(
            LogEntry(RECV, _msg_type(data), len(data), sent_at, delivered_at, modeled_s)
        )

    def mark(self) -> int:
        """
        Returns:
            Position in the log, pass it to :meth:`entries_since`.
        """
        return len(self.log)

    def entries_since(self, mark: int) -> List[LogEntry]:
        return self.log[mark:]

    def send(self, data: bytes) -> float:
        raise NotImplementedError

    def recv(self, timeout: float = None) -> bytes:
        raise NotImplementedError

    def close(self):
        raise NotImplementedError


_CLOSE = object()


class SimulatedTransport(Transport):
    """
    One end of an in-memory link, create both ends with
    :func:`simulated_pair`.
    """

    def __init__(
        self,
        channel: ChannelModel,
        clock: VirtualClock,
        inbox: Queue,
        outbox: Queue,
        rng_offset: int = 0,
    ):
        super().__init__(channel, rng_offset)
        self.clock = clock
        self._inbox = inbox
        self._outbox = outbox

    def send(self, data: bytes) -> float:
        """
        Advance the virtual clock by the transmission time of ``data``.

        Returns:
            Virtual delivery time.
        """
        if self._closed:
            raise TransportClosed("Transport is closed.")
        data = bytes(data)
        modeled = self._model(len(data))
        sent_at = self.clock.now()
        delivered_at = self.clock.advance(modeled)
        self._outbox.put((data, sent_at, delivered_at, modeled))
        self._log_send(data, sent_at, delivered_at, modeled)
        return delivered_at

    def recv(self, timeout: float = None) -> bytes:
        if self._closed:
            raise TransportClosed("Transport is closed.")
        try:
            item = self._inbox.get(timeout=timeout)
        except Empty:
            raise TransportError(f"No message within {timeout} s")
        if item is _CLOSE:
            self._closed = True
            raise TransportClosed("Peer closed the transport.")
        data, sent_at, delivered_at, modeled = item
        self._log_recv(data, sent_at, delivered_at, modeled)
        return data

    def close(self):
        if not self._closed:
            self._closed = True
            self._outbox.put(_CLOSE)


def simulated_pair(
    uplink: ChannelModel,
    downlink: ChannelModel = None,
    clock: VirtualClock = None,
) -> Tuple[SimulatedTransport, SimulatedTransport]:
    """
    Create a connected ``(edge end, cloud end)`` pair sharing one clock.

    Args:
        uplink: Channel of edge to cloud messages.
        downlink: Channel of cloud to edge messages, same as ``uplink`` if
            not given.
        clock: Shared clock, a new one if not given.
    """
    clock = clock or VirtualClock()
    up, down = Queue(), Queue()
    edge = SimulatedTransport(uplink, clock, inbox=down, outbox=up, rng_offset=0)
    cloud = SimulatedTransport(
        downlink or uplink, clock, inbox=up, outbox=down, rng_offset=1
    )
    return edge, cloud


class StreamTransport(Transport):
    """
    Message framing over a connected TCP socket. One reader and one writer
    may use it concurrently.

    Args:
        sock: Connected socket.
        channel: Model of the link messages are sent on.
        recv_channel: Model of the link messages arrive on, defaults to
            ``channel``.
    """

    def __init__(
        self,
        sock: socket.socket,
        channel: ChannelModel = None,
        recv_channel: ChannelModel = None,
        rng_offset: int = 0,
    ):
        super().__init__(channel or ChannelModel(), rng_offset)
        self.recv_channel = recv_channel or self.channel
        self._sock = sock
        self._send_lock = Lock()
        self._recv_lock = Lock()

    def send(self, data: bytes) -> float:
        """
        Returns:
            Wall clock time (``time.perf_counter``) after the bytes were
            handed to the socket.
        """
        if self._closed:
            raise TransportClosed("Transport is closed.")
        data = bytes(data)
        modeled = self._model(len(data))
        with self._send_lock:
            sent_at = time.perf_counter()
            try:
                self._sock.sendall(data)
            except OSError as e:
                raise TransportError(f"Send failed: {e}") from e
            delivered_at = time.perf_counter()
        self._log_send(data, sent_at, delivered_at, modeled)
        return delivered_at

    def _read_exactly(self, size: int, allow_eof: bool) -> Optional[bytes]:
        chunks = []
        remaining = size
        while remaining > 0:
            try:
                chunk = self._sock.recv(remaining)
            except socket.timeout as e:
                raise TransportError(f"Receive timed out: {e}") from e
            except OSError as e:
                raise TransportError(f"Receive failed: {e}") from e
            if not chunk:
                if allow_eof and remaining == size:
                    return None
                raise TransportClosed("Peer closed the connection mid message.")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def recv(self, timeout: float = None) -> bytes:
        """
        Read one whole message.

        Raises:
            ``TransportClosed`` when the peer closed the connection,
            ``HeaderError`` if the header is invalid, the stream can not be
            framed after it.
        """
        if self._closed:
            raise TransportClosed("Transport is closed.")
        with self._recv_lock:
            self._sock.settimeout(timeout)
            started = time.perf_counter()
            head = self._read_exactly(HEADER_SIZE, allow_eof=True)
            if head is None:
                self._closed = True
                raise TransportClosed("Peer closed the connection.")
            header = decode_header(head)
            payload = self._read_exactly(header.payload_len, allow_eof=False)
            arrived = time.perf_counter()
        data = head + payload
        modeled = transmission_time(
            self.recv_channel.message_bits(len(data)), self.recv_channel, self._rng
        )
        self._log_recv(data, started, arrived, modeled)
        return data

    def close(self):
        if self._closed and self._sock.fileno() == -1:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def connect(
    address: Tuple[str, int],
    channel: ChannelModel = None,
    recv_channel: ChannelModel = None,
    timeout: float = 10.0,
) -> StreamTransport:
    """
    Connect to a cloud node.

    Raises:
        ``TransportError`` if the connection fails.
    """
    try:
        sock = socket.create_connection(address, timeout=timeout)
    except OSError as e:
        raise TransportError(f"Failed to connect to {address}: {e}") from e
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return StreamTransport(sock, channel, recv_channel)

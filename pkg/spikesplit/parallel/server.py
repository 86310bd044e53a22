from typing import Callable, Tuple, Any
import socket
import socketserver

from spikesplit.utils.helper_classes import Counter
from spikesplit.utils.logging import default_logger
from .channel import ChannelModel
from .transport import StreamTransport

ConnectionHandler = Callable[[StreamTransport], Any]


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server = self.server  # type: MessageServer
        sock = self.request
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        transport = StreamTransport(sock, server.channel)
        server.connections.count()
        try:
            server.connection_handler(transport)
        except Exception:
            server.logger.exception(
                f"Connection from {self.client_address} failed."
            )
        finally:
            transport.close()


class MessageServer(socketserver.ThreadingTCPServer):
    """
    TCP server handing every accepted connection, wrapped in a
    :class:`.StreamTransport`, to ``connection_handler`` on its own thread.

    Args:
        address: ``(host, port)`` to bind, port 0 picks a free port.
        connection_handler: Called with the transport of each connection.
        channel: Model of the link replies are sent on.
        logger: Logger of connection failures.
    """

    daemon_threads = True
    allow_reuse_address = True

    def __init__(
        self,
        address: Tuple[str, int],
        connection_handler: ConnectionHandler,
        channel: ChannelModel = None,
        logger=None,
    ):
        self.connection_handler = connection_handler
        self.channel = channel or ChannelModel()
        self.logger = logger or default_logger
        self.connections = Counter()
        super().__init__(address, _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

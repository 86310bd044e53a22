from spikesplit.parallel.server import MessageServer
from spikesplit.parallel.transport import TransportClosed, connect
from spikesplit.parallel.thread import Thread
from spikesplit.frame.protocol import MessageType, build_message, encode_exit
from test.util_fixtures import *
from test.util_platforms import requires_loopback

from unittest import mock
import pytest


def echo(transport):
    while True:
        try:
            transport.send(transport.recv(10))
        except TransportClosed:
            return


@pytest.fixture()
def serve():
    servers = []

    def start(handler, logger=None):
        server = MessageServer(("127.0.0.1", 0), handler, logger=logger)
        thread = Thread(target=server.serve_forever, kwargs={"poll_interval": 0.05})
        thread.start()
        servers.append((server, thread))
        return server

    yield start
    for server, thread in servers:
        server.shutdown()
        server.server_close()
        thread.join_result(timeout=10)


@requires_loopback
class TestMessageServer:
    def test_echo(self, serve):
        server = serve(echo)
        assert server.port > 0
        clients = [connect(("127.0.0.1", server.port), timeout=5) for _ in range(3)]
        for i, client in enumerate(clients):
            data = build_message(MessageType.EXIT, i, 1, encode_exit(1))
            client.send(data)
            assert client.recv(5) == data
        for client in clients:
            client.close()
        assert server.connections.get() == 3

    def test_handler_failure(self, serve):
        logger = mock.MagicMock()

        def broken(transport):
            raise RuntimeError("handler failed")

        server = serve(broken, logger=logger)
        client = connect(("127.0.0.1", server.port), timeout=5)
        # the server closes the connection after the handler failed
        with pytest.raises(TransportClosed):
            client.recv(5)
        client.close()
        logger.exception.assert_called_once()
        assert "failed" in logger.exception.call_args[0][0]

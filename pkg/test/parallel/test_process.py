from spikesplit.parallel.process import Process, ProcessException
from test.util_fixtures import *
from test.util_platforms import linux_only

import time
import pytest


def fail():
    raise RuntimeError("Cloud node failed")


def send_value(conn, value):
    conn.send(value)


def sleep_long():
    time.sleep(60)


class TestProcess:
    def test_target(self):
        from spikesplit.parallel import get_context

        recv, send = get_context("spawn").Pipe(duplex=False)
        process = Process(target=send_value, args=(send, 42))
        process.start()
        assert recv.recv() == 42
        process.join()
        process.watch()
        assert process.exception is None
        assert process.exitcode == 0

    def test_exception(self):
        process = Process(target=fail)
        process.start()
        process.join()
        with pytest.raises(ProcessException, match="Cloud node failed"):
            process.watch()
        assert isinstance(process.exception, ProcessException)

    @linux_only
    def test_stop(self):
        process = Process(target=sleep_long)
        process.start()
        time.sleep(0.5)
        process.stop(timeout=10)
        assert not process.is_alive()
        assert process.exitcode != 0

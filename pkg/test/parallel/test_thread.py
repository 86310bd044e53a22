from spikesplit.parallel.thread import Thread, ThreadException
from test.util_fixtures import *

import time
import pytest


def add(a, b=0):
    return a + b


def fail():
    raise RuntimeError("Cloud node failed")


class TestThread:
    def test_result(self):
        thread = Thread(target=add, args=(1,), kwargs={"b": 2})
        thread.start()
        assert thread.join_result(timeout=5) == 3
        assert thread.exception is None
        assert thread.daemon

    def test_exception(self):
        thread = Thread(target=fail)
        thread.start()
        thread.join()
        assert isinstance(thread.exception, ThreadException)
        with pytest.raises(ThreadException, match="Cloud node failed"):
            thread.watch()
        with pytest.raises(ThreadException, match="RuntimeError"):
            thread.join_result()

    def test_cleaner(self):
        cleaned = []

        def cleaner():
            cleaned.append(True)
            raise ValueError("Cleaner failed")

        thread = Thread(target=fail, cleaner=cleaner)
        thread.start()
        thread.join()
        assert cleaned == [True]
        with pytest.raises(ThreadException, match="Exception 1"):
            thread.watch()

    def test_timeout(self):
        thread = Thread(target=time.sleep, args=(1,))
        thread.start()
        with pytest.raises(ThreadException, match="did not finish"):
            thread.join_result(timeout=0.01)
        thread.join()

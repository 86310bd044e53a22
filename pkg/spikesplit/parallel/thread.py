import traceback
import threading


class ThreadException(Exception):
    pass


def format_exceptions(exceptions):
    all_tb = ""
    for i, exc in enumerate(exceptions):
        tb = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__))
        all_tb += f"\nException {i}:\n{tb}"
    return all_tb


class Thread(threading.Thread):
    """
    Thread which keeps the return value of its target, and the traceback of
    anything it raised, e.g. the cloud node of a simulated run.

    Example::

        cloud = Thread(target=serve_connection, args=(node, transport))
        cloud.start()
        ...
        served = cloud.join_result(timeout=10)
    """

    def __init__(
        self, target=None, name=None, args=(), kwargs=None, cleaner=None, daemon=True
    ):
        super().__init__(
            target=target, name=name, args=args, kwargs=kwargs or {}, daemon=daemon
        )
        self._target_fn = target
        self._target_args = args
        self._target_kwargs = kwargs or {}
        self._cleaner = cleaner
        self._exception_str = ""
        self._has_exception = False
        self.result = None

    @property
    def exception(self):
        if not self._has_exception:
            return None
        return ThreadException(self._exception_str)

    def watch(self):
        """
        Raise a ``ThreadException`` if the target raised.
        """
        if self._has_exception:
            raise self.exception

    def join_result(self, timeout=None):
        """
        Join, re-raise a failure of the target, and return its result.
        """
        self.join(timeout)
        if self.is_alive():
            raise ThreadException(f"Thread {self.name} did not finish in {timeout} s")
        self.watch()
        return self.result

    def run(self):
        exc = []
        try:
            if self._target_fn is not None:
                self.result = self._target_fn(*self._target_args, **self._target_kwargs)
        except BaseException as e:
            exc.append(e)
        finally:
            if self._cleaner is not None:
                try:
                    self._cleaner()
                except BaseException as e:
                    exc.append(e)
            if exc:
                self._exception_str = format_exceptions(exc)
                self._has_exception = True

from multiprocessing import get_context
from multiprocessing.process import BaseProcess

from .thread import format_exceptions

_spawn_context = get_context("spawn")


class ProcessException(Exception):
    pass


class Process(BaseProcess):
    """
    Spawned process whose failures are reported back to the parent as a
    ``ProcessException`` carrying the remote traceback. Used to run a cloud
    node next to the edge in socket mode.
    """

    def __init__(
        self,
        target=None,
        name=None,
        args=(),
        kwargs=None,
        cleaner=None,
        ctx=_spawn_context,
        daemon=True,
    ):
        self._exc_pipe = ctx.Pipe(duplex=False)
        super().__init__(
            target=target, name=name, args=args, kwargs=kwargs or {}, daemon=daemon
        )
        self._cleaner = cleaner
        self._ctx = ctx
        self._start_method = ctx.Process._start_method
        self._exception = None

    @staticmethod
    def _Popen(process_obj):
        assert isinstance(process_obj, Process)
        return process_obj._ctx.Process._Popen(process_obj)

    @property
    def exception(self):
        if self._exception is not None:
            return self._exception
        if not self._exc_pipe[0].poll(timeout=1e-4):
            return None
        self._exception = ProcessException(self._exc_pipe[0].recv())
        return self._exception

    def watch(self):
        if self._exc_pipe[0].poll(timeout=1e-4):
            self.join()
            raise self.exception

    def stop(self, timeout: float = 5.0):
        """
        Terminate the process if it is still running, then raise what it
        raised before, if anything.
        """
        if self.is_alive():
            self.terminate()
        self.join(timeout)
        self.watch()

    def run(self):
        exc = []
        try:
            super().run()
        except BaseException as e:
            exc.append(e)
        finally:
            if self._cleaner is not None:
                try:
                    self._cleaner()
                except BaseException as e:
                    exc.append(e)
            if exc:
                self._exc_pipe[1].send(format_exceptions(exc))

import time
from threading import Lock


class Counter:
    """
    Thread safe monotone counter, used for session ids and served-session
    statistics.
    """

    def __init__(self, start=0, step=1):
        self._count = start
        self._start = start
        self._step = step
        self._lock = Lock()

    def count(self):
        """
        Move counter forward by ``step``.

        Returns:
            The value after moving forward.
        """
        with self._lock:
            self._count += self._step
            return self._count

    def get(self):
        """
        Get the internal number of counter.
        """
        return self._count

    def reset(self):
        """
        Reset the counter.
        """
        with self._lock:
            self._count = self._start

    def __eq__(self, other):
        return self._count == other

    def __repr__(self):
        return "%d" % self._count


class Timer:
    """
    Wall clock timer based on ``time.perf_counter``.
    """

    def __init__(self):
        self._last = time.perf_counter()

    def begin(self):
        """
        Begin timing.
        """
        self._last = time.perf_counter()

    def end(self):
        """
        Returns:
            Seconds elapsed since last ``begin()``
        """
        return time.perf_counter() - self._last


class Stopwatch:
    """
    Accumulates several timed sections, e.g. the edge half of every
    timestep of one sample.

    Example::

        watch = Stopwatch()
        with watch:
            run_edge_half()
        with watch:
            run_edge_half()
        watch.total  # seconds spent in both sections
    """

    def __init__(self):
        self.total = 0.0
        self.laps = []
        self._timer = Timer()

    def __enter__(self):
        self._timer.begin()
        return self

    def __exit__(self, *_):
        lap = self._timer.end()
        self.laps.append(lap)
        self.total += lap
        return False

    def reset(self):
        self.total = 0.0
        self.laps = []
